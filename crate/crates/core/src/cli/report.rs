//! The flat key-value run report and the verdict evidence behind it.

use std::fmt::Write as _;
use std::io::{BufRead, Write};

use super::config::{Document, RunConfig};
use crate::energy::{Energy, Field};
use crate::error::{Error, Result};
use crate::freeboundary::FbReport;
use crate::solve::StageRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    BelowThreshold,
    Failed,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::BelowThreshold => "below_threshold",
            Status::Failed => "failed",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "ok" => Some(Status::Ok),
            "below_threshold" => Some(Status::BelowThreshold),
            "failed" => Some(Status::Failed),
            _ => None,
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => 0,
            Status::Failed => 1,
            Status::BelowThreshold => 2,
        }
    }
}

/// Numbers the verdicts are decided on. Everything here is recomputed from
/// the field files by `verify`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evidence {
    pub omega_measure: f64,
    /// `u = 1` is tested as `|u - 1| <= plateau_tol`.
    pub plateau_tol: f64,
    pub j_u0: f64,
    pub j_u1: Option<f64>,
    pub plateau_measure_u1: Option<f64>,
    /// Lumped measure of `{u1 > 1 + plateau_tol}`.
    pub super_level_u1: Option<f64>,
    pub min_interior_u1: Option<f64>,
    /// `max (u1 - u0)` over all vertices.
    pub max_excess_u1: Option<f64>,
}

impl Evidence {
    pub fn compute(
        energy: &Energy<'_, f64>,
        u0: &Field<f64>,
        u1: Option<&Field<f64>>,
        plateau_tol: f64,
    ) -> Result<Self> {
        let j_u0 = energy.j(u0)?.total;
        let mut ev = Evidence {
            omega_measure: energy.mesh().omega_measure(),
            plateau_tol,
            j_u0,
            j_u1: None,
            plateau_measure_u1: None,
            super_level_u1: None,
            min_interior_u1: None,
            max_excess_u1: None,
        };
        if let Some(u1) = u1 {
            let v = u1.values();
            ev.j_u1 = Some(energy.j(u1)?.total);
            ev.plateau_measure_u1 = Some(energy.nodal_measure(v, |x| (x - 1.0).abs() <= plateau_tol));
            ev.super_level_u1 = Some(energy.nodal_measure(v, |x| x > 1.0 + plateau_tol));
            let mask = energy.mesh().boundary_mask();
            ev.min_interior_u1 = Some(
                v.iter()
                    .zip(mask)
                    .filter(|(_, &b)| !b)
                    .map(|(&x, _)| x)
                    .fold(f64::INFINITY, f64::min),
            );
            ev.max_excess_u1 = Some(
                v.iter()
                    .zip(u0.values())
                    .map(|(&a, &b)| a - b)
                    .fold(f64::NEG_INFINITY, f64::max),
            );
        }
        Ok(ev)
    }

    fn entries(&self) -> Vec<(&'static str, Option<f64>)> {
        vec![
            ("omega_measure", Some(self.omega_measure)),
            ("plateau_tol", Some(self.plateau_tol)),
            ("j_u0", Some(self.j_u0)),
            ("j_u1", self.j_u1),
            ("plateau_measure_u1", self.plateau_measure_u1),
            ("super_level_u1", self.super_level_u1),
            ("min_interior_u1", self.min_interior_u1),
            ("max_excess_u1", self.max_excess_u1),
        ]
    }

    pub fn verdicts(&self) -> Verdicts {
        let omega = self.omega_measure;
        let plateau = self.plateau_measure_u1;
        Verdicts {
            j_u0_below_minus_omega: self.j_u0 < -omega,
            j_u1_above_minus_plateau: matches!((self.j_u1, plateau), (Some(j), Some(m)) if j > -m),
            plateau_below_omega: plateau.is_some_and(|m| m < omega),
            u1_positive: self.min_interior_u1.is_some_and(|v| v > 0.0),
            u1_le_u0: self.max_excess_u1.is_some_and(|v| v <= 0.0),
            u1_super_level_nonempty: self.super_level_u1.is_some_and(|m| m > 0.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verdicts {
    /// `J(u0) < -|Ω|`
    pub j_u0_below_minus_omega: bool,
    /// `J(u1) > -m({u1 = 1})`
    pub j_u1_above_minus_plateau: bool,
    /// `-m({u1 = 1}) > -|Ω|`
    pub plateau_below_omega: bool,
    /// `u1 > 0` at interior vertices
    pub u1_positive: bool,
    /// `u1 <= u0` at every vertex
    pub u1_le_u0: bool,
    /// `m({u1 > 1}) > 0`
    pub u1_super_level_nonempty: bool,
}

impl Verdicts {
    pub fn entries(&self) -> [(&'static str, bool); 6] {
        [
            ("j_u0_below_minus_omega", self.j_u0_below_minus_omega),
            ("j_u1_above_minus_plateau", self.j_u1_above_minus_plateau),
            ("plateau_below_omega", self.plateau_below_omega),
            ("u1_positive", self.u1_positive),
            ("u1_le_u0", self.u1_le_u0),
            ("u1_super_level_nonempty", self.u1_super_level_nonempty),
        ]
    }

    pub fn all(&self) -> bool {
        self.entries().iter().all(|&(_, v)| v)
    }
}

/// Free-boundary diagnostics of one branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FbSummary {
    pub delta: f64,
    pub segments: usize,
    pub reliable: usize,
    pub length: f64,
    pub median_jump: Option<f64>,
    pub generalized: f64,
    pub harmonic_residual: f64,
    pub interior_residual: f64,
}

impl From<&FbReport<f64>> for FbSummary {
    fn from(r: &FbReport<f64>) -> Self {
        Self {
            delta: r.delta,
            segments: r.level_set.len(),
            reliable: r.reliable_count(),
            length: r.level_set.total_length(),
            median_jump: r.median_jump,
            generalized: r.generalized.value,
            harmonic_residual: r.harmonic_residual,
            interior_residual: r.interior_residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    /// `None` when the configuration itself was rejected.
    pub config: Option<RunConfig>,
    pub status: Status,
    pub error: Option<String>,
    pub omega_measure: Option<f64>,
    pub c1_estimate: Option<f64>,
    pub eps_zero: Option<f64>,
    pub stages: Vec<StageRow<f64>>,
    pub evidence: Option<Evidence>,
    pub verdicts: Option<Verdicts>,
    pub fb_u0: Option<FbSummary>,
    pub fb_u1: Option<FbSummary>,
}

impl RunReport {
    pub fn failed(config: Option<RunConfig>, error: String) -> Self {
        Self {
            config,
            status: Status::Failed,
            error: Some(error),
            omega_measure: None,
            c1_estimate: None,
            eps_zero: None,
            stages: Vec::new(),
            evidence: None,
            verdicts: None,
            fb_u0: None,
            fb_u1: None,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: &dyn std::fmt::Display| {
            let _ = writeln!(s, "{k} = {v}");
        };
        if let Some(c) = &self.config {
            for (k, v) in c.echo() {
                put(&format!("config.{k}"), &v);
            }
        }
        put("status", &self.status.name());
        if let Some(e) = &self.error {
            // keep the record on one line
            put("error", &e.replace('\n', " "));
        }
        let opt = |put: &mut dyn FnMut(&str, &dyn std::fmt::Display), k: &str, v: Option<f64>| {
            if let Some(v) = v {
                put(k, &v);
            }
        };
        opt(&mut put, "omega_measure", self.omega_measure);
        opt(&mut put, "c1_estimate", self.c1_estimate);
        opt(&mut put, "eps_zero", self.eps_zero);
        put("stages", &self.stages.len());
        if let Some(last) = self.stages.last() {
            put("final.eps", &last.eps);
            put("final.j_eps_u0", &last.j_eps_u0);
            put("final.j_eps_u1", &last.j_eps_u1);
            put("final.converged_u0", &last.converged_u0);
            put("final.converged_u1", &last.converged_u1);
        }
        if let Some(ev) = &self.evidence {
            for (k, v) in ev.entries() {
                opt(&mut put, &format!("evidence.{k}"), v);
            }
        }
        if let Some(vd) = &self.verdicts {
            for (k, v) in vd.entries() {
                put(&format!("verdict.{k}"), &v);
            }
            put("verdict.all", &vd.all());
        }
        for (name, fb) in [("u0", &self.fb_u0), ("u1", &self.fb_u1)] {
            if let Some(fb) = fb {
                let p = |k: &str| format!("fb.{name}.{k}");
                put(&p("delta"), &fb.delta);
                put(&p("segments"), &fb.segments);
                put(&p("reliable"), &fb.reliable);
                put(&p("length"), &fb.length);
                opt(&mut put, &p("median_jump"), fb.median_jump);
                put(&p("generalized"), &fb.generalized);
                put(&p("harmonic_residual"), &fb.harmonic_residual);
                put(&p("interior_residual"), &fb.interior_residual);
            }
        }
        s
    }
}

/// The stored side of a report as needed by `verify`.
#[derive(Debug, Clone, PartialEq)]
pub struct StoredReport {
    pub config: RunConfig,
    pub status: Status,
    pub evidence: Vec<(String, f64)>,
    pub verdicts: Vec<(String, bool)>,
}

pub fn read_report(text: &str, path: &str) -> Result<StoredReport> {
    let bad = |msg: String| Error::Format {
        path: path.to_string(),
        msg,
    };
    let doc = Document::parse(text).map_err(|e| bad(e.to_string()))?;
    let status = doc
        .get("status")
        .and_then(Status::parse)
        .ok_or_else(|| bad("missing or invalid `status`".into()))?;
    let echo: String = {
        let c = doc.strip_prefix("config.");
        c.keys()
            .map(|k| format!("{k} = {}\n", c.get(k).unwrap_or_default()))
            .collect()
    };
    if echo.is_empty() {
        return Err(bad("report has no configuration echo".into()));
    }
    let config = super::config::parse_config(&echo).map_err(|e| bad(e.to_string()))?;
    let ev = doc.strip_prefix("evidence.");
    let evidence = ev
        .keys()
        .map(|k| {
            let v = ev.get(k).unwrap_or_default();
            v.parse::<f64>()
                .map(|x| (k.to_string(), x))
                .map_err(|_| bad(format!("evidence.{k}: bad number `{v}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    let vd = doc.strip_prefix("verdict.");
    let verdicts = vd
        .keys()
        .filter(|&k| k != "all")
        .map(|k| {
            let v = vd.get(k).unwrap_or_default();
            v.parse::<bool>()
                .map(|x| (k.to_string(), x))
                .map_err(|_| bad(format!("verdict.{k}: bad boolean `{v}`")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(StoredReport {
        config,
        status,
        evidence,
        verdicts,
    })
}

impl Evidence {
    pub(crate) fn named(&self) -> Vec<(String, f64)> {
        self.entries()
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
            .collect()
    }
}

impl Verdicts {
    pub(crate) fn named(&self) -> Vec<(String, bool)> {
        self.entries().iter().map(|&(k, v)| (k.to_string(), v)).collect()
    }
}

const STAGES_HEADER: &str = "eps,j_eps_u0,j_u0,j_eps_u1,j_u1,grad_u0,grad_u1,max_grad_u0,max_grad_u1,half_norm_sq_u0,converged_u0,converged_u1";

pub fn write_stages_csv<W: Write>(rows: &[StageRow<f64>], w: &mut W) -> Result<()> {
    writeln!(w, "{STAGES_HEADER}")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.eps,
            r.j_eps_u0,
            r.j_u0,
            r.j_eps_u1,
            r.j_u1,
            r.grad_u0,
            r.grad_u1,
            r.max_grad_u0,
            r.max_grad_u1,
            r.half_norm_sq_u0,
            u8::from(r.converged_u0),
            u8::from(r.converged_u1)
        )?;
    }
    Ok(())
}

pub fn read_stages_csv<R: BufRead>(r: R, path: &str) -> Result<Vec<StageRow<f64>>> {
    let bad = |msg: String| Error::Format {
        path: path.to_string(),
        msg,
    };
    let mut lines = r.lines();
    match lines.next() {
        Some(Ok(h)) if h.trim() == STAGES_HEADER => {}
        _ => return Err(bad("missing stages header".into())),
    }
    let mut rows = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 12 {
            return Err(bad(format!("line {}: expected 12 columns", k + 2)));
        }
        let num = |i: usize| {
            cols[i]
                .parse::<f64>()
                .map_err(|_| bad(format!("line {}: bad number `{}`", k + 2, cols[i])))
        };
        let flag = |i: usize| match cols[i] {
            "0" => Ok(false),
            "1" => Ok(true),
            c => Err(bad(format!("line {}: bad flag `{c}`", k + 2))),
        };
        rows.push(StageRow {
            eps: num(0)?,
            j_eps_u0: num(1)?,
            j_u0: num(2)?,
            j_eps_u1: num(3)?,
            j_u1: num(4)?,
            grad_u0: num(5)?,
            grad_u1: num(6)?,
            max_grad_u0: num(7)?,
            max_grad_u1: num(8)?,
            half_norm_sq_u0: num(9)?,
            converged_u0: flag(10)?,
            converged_u1: flag(11)?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stages_round_trip() {
        let row = StageRow {
            eps: 0.1,
            j_eps_u0: -2.5,
            j_u0: -2.6,
            j_eps_u1: 1.0 / 3.0,
            j_u1: 0.3,
            grad_u0: 1e-9,
            grad_u1: 3e-7,
            max_grad_u0: 12.7,
            max_grad_u1: 8.1,
            half_norm_sq_u0: 40.0,
            converged_u0: true,
            converged_u1: false,
        };
        let mut buf = Vec::new();
        write_stages_csv(&[row, row], &mut buf).unwrap();
        let back = read_stages_csv(&buf[..], "stages.csv").unwrap();
        assert_eq!(back, vec![row, row]);
    }

    #[test]
    fn verdicts_follow_evidence() {
        let mut ev = Evidence {
            omega_measure: 1.0,
            plateau_tol: 1e-3,
            j_u0: -2.0,
            j_u1: Some(2.4),
            plateau_measure_u1: Some(0.01),
            super_level_u1: Some(0.1),
            min_interior_u1: Some(1e-3),
            max_excess_u1: Some(-1e-4),
        };
        assert!(ev.verdicts().all());
        ev.max_excess_u1 = Some(1e-12);
        assert!(!ev.verdicts().u1_le_u0);
        ev.j_u1 = None;
        assert!(!ev.verdicts().j_u1_above_minus_plateau);
    }
}
