//! Batch front end: configuration, runs, artifacts and their verification.
//!
//! A run writes into its output directory:
//!
//! | file | content |
//! |------|---------|
//! | `report.txt` | configuration echo, status, stage summary, evidence, verdicts |
//! | `stages.csv` | one row per ε stage |
//! | `u0.csv`, `u1.csv` | nodal values of both branches |
//! | `fb_u0.csv`, `fb_u1.csv` | level-set segments with one-sided gradients |
//! | `mesh_vertices.csv`, `mesh_cells.csv` | the mesh |

mod config;
mod report;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

pub use config::{parse_config, Document, MeshSpec, RunConfig};
pub use report::{
    read_report, read_stages_csv, write_stages_csv, Evidence, FbSummary, RunReport, Status,
    StoredReport, Verdicts,
};

use crate::energy::{Energy, Field};
use crate::error::{Error, Result};
use crate::freeboundary::fb_report;
use crate::mesh::{assemble, Mesh};
use crate::solve::continuation;

// free-boundary diagnostics look beyond the smoothing layer {|u - 1| < ε}
const FB_DELTA_PER_EPS: f64 = 3.0;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn write_field(dir: &Path, name: &str, f: &Field<f64>) -> Result<()> {
    let mut w = create(dir, name)?;
    f.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn read_field(dir: &Path, name: &str, mesh: &Mesh<f64>) -> Result<Field<f64>> {
    let path = dir.join(name);
    let file = File::open(&path).map_err(|e| Error::Format {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    Field::read_csv(mesh, BufReader::new(file), &path.display().to_string())
}

fn write_report(dir: &Path, report: &RunReport) -> Result<()> {
    let mut w = create(dir, "report.txt")?;
    w.write_all(report.to_text().as_bytes())?;
    w.flush()?;
    Ok(())
}

/// Reads and parses `config_path`, then runs. A rejected configuration
/// still leaves a failed `report.txt` with the error in `out`.
pub fn run_file(config_path: &Path, out: &Path) -> Result<RunReport> {
    std::fs::create_dir_all(out)?;
    let parsed = std::fs::read_to_string(config_path)
        .map_err(Error::from)
        .and_then(|t| parse_config(&t));
    match parsed {
        Ok(c) => run(&c, out),
        Err(e) => {
            let r = RunReport::failed(None, e.to_string());
            write_report(out, &r)?;
            Ok(r)
        }
    }
}

/// Runs the continuation for `config` and writes all artifacts to `out`.
/// Solver errors are recorded in the report (status `failed`); only I/O
/// errors are returned.
pub fn run(config: &RunConfig, out: &Path) -> Result<RunReport> {
    std::fs::create_dir_all(out)?;
    let report = match execute(config, out) {
        Ok(r) => r,
        Err(Error::Io(e)) => return Err(Error::Io(e)),
        Err(e) => RunReport::failed(Some(*config), e.to_string()),
    };
    write_report(out, &report)?;
    Ok(report)
}

fn execute(config: &RunConfig, out: &Path) -> Result<RunReport> {
    let mesh = config.mesh.build()?;
    {
        let mut v = create(out, "mesh_vertices.csv")?;
        let mut c = create(out, "mesh_cells.csv")?;
        mesh.write_csv(&mut v, &mut c)?;
        v.flush()?;
        c.flush()?;
    }
    // partial record in case the solve aborts
    write_report(out, &RunReport::failed(Some(*config), "run did not finish".into()))?;
    let forms = assemble(&mesh)?;
    let energy = Energy::new(&mesh, &forms, config.model, config.solve.lambda)?;
    let cont = continuation(&config.solve, &energy)?;

    {
        let mut w = create(out, "stages.csv")?;
        write_stages_csv(&cont.stages, &mut w)?;
        w.flush()?;
    }
    write_field(out, "u0.csv", &cont.u0.field)?;
    let tol = cont
        .stages
        .last()
        .map_or_else(|| config.solve.eps_start_value(), |s| s.eps);
    let fb0 = fb_report(&energy, &cont.u0.field, FB_DELTA_PER_EPS * tol, None)?;
    {
        let mut w = create(out, "fb_u0.csv")?;
        fb0.write_csv(&mut w)?;
        w.flush()?;
    }
    let mut report = RunReport {
        config: Some(*config),
        status: Status::Ok,
        error: None,
        omega_measure: Some(cont.omega_measure),
        c1_estimate: Some(cont.c1_estimate),
        eps_zero: cont.eps_zero,
        stages: cont.stages.clone(),
        evidence: None,
        verdicts: None,
        fb_u0: Some(FbSummary::from(&fb0)),
        fb_u1: None,
    };
    let u1 = match (&cont.u1, cont.below_threshold) {
        (_, true) => {
            report.status = Status::BelowThreshold;
            None
        }
        (None, false) => {
            report.status = Status::Failed;
            report.error = Some("schedule has no stage below the threshold width".into());
            None
        }
        (Some(b), false) => {
            write_field(out, "u1.csv", &b.field)?;
            let fb1 = fb_report(&energy, &b.field, FB_DELTA_PER_EPS * tol, None)?;
            let mut w = create(out, "fb_u1.csv")?;
            fb1.write_csv(&mut w)?;
            w.flush()?;
            report.fb_u1 = Some(FbSummary::from(&fb1));
            if !(cont.u0.converged && b.converged) {
                report.status = Status::Failed;
                report.error = Some(format!(
                    "final stage did not converge (u0: {}, u1: {})",
                    cont.u0.converged, b.converged
                ));
            }
            Some(&b.field)
        }
    };
    let ev = Evidence::compute(&energy, &cont.u0.field, u1, tol)?;
    report.verdicts = Some(ev.verdicts());
    report.evidence = Some(ev);
    Ok(report)
}

/// One recomputed quantity next to its stored value.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub stored: String,
    pub recomputed: String,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOutcome {
    pub status: Status,
    pub checks: Vec<Check>,
}

impl VerifyOutcome {
    pub fn ok(&self) -> bool {
        self.checks.iter().all(|c| c.ok)
    }
}

/// Recomputes the evidence and verdicts of a run from `report.txt`'s
/// configuration echo and the field files, and compares them with the
/// stored values (floats bit for bit).
pub fn verify(dir: &Path) -> Result<VerifyOutcome> {
    let path = dir.join("report.txt");
    let text = std::fs::read_to_string(&path).map_err(|e| Error::Format {
        path: path.display().to_string(),
        msg: e.to_string(),
    })?;
    let stored = read_report(&text, &path.display().to_string())?;
    if stored.evidence.is_empty() {
        return Err(Error::Format {
            path: path.display().to_string(),
            msg: format!("run has status {} and records no evidence", stored.status.name()),
        });
    }
    let tol = stored
        .evidence
        .iter()
        .find(|(k, _)| k == "plateau_tol")
        .map(|&(_, v)| v)
        .ok_or_else(|| Error::Format {
            path: path.display().to_string(),
            msg: "missing evidence.plateau_tol".into(),
        })?;
    let mesh = stored.config.mesh.build()?;
    let forms = assemble(&mesh)?;
    let energy = Energy::new(&mesh, &forms, stored.config.model, stored.config.solve.lambda)?;
    let u0 = read_field(dir, "u0.csv", &mesh)?;
    let u1 = if stored.evidence.iter().any(|(k, _)| k == "j_u1") {
        Some(read_field(dir, "u1.csv", &mesh)?)
    } else {
        None
    };
    let ev = Evidence::compute(&energy, &u0, u1.as_ref(), tol)?;

    let mut checks = Vec::new();
    let fresh = ev.named();
    for (k, v) in &fresh {
        let s = stored.evidence.iter().find(|(n, _)| n == k).map(|&(_, x)| x);
        checks.push(Check {
            name: format!("evidence.{k}"),
            stored: s.map_or_else(|| "missing".into(), |x| x.to_string()),
            recomputed: v.to_string(),
            ok: s.is_some_and(|x| x.to_bits() == v.to_bits()),
        });
    }
    for (k, _) in &stored.evidence {
        if !fresh.iter().any(|(n, _)| n == k) {
            checks.push(Check {
                name: format!("evidence.{k}"),
                stored: "present".into(),
                recomputed: "missing".into(),
                ok: false,
            });
        }
    }
    for (k, v) in ev.verdicts().named() {
        let s = stored.verdicts.iter().find(|(n, _)| *n == k).map(|&(_, x)| x);
        checks.push(Check {
            name: format!("verdict.{k}"),
            stored: s.map_or_else(|| "missing".into(), |x| x.to_string()),
            recomputed: v.to_string(),
            ok: s == Some(v),
        });
    }
    Ok(VerifyOutcome {
        status: stored.status,
        checks,
    })
}
