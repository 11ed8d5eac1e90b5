//! Flat `section.key = value` configuration documents.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::mesh::{build_disk_mesh, build_interval_mesh, build_rect_mesh, Mesh};
use crate::model::{ModelKind, NonlinearityModel};
use crate::solve::SolveConfig;

/// Parsed `key = value` lines in document order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Document {
    entries: Vec<(String, String, usize)>,
}

impl Document {
    /// Splits `text` into entries. `#` starts a comment; blank lines are
    /// skipped; a repeated key is an error naming both lines.
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: Vec<(String, String, usize)> = Vec::new();
        let mut seen: HashMap<String, usize> = HashMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| Error::Parse {
                line,
                msg: format!("expected `key = value`, got `{body}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty() || value.is_empty() {
                return Err(Error::Parse {
                    line,
                    msg: format!("empty key or value in `{body}`"),
                });
            }
            if let Some(first) = seen.insert(key.to_string(), line) {
                return Err(Error::Parse {
                    line,
                    msg: format!("duplicate key `{key}` (first set on line {first})"),
                });
            }
            entries.push((key.to_string(), value.to_string(), line));
        }
        Ok(Self { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, _)| v.as_str())
    }

    fn line(&self, key: &str) -> usize {
        self.entries
            .iter()
            .find(|(k, _, _)| k == key)
            .map_or(0, |&(_, _, l)| l)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(k, _, _)| k.as_str())
    }

    /// Entries whose key starts with `prefix`, with the prefix removed.
    pub fn strip_prefix(&self, prefix: &str) -> Document {
        Document {
            entries: self
                .entries
                .iter()
                .filter_map(|(k, v, l)| k.strip_prefix(prefix).map(|s| (s.to_string(), v.clone(), *l)))
                .collect(),
        }
    }

    fn number<F: std::str::FromStr>(&self, key: &str, default: F) -> Result<F> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| Error::Parse {
                line: self.line(key),
                msg: format!("`{key}` has invalid value `{v}`"),
            }),
        }
    }
}

/// Mesh generator and its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MeshSpec {
    Interval { cells: usize, length: f64 },
    Square { n: usize },
    Rect { nx: usize, ny: usize, lx: f64, ly: f64 },
    Disk { rings: usize, radius: f64 },
}

impl MeshSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            MeshSpec::Interval { .. } => "interval",
            MeshSpec::Square { .. } => "square",
            MeshSpec::Rect { .. } => "rect",
            MeshSpec::Disk { .. } => "disk",
        }
    }

    pub fn build(&self) -> Result<Mesh<f64>> {
        match *self {
            MeshSpec::Interval { cells, length } => build_interval_mesh(cells, length),
            MeshSpec::Square { n } => build_rect_mesh(n, n, 1.0, 1.0),
            MeshSpec::Rect { nx, ny, lx, ly } => build_rect_mesh(nx, ny, lx, ly),
            MeshSpec::Disk { rings, radius } => build_disk_mesh(rings, radius),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunConfig {
    pub mesh: MeshSpec,
    pub model: NonlinearityModel<f64>,
    pub solve: SolveConfig<f64>,
}

const DEFAULT_RESOLUTION: usize = 32;
const DEFAULT_POWER: (f64, f64, f64) = (1.0, 1.0, 1.5);

fn mesh_keys(kind: &str) -> Option<&'static [&'static str]> {
    Some(match kind {
        "interval" => &["kind", "n", "length"],
        "square" => &["kind", "n"],
        "rect" => &["kind", "nx", "ny", "lx", "ly"],
        "disk" => &["kind", "rings", "radius"],
        _ => return None,
    })
}

const MODEL_KEYS: [&str; 4] = ["kind", "a1", "a2", "p"];
const SOLVE_KEYS: [&str; 9] = [
    "lambda",
    "eps_start",
    "eps_factor",
    "eps_min",
    "grad_tol",
    "max_iters",
    "path_points",
    "restarts",
    "seed",
];

/// Parses and validates a configuration. `solve.lambda` is required; every
/// other key has a default (`mesh.kind = square` with 32 cells per side,
/// the `g ≡ 1` model, and the [`SolveConfig::new`] settings).
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let doc = Document::parse(text)?;
    let mesh_doc = doc.strip_prefix("mesh.");
    let model_doc = doc.strip_prefix("model.");
    let solve_doc = doc.strip_prefix("solve.");

    let mesh_kind = mesh_doc.get("kind").unwrap_or("square");
    let allowed_mesh = mesh_keys(mesh_kind).ok_or_else(|| {
        Error::Validation(format!(
            "mesh.kind must be one of interval, square, rect, disk; got `{mesh_kind}`"
        ))
    })?;
    let model_kind = match model_doc.get("kind") {
        None => ModelKind::PrandtlBatchelor,
        Some(k) => ModelKind::parse(k).ok_or_else(|| {
            Error::Validation(format!(
                "model.kind must be prandtl_batchelor or power; got `{k}`"
            ))
        })?,
    };
    let allowed_model: &[&str] = match model_kind {
        ModelKind::PrandtlBatchelor => &MODEL_KEYS[..1],
        ModelKind::Power => &MODEL_KEYS,
    };

    let unknown: Vec<String> = doc
        .keys()
        .filter(|k| {
            let ok = match k.split_once('.') {
                Some(("mesh", rest)) => allowed_mesh.contains(&rest),
                Some(("model", rest)) => allowed_model.contains(&rest),
                Some(("solve", rest)) => SOLVE_KEYS.contains(&rest),
                _ => false,
            };
            !ok
        })
        .map(|k| format!("{k} (line {})", doc.line(k)))
        .collect();
    if !unknown.is_empty() {
        return Err(Error::Validation(format!(
            "unknown keys for mesh.kind = {mesh_kind}, model.kind = {}: {}",
            model_kind.name(),
            unknown.join(", ")
        )));
    }

    let r = DEFAULT_RESOLUTION;
    let mesh = match mesh_kind {
        "interval" => MeshSpec::Interval {
            cells: mesh_doc.number("n", r)?,
            length: mesh_doc.number("length", 1.0)?,
        },
        "square" => MeshSpec::Square {
            n: mesh_doc.number("n", r)?,
        },
        "rect" => MeshSpec::Rect {
            nx: mesh_doc.number("nx", r)?,
            ny: mesh_doc.number("ny", r)?,
            lx: mesh_doc.number("lx", 1.0)?,
            ly: mesh_doc.number("ly", 1.0)?,
        },
        _ => MeshSpec::Disk {
            rings: mesh_doc.number("rings", r)?,
            radius: mesh_doc.number("radius", 1.0)?,
        },
    };

    let model = match model_kind {
        ModelKind::PrandtlBatchelor => NonlinearityModel::prandtl_batchelor(),
        ModelKind::Power => {
            let (a1, a2, p) = DEFAULT_POWER;
            let a1 = model_doc.number("a1", a1)?;
            let a2 = model_doc.number("a2", a2)?;
            let p: f64 = model_doc.number("p", p)?;
            if !(p > 1.0 && p < 2.0) {
                return Err(Error::Validation(format!(
                    "model.p = {p} violates the sublinear growth condition 1 < p < 2"
                )));
            }
            NonlinearityModel::power(a1, a2, p).map_err(|e| Error::Validation(e.to_string()))?
        }
    };

    let lambda: f64 = match solve_doc.get("lambda") {
        Some(_) => solve_doc.number("lambda", 0.0)?,
        None => return Err(Error::Validation("solve.lambda is required".into())),
    };
    let mut solve = SolveConfig::new(lambda);
    solve.eps_start = match solve_doc.get("eps_start") {
        None | Some("auto") => None,
        Some(_) => Some(solve_doc.number("eps_start", 0.0)?),
    };
    solve.eps_factor = solve_doc.number("eps_factor", solve.eps_factor)?;
    solve.eps_min = solve_doc.number("eps_min", solve.eps_min)?;
    solve.grad_tol = solve_doc.number("grad_tol", solve.grad_tol)?;
    solve.max_iters = solve_doc.number("max_iters", solve.max_iters)?;
    solve.path_points = solve_doc.number("path_points", solve.path_points)?;
    solve.restarts = solve_doc.number("restarts", solve.restarts)?;
    solve.seed = solve_doc.number("seed", solve.seed)?;
    solve.validate()?;
    Ok(RunConfig { mesh, model, solve })
}

impl RunConfig {
    /// Every setting with defaults filled in; [`parse_config`] on the joined
    /// lines reproduces `self`.
    pub fn echo(&self) -> Vec<(String, String)> {
        let mut out: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| out.push((k.to_string(), v));
        put("mesh.kind", self.mesh.kind().into());
        match self.mesh {
            MeshSpec::Interval { cells, length } => {
                put("mesh.n", cells.to_string());
                put("mesh.length", length.to_string());
            }
            MeshSpec::Square { n } => put("mesh.n", n.to_string()),
            MeshSpec::Rect { nx, ny, lx, ly } => {
                put("mesh.nx", nx.to_string());
                put("mesh.ny", ny.to_string());
                put("mesh.lx", lx.to_string());
                put("mesh.ly", ly.to_string());
            }
            MeshSpec::Disk { rings, radius } => {
                put("mesh.rings", rings.to_string());
                put("mesh.radius", radius.to_string());
            }
        }
        put("model.kind", self.model.kind().name().into());
        if self.model.kind() == ModelKind::Power {
            put("model.a1", self.model.a1().to_string());
            put("model.a2", self.model.a2().to_string());
            put("model.p", self.model.p().to_string());
        }
        let s = &self.solve;
        put("solve.lambda", s.lambda.to_string());
        put(
            "solve.eps_start",
            s.eps_start.map_or_else(|| "auto".to_string(), |e| e.to_string()),
        );
        put("solve.eps_factor", s.eps_factor.to_string());
        put("solve.eps_min", s.eps_min.to_string());
        put("solve.grad_tol", s.grad_tol.to_string());
        put("solve.max_iters", s.max_iters.to_string());
        put("solve.path_points", s.path_points.to_string());
        put("solve.restarts", s.restarts.to_string());
        put("solve.seed", s.seed.to_string());
        out
    }

    pub fn to_text(&self) -> String {
        self.echo()
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect()
    }
}
