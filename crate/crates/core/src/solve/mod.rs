//! Minimizer, mountain-pass critical point and ε-continuation.

mod continuation;
mod descent;
mod mountain;
mod newton;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::energy::{Energy, Field};
use crate::error::{Error, Result};
use crate::mesh::{Domain, Mesh};
use crate::model::NonlinearityModel;
use crate::scalar::Real;

pub use continuation::{continuation, Continuation, StageRow};
pub use descent::{descend, Descent};
pub use mountain::mountain_pass;

pub const DEFAULT_EPS_START: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig<T> {
    pub lambda: T,
    /// `None` selects the automatic start `0.1`.
    pub eps_start: Option<T>,
    pub eps_factor: T,
    pub eps_min: T,
    pub grad_tol: T,
    pub max_iters: usize,
    pub path_points: usize,
    pub restarts: usize,
    pub seed: u64,
}

impl<T: Real> SolveConfig<T> {
    pub fn new(lambda: T) -> Self {
        Self {
            lambda,
            eps_start: None,
            eps_factor: T::lit(0.5),
            eps_min: T::lit(1e-3),
            grad_tol: T::lit(1e-6),
            max_iters: 20_000,
            path_points: 16,
            restarts: 3,
            seed: 0,
        }
    }

    pub fn eps_start_value(&self) -> T {
        self.eps_start.unwrap_or_else(|| T::lit(DEFAULT_EPS_START))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if !(self.lambda >= T::zero() && self.lambda.is_finite()) {
            return bad(format!("solve.lambda must be >= 0, got {}", self.lambda));
        }
        if !(self.eps_factor > T::zero() && self.eps_factor < T::one()) {
            return bad(format!(
                "solve.eps_factor must lie in (0, 1), got {}",
                self.eps_factor
            ));
        }
        if !(self.eps_min > T::zero()) {
            return bad(format!("solve.eps_min must be positive, got {}", self.eps_min));
        }
        let start = self.eps_start_value();
        if !(start > T::zero()) {
            return bad(format!("solve.eps_start must be positive, got {start}"));
        }
        if !(self.eps_min < start) {
            return bad(format!(
                "solve.eps_min ({}) must be below solve.eps_start ({start})",
                self.eps_min
            ));
        }
        if !(self.grad_tol > T::zero()) {
            return bad(format!("solve.grad_tol must be positive, got {}", self.grad_tol));
        }
        if self.max_iters == 0 {
            return bad("solve.max_iters must be positive".into());
        }
        if self.path_points < 3 {
            return bad(format!(
                "solve.path_points must be at least 3, got {}",
                self.path_points
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchKind {
    Minimizer,
    MountainPass,
}

impl BranchKind {
    pub fn name(self) -> &'static str {
        match self {
            BranchKind::Minimizer => "minimizer",
            BranchKind::MountainPass => "mountain_pass",
        }
    }
}

/// Convergence data of one branch at one smoothing width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageRecord<T> {
    pub eps: T,
    pub energy_eps: T,
    pub grad_norm: T,
    pub max_grad: T,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct BranchResult<T> {
    pub field: Field<T>,
    pub energy_eps: T,
    pub energy_true: T,
    pub eps_history: Vec<StageRecord<T>>,
    pub kind: BranchKind,
    pub converged: bool,
}

impl<T: Real> BranchResult<T> {
    pub fn last(&self) -> &StageRecord<T> {
        self.eps_history.last().expect("branch has at least one stage")
    }
}

/// `min{|c1| / (2 λ a1 |Ω|), (p a1 / a2)^(1/(p-1))}`, the second entry
/// dropped when `a2 = 0`.
pub fn eps_zero<T: Real>(
    lambda: T,
    model: &NonlinearityModel<T>,
    c1_estimate: T,
    omega_measure: T,
) -> Result<T> {
    if !(c1_estimate < T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "c1 estimate must be negative, got {c1_estimate}: lambda is not above the threshold"
        )));
    }
    let (a1, a2, p) = (model.a1(), model.a2(), model.p());
    if !(a1 > T::zero() && lambda > T::zero() && omega_measure > T::zero()) {
        return Err(Error::InvalidArgument(
            "eps_zero needs a1 > 0, lambda > 0 and |omega| > 0".into(),
        ));
    }
    let first = c1_estimate.abs() / (T::lit(2.0) * lambda * a1 * omega_measure);
    if a2 > T::zero() {
        let second = (p * a1 / a2).powf(T::one() / (p - T::one()));
        Ok(first.min(second))
    } else {
        Ok(first)
    }
}

/// Normalized depth in `[0, 1]`: 0 on the boundary, 1 at the center.
pub(crate) fn depth<T: Real>(mesh: &Mesh<T>) -> Vec<T> {
    let two = T::lit(2.0);
    match mesh.domain() {
        Domain::Interval { length } => mesh
            .vertices()
            .iter()
            .map(|v| two * v[0].min(length - v[0]) / length)
            .collect(),
        Domain::Rect { lx, ly } => mesh
            .vertices()
            .iter()
            .map(|v| {
                let dx = two * v[0].min(lx - v[0]) / lx;
                let dy = two * v[1].min(ly - v[1]) / ly;
                dx.min(dy)
            })
            .collect(),
        Domain::Disk { radius } => mesh
            .vertices()
            .iter()
            .map(|v| T::one() - (v[0] * v[0] + v[1] * v[1]).sqrt() / radius)
            .collect(),
        Domain::Custom => {
            // breadth-first hop count from the Dirichlet vertices
            let adj = mesh.vertex_neighbors();
            let mut dist = vec![usize::MAX; mesh.n_vertices()];
            let mut queue = std::collections::VecDeque::new();
            for (i, &b) in mesh.boundary_mask().iter().enumerate() {
                if b {
                    dist[i] = 0;
                    queue.push_back(i);
                }
            }
            while let Some(i) = queue.pop_front() {
                for &j in &adj[i] {
                    if dist[j] == usize::MAX {
                        dist[j] = dist[i] + 1;
                        queue.push_back(j);
                    }
                }
            }
            let max = dist.iter().copied().filter(|&d| d != usize::MAX).max().unwrap_or(0);
            let max = T::from_usize_lossy(max.max(1));
            dist.iter()
                .map(|&d| {
                    if d == usize::MAX {
                        T::one()
                    } else {
                        T::from_usize_lossy(d) / max
                    }
                })
                .collect()
        }
    }
}

/// Tent-shaped initial guess: `height` on the inner half of the domain,
/// decaying linearly to 0 on the boundary.
pub fn seed_bump<T: Real>(mesh: &Mesh<T>, height: T) -> Result<Field<T>> {
    if !(height > T::one()) {
        return Err(Error::InvalidArgument(format!(
            "seed height must exceed 1, got {height}"
        )));
    }
    let two = T::lit(2.0);
    let values = depth(mesh)
        .into_iter()
        .map(|d| height * (two * d).min(T::one()).max(T::zero()))
        .collect();
    Ok(Field::from_values_clamped(mesh, values))
}

/// Uniform nodal values in `[0, 2]` smoothed by one Jacobi sweep of the
/// discrete Laplacian.
pub fn random_seed<T: Real>(energy: &Energy<'_, T>, rng: &mut ChaCha8Rng) -> Field<T> {
    let mesh = energy.mesh();
    let k = energy.forms().stiffness();
    let raw: Vec<T> = mesh
        .boundary_mask()
        .iter()
        .map(|&b| {
            let v: f64 = rng.gen_range(0.0..2.0);
            if b {
                T::zero()
            } else {
                T::lit(v)
            }
        })
        .collect();
    let mut out = raw.clone();
    for &i in energy.forms().interior_index() {
        let mut diag = T::zero();
        let mut off = T::zero();
        for (j, v) in k.row(i) {
            if j == i {
                diag = v;
            } else {
                off = off - v * raw[j];
            }
        }
        out[i] = off / diag;
    }
    Field::from_values_clamped(mesh, out)
}

const SEED_HEIGHT: f64 = 2.0;

/// Global minimization of `J_ε`: descends from `init`, from the tent guess
/// and from `config.restarts` random guesses, and keeps the lowest energy.
pub fn minimize<T: Real>(
    config: &SolveConfig<T>,
    energy: &Energy<'_, T>,
    eps: T,
    init: &Field<T>,
) -> Result<BranchResult<T>> {
    use rayon::prelude::*;

    let mesh = energy.mesh();
    let mut starts = vec![init.clone(), seed_bump(mesh, T::lit(SEED_HEIGHT))?];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    for _ in 0..config.restarts {
        starts.push(random_seed(energy, &mut rng));
    }
    let sm = energy.smoother(eps)?;
    let runs: Vec<Descent<T>> = starts
        .par_iter()
        .map(|s| descend(energy, &sm, None, s.values().to_vec(), config.grad_tol, config.max_iters))
        .collect();
    let best = runs
        .into_iter()
        .reduce(|a, b| if b.energy < a.energy { b } else { a })
        .expect("at least two starts");
    branch_from_descent(energy, eps, best, BranchKind::Minimizer)
}

/// Single descent of `J_ε` from `init`; used for warm starts along the
/// ε schedule.
pub fn minimize_from<T: Real>(
    config: &SolveConfig<T>,
    energy: &Energy<'_, T>,
    eps: T,
    init: &Field<T>,
) -> Result<BranchResult<T>> {
    let sm = energy.smoother(eps)?;
    let run = descend(energy, &sm, None, init.values().to_vec(), config.grad_tol, config.max_iters);
    branch_from_descent(energy, eps, run, BranchKind::Minimizer)
}

fn branch_from_descent<T: Real>(
    energy: &Energy<'_, T>,
    eps: T,
    run: Descent<T>,
    kind: BranchKind,
) -> Result<BranchResult<T>> {
    let field = Field::from_values(energy.mesh(), run.u)?;
    let energy_true = energy.j(&field)?.total;
    let record = StageRecord {
        eps,
        energy_eps: run.energy,
        grad_norm: run.grad_norm,
        max_grad: energy.max_gradient(field.values()),
        iterations: run.iterations,
        converged: run.converged,
    };
    Ok(BranchResult {
        field,
        energy_eps: run.energy,
        energy_true,
        eps_history: vec![record],
        kind,
        converged: run.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{assemble, build_disk_mesh, build_interval_mesh, build_rect_mesh};

    #[test]
    fn eps_zero_examples() {
        let pb = NonlinearityModel::<f64>::prandtl_batchelor();
        assert!((eps_zero(10.0, &pb, -2.0, 1.0).unwrap() - 0.1).abs() < 1e-15);
        let pw = NonlinearityModel::power(1.0f64, 1.0, 1.5).unwrap();
        assert!((eps_zero(1.0, &pw, -4.0, 1.0).unwrap() - 2.0).abs() < 1e-15);
        // the second entry wins when it is smaller
        assert!((eps_zero(1.0, &pw, -40.0, 1.0).unwrap() - 2.25).abs() < 1e-12);
        assert!(matches!(eps_zero(1.0, &pb, 0.0, 1.0), Err(Error::InvalidArgument(_))));
        assert!(eps_zero(1.0, &pb, -0.0, 1.0).is_err());
    }

    #[test]
    fn seed_bump_shapes() {
        let m = build_interval_mesh(8, 1.0f64).unwrap();
        let s = seed_bump(&m, 2.0).unwrap();
        assert_eq!(s.max(), 2.0);
        assert_eq!(s.values()[0], 0.0);
        assert_eq!(s.values()[8], 0.0);
        assert_eq!(s.values()[2], 2.0);
        assert_eq!(s.values()[1], 1.0);
        assert!(seed_bump(&m, 1.0).is_err());
        for m in [build_rect_mesh(6, 4, 2.0, 1.0).unwrap(), build_disk_mesh(5, 1.0).unwrap()] {
            let s = seed_bump(&m, 3.0).unwrap();
            for (v, &b) in s.values().iter().zip(m.boundary_mask()) {
                if b {
                    assert_eq!(*v, 0.0);
                }
            }
            assert_eq!(s.max(), 3.0);
        }
    }

    #[test]
    fn seed_bump_has_negative_energy_for_large_lambda() {
        let m = build_rect_mesh(32, 32, 1.0, 1.0).unwrap();
        let f = assemble(&m).unwrap();
        let s = seed_bump(&m, 2.0).unwrap();
        // the tent's Dirichlet energy (24) is only beaten by a large λ
        let e = Energy::new(&m, &f, NonlinearityModel::prandtl_batchelor(), 200.0).unwrap();
        assert!(e.j(&s).unwrap().total < 0.0);
        let e = Energy::new(&m, &f, NonlinearityModel::prandtl_batchelor(), 50.0).unwrap();
        assert!(e.j(&s).unwrap().total > 0.0);
    }

    #[test]
    fn custom_mesh_seed_uses_hop_distance() {
        let v: Vec<[f64; 2]> = (0..5).map(|i| [i as f64 * 0.25, 0.0]).collect();
        let cells = (0..4).map(|i| [i, i + 1, 0]).collect();
        let mut mask = vec![false; 5];
        mask[0] = true;
        mask[4] = true;
        let m = Mesh::new(1, v, cells, mask).unwrap();
        let s = seed_bump(&m, 2.0).unwrap();
        assert_eq!(s.values(), &[0.0, 2.0, 2.0, 2.0, 0.0]);
    }

    #[test]
    fn config_validation() {
        let mut c = SolveConfig::new(50.0f64);
        assert!(c.validate().is_ok());
        c.eps_factor = 1.0;
        assert!(c.validate().is_err());
        c.eps_factor = 0.5;
        c.path_points = 2;
        assert!(c.validate().is_err());
        c.path_points = 16;
        c.eps_min = 0.5;
        assert!(c.validate().is_err());
    }

    #[test]
    fn zero_lambda_minimizer_is_trivial() {
        let m = build_rect_mesh(8, 8, 1.0f64, 1.0).unwrap();
        let f = assemble(&m).unwrap();
        let e = Energy::new(&m, &f, NonlinearityModel::prandtl_batchelor(), 0.0).unwrap();
        let cfg = SolveConfig::new(0.0);
        let r = minimize(&cfg, &e, 0.1, &Field::zeros(&m)).unwrap();
        assert!(r.converged);
        assert!(r.energy_eps.abs() < 1e-12);
        assert!(r.field.values().iter().all(|v| v.abs() < 1e-6));
    }
}
