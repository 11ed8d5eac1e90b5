//! Decreasing ε schedule with warm starts for both branches.

use super::{
    eps_zero, minimize, minimize_from, mountain_pass, BranchResult, SolveConfig, StageRecord,
};
use crate::energy::{Energy, Field};
use crate::error::Result;
use crate::scalar::Real;

/// One ε stage of the continuation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageRow<T> {
    pub eps: T,
    pub j_eps_u0: T,
    pub j_u0: T,
    pub j_eps_u1: T,
    pub j_u1: T,
    pub grad_u0: T,
    pub grad_u1: T,
    pub max_grad_u0: T,
    pub max_grad_u1: T,
    /// `½ u0ᵀ K u0`
    pub half_norm_sq_u0: T,
    pub converged_u0: bool,
    pub converged_u1: bool,
}

#[derive(Debug, Clone)]
pub struct Continuation<T> {
    pub omega_measure: T,
    /// `J` of the pilot minimizer, an upper estimate of `inf J`.
    pub c1_estimate: T,
    /// `None` when λ is below the threshold.
    pub eps_zero: Option<T>,
    pub below_threshold: bool,
    pub pilot: BranchResult<T>,
    pub u0: BranchResult<T>,
    pub u1: Option<BranchResult<T>>,
    pub stages: Vec<StageRow<T>>,
}

/// `eps_start · factor^j` for `j = 0, 1, …`, restricted to `eps_min <= ε < eps0`.
pub fn schedule<T: Real>(config: &SolveConfig<T>, eps0: T) -> Vec<T> {
    let mut out = Vec::new();
    let mut e = config.eps_start_value();
    // tolerate the roundoff of repeated multiplication at the lower end
    let floor = config.eps_min * (T::one() - T::lit(1e-9));
    while e >= floor {
        if e < eps0 {
            out.push(e);
        }
        e = e * config.eps_factor;
    }
    out
}

/// Pilot minimization, threshold test, then the ε schedule with a minimizer
/// and a mountain-pass solve per stage.
pub fn continuation<T: Real>(
    config: &SolveConfig<T>,
    energy: &Energy<'_, T>,
) -> Result<Continuation<T>> {
    config.validate()?;
    let mesh = energy.mesh();
    let omega = mesh.omega_measure();
    let start = config.eps_start_value();
    let pilot = minimize(config, energy, start, &Field::zeros(mesh))?;
    let c1 = pilot.energy_true;
    if !(c1 < -omega) {
        return Ok(Continuation {
            omega_measure: omega,
            c1_estimate: c1,
            eps_zero: None,
            below_threshold: true,
            u0: pilot.clone(),
            pilot,
            u1: None,
            stages: Vec::new(),
        });
    }
    let eps0 = eps_zero(energy.lambda(), energy.model(), c1, omega)?;
    let eps_list = schedule(config, eps0);

    let mut u0: Option<BranchResult<T>> = None;
    let mut u1: Option<BranchResult<T>> = None;
    let mut history0: Vec<StageRecord<T>> = Vec::new();
    let mut history1: Vec<StageRecord<T>> = Vec::new();
    let mut stages = Vec::new();
    for &eps in &eps_list {
        let r0 = match &u0 {
            None if eps == start => pilot.clone(),
            None => minimize(config, energy, eps, &pilot.field)?,
            Some(prev) => {
                let warm = minimize_from(config, energy, eps, &prev.field)?;
                // a warm start that lost its basin is replaced by a fresh
                // multi-start search
                if warm.converged && warm.energy_true < -omega {
                    warm
                } else {
                    let fresh = minimize(config, energy, eps, &prev.field)?;
                    if fresh.energy_eps < warm.energy_eps {
                        fresh
                    } else {
                        warm
                    }
                }
            }
        };
        let r1 = mountain_pass(
            config,
            energy,
            eps,
            &r0.field,
            u1.as_ref().map(|b| &b.field),
        )?;
        let (s0, s1) = (*r0.last(), *r1.last());
        stages.push(StageRow {
            eps,
            j_eps_u0: r0.energy_eps,
            j_u0: r0.energy_true,
            j_eps_u1: r1.energy_eps,
            j_u1: r1.energy_true,
            grad_u0: s0.grad_norm,
            grad_u1: s1.grad_norm,
            max_grad_u0: s0.max_grad,
            max_grad_u1: s1.max_grad,
            half_norm_sq_u0: T::lit(0.5) * energy.forms().stiffness().quad_form(r0.field.values()),
            converged_u0: s0.converged,
            converged_u1: s1.converged,
        });
        history0.push(s0);
        history1.push(s1);
        u0 = Some(r0);
        u1 = Some(r1);
    }
    let mut u0 = u0.unwrap_or_else(|| pilot.clone());
    if history0.is_empty() {
        history0 = pilot.eps_history.clone();
    }
    u0.converged = history0.last().map_or(false, |s| s.converged);
    u0.eps_history = history0;
    let u1 = u1.map(|mut b| {
        b.converged = history1.last().map_or(false, |s| s.converged);
        b.eps_history = history1;
        b
    });
    Ok(Continuation {
        omega_measure: omega,
        c1_estimate: c1,
        eps_zero: Some(eps0),
        below_threshold: false,
        pilot,
        u0,
        u1,
        stages,
    })
}
