//! Preconditioned Polak–Ribière conjugate gradients with backtracking.
//!
//! Search directions live in H¹₀: the gradient is mapped through the
//! stiffness solve before it is used, so the step `a = 1` is the natural
//! trial for the Dirichlet part at every mesh size.

use crate::energy::Energy;
use crate::model::Smoother;
use crate::scalar::{dot, Real};

const ARMIJO_C1: f64 = 1e-4;
const CURVATURE_C2: f64 = 0.9;
// energies closer than this (relative) are indistinguishable in floating point
const FLAT_RTOL: f64 = 1e-13;
const MIN_STEP: f64 = 1e-16;
const RESTART_EVERY: usize = 200;

#[derive(Debug, Clone)]
pub struct Descent<T> {
    pub u: Vec<T>,
    pub energy: T,
    pub grad_norm: T,
    pub iterations: usize,
    pub converged: bool,
    /// Energy after every accepted step, starting with the initial value.
    pub energies: Vec<T>,
}

/// Objective `J_ε` or, with a cap, the truncated energy.
#[derive(Clone, Copy)]
pub(crate) struct Objective<'o, 'a, T> {
    pub energy: &'o Energy<'a, T>,
    pub sm: &'o Smoother<T>,
    pub cap: Option<&'o [T]>,
}

impl<T: Real> Objective<'_, '_, T> {
    pub fn value(&self, u: &[T]) -> T {
        self.energy.eval(u, self.sm, self.cap, None).total
    }

    pub fn value_grad(&self, u: &[T], g: &mut [T]) -> T {
        self.energy.eval(u, self.sm, self.cap, Some(g)).total
    }

    pub fn grad_norm(&self, g: &[T]) -> T {
        self.energy.dual_norm(g)
    }
}

pub(crate) struct Step<T> {
    pub u: Vec<T>,
    pub grad: Vec<T>,
    pub energy: T,
    pub alpha: T,
}

/// Backtracking from `a0` along `d` (requires `slope = ∇f·d < 0`). Accepts
/// the Armijo condition, or, once energy differences reach roundoff level,
/// a step that does not overshoot: `∇f(u + a d)·d <= 0.9 |slope|`.
pub(crate) fn line_search<T: Real>(
    obj: &Objective<'_, '_, T>,
    u: &[T],
    f0: T,
    d: &[T],
    slope: T,
    a0: T,
) -> Option<Step<T>> {
    let n = u.len();
    let mut a = a0;
    let mut trial = vec![T::zero(); n];
    let mut grad = vec![T::zero(); n];
    let flat = T::lit(FLAT_RTOL) * (T::one() + f0.abs());
    while a >= T::lit(MIN_STEP) {
        for i in 0..n {
            trial[i] = u[i] + a * d[i];
        }
        let f = obj.value_grad(&trial, &mut grad);
        if f.is_finite() {
            if f <= f0 + T::lit(ARMIJO_C1) * a * slope {
                return Some(Step {
                    u: trial,
                    grad,
                    energy: f,
                    alpha: a,
                });
            }
            if (f - f0).abs() <= flat && dot(&grad, d) <= T::lit(CURVATURE_C2) * slope.abs() {
                return Some(Step {
                    u: trial,
                    grad,
                    energy: f,
                    alpha: a,
                });
            }
        }
        a = a * T::lit(0.5);
    }
    None
}

pub(crate) fn run<T: Real>(
    obj: &Objective<'_, '_, T>,
    init: Vec<T>,
    tol: T,
    max_iters: usize,
) -> Descent<T> {
    let forms = obj.energy.forms();
    let mut u = init;
    let mut g = vec![T::zero(); u.len()];
    let mut f = obj.value_grad(&u, &mut g);
    let mut z = forms.riesz(&g);
    let mut gz = dot(&g, &z);
    let mut d: Vec<T> = z.iter().map(|&v| -v).collect();
    let mut energies = vec![f];
    let mut alpha = T::one();
    let mut iterations = 0;
    let mut since_restart = 0;
    let mut gn = obj.grad_norm(&g);
    let mut converged = gn <= tol;
    while !converged && iterations < max_iters {
        let mut slope = dot(&g, &d);
        if slope >= T::zero() || since_restart >= RESTART_EVERY {
            d.iter_mut().zip(&z).for_each(|(di, &zi)| *di = -zi);
            slope = -gz;
            since_restart = 0;
        }
        let a0 = (alpha * T::lit(4.0)).min(T::one());
        let step = match line_search(obj, &u, f, &d, slope, a0) {
            Some(s) => s,
            None if since_restart > 0 => {
                // retry once along the preconditioned steepest descent
                d.iter_mut().zip(&z).for_each(|(di, &zi)| *di = -zi);
                since_restart = 0;
                match line_search(obj, &u, f, &d, -gz, T::one()) {
                    Some(s) => s,
                    None => break,
                }
            }
            None => break,
        };
        u = step.u;
        f = step.energy;
        alpha = step.alpha;
        let z_new = forms.riesz(&step.grad);
        // PR+: β = max(0, zₖ₊₁·(gₖ₊₁ - gₖ) / zₖ·gₖ)
        let gz_new = dot(&step.grad, &z_new);
        let cross = dot(&z_new, &g);
        let beta = ((gz_new - cross) / gz).max(T::zero());
        g = step.grad;
        z = z_new;
        gz = gz_new;
        for (di, &zi) in d.iter_mut().zip(&z) {
            *di = beta * *di - zi;
        }
        energies.push(f);
        iterations += 1;
        since_restart += 1;
        gn = obj.grad_norm(&g);
        converged = gn <= tol;
    }
    Descent {
        u,
        energy: f,
        grad_norm: gn,
        iterations,
        converged,
        energies,
    }
}

/// Minimizes `J_ε` (or the truncated energy when `cap` is given) from
/// `init` until the dual gradient norm drops to `tol`.
pub fn descend<T: Real>(
    energy: &Energy<'_, T>,
    sm: &Smoother<T>,
    cap: Option<&[T]>,
    init: Vec<T>,
    tol: T,
    max_iters: usize,
) -> Descent<T> {
    let obj = Objective { energy, sm, cap };
    run(&obj, init, tol, max_iters)
}
