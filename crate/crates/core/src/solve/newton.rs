//! Damped Newton iteration on the gradient, used to polish critical points.
//!
//! The Hessian of the discrete energies is the stiffness matrix plus a
//! diagonal, so Hessian products are as cheap as gradients. The indefinite
//! Newton systems are solved by MINRES preconditioned with the stiffness
//! factorization; the preconditioned operator is the identity plus a
//! perturbation supported on the few vertices near the level 1, which keeps
//! the iteration counts small.

use super::descent::Objective;
use crate::mesh::AssembledForms;
use crate::scalar::{axpy, dot, Real};

const MERIT_C1: f64 = 1e-4;
const MAX_HALVINGS: usize = 40;
const MINRES_RTOL: f64 = 1e-10;

#[derive(Debug, Clone)]
pub(crate) struct Polish<T> {
    pub u: Vec<T>,
    pub energy: T,
    pub converged: bool,
}

/// Preconditioned MINRES for `(K + diag(d)) x = b` on the interior
/// vertices. Returns the approximate solution; `b` must vanish on Dirichlet
/// rows.
pub(crate) fn minres<T: Real>(
    forms: &AssembledForms<T>,
    diag: &[T],
    b: &[T],
    rtol: T,
    max_iters: usize,
) -> Vec<T> {
    let n = b.len();
    // Dirichlet rows are not part of the system
    let mut dirichlet = vec![true; n];
    for &i in forms.interior_index() {
        dirichlet[i] = false;
    }
    let apply = |v: &[T], out: &mut Vec<T>| {
        forms.stiffness().mul_vec_into(v, out);
        for i in 0..n {
            out[i] = if dirichlet[i] { T::zero() } else { out[i] + diag[i] * v[i] };
        }
    };
    let mut x = vec![T::zero(); n];
    let mut r1 = b.to_vec();
    let mut y = forms.riesz(&r1);
    let beta1 = dot(&r1, &y).max(T::zero()).sqrt();
    if !(beta1 > T::zero()) {
        return x;
    }
    let tiny = T::min_positive_value();
    let mut r2 = r1.clone();
    let (mut oldb, mut beta) = (T::zero(), beta1);
    let (mut dbar, mut epsln, mut phibar) = (T::zero(), T::zero(), beta1);
    let (mut cs, mut sn) = (-T::one(), T::zero());
    let mut w = vec![T::zero(); n];
    let mut w2 = vec![T::zero(); n];
    let mut v = vec![T::zero(); n];
    let mut av = vec![T::zero(); n];
    for itn in 0..max_iters {
        for i in 0..n {
            v[i] = y[i] / beta;
        }
        apply(&v, &mut av);
        if itn > 0 {
            axpy(-beta / oldb, &r1, &mut av);
        }
        let alfa = dot(&v, &av);
        axpy(-alfa / beta, &r2, &mut av);
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&av);
        y = forms.riesz(&r2);
        oldb = beta;
        beta = dot(&r2, &y).max(T::zero()).sqrt();
        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(tiny);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar = sn * phibar;
        for i in 0..n {
            let w1 = w2[i];
            w2[i] = w[i];
            w[i] = (v[i] - oldeps * w1 - delta * w2[i]) / gamma;
            x[i] = x[i] + phi * w[i];
        }
        if phibar <= rtol * beta1 || !(beta > T::zero()) {
            break;
        }
    }
    x
}

/// Newton steps on `∇f = 0`, backtracked on the dual gradient norm. Stops
/// at `tol`, after `max_steps`, or when no step reduces the gradient.
pub(crate) fn newton_polish<T: Real>(
    obj: &Objective<'_, '_, T>,
    init: &[T],
    tol: T,
    max_steps: usize,
) -> Polish<T> {
    let forms = obj.energy.forms();
    let n = init.len();
    let mut u = init.to_vec();
    let mut g = vec![T::zero(); n];
    let mut f = obj.value_grad(&u, &mut g);
    let mut gn = obj.grad_norm(&g);
    let mut trial = vec![T::zero(); n];
    let mut gt = vec![T::zero(); n];
    let mut iterations = 0;
    while gn > tol && iterations < max_steps {
        let diag = obj.energy.curvature(&u, obj.sm, obj.cap);
        let rhs: Vec<T> = g.iter().map(|&v| -v).collect();
        let d = minres(forms, &diag, &rhs, T::lit(MINRES_RTOL), 4 * n.max(50));
        let mut a = T::one();
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            for i in 0..n {
                trial[i] = u[i] + a * d[i];
            }
            let ft = obj.value_grad(&trial, &mut gt);
            let gnt = obj.grad_norm(&gt);
            if ft.is_finite() && gnt <= (T::one() - T::lit(MERIT_C1) * a) * gn {
                std::mem::swap(&mut u, &mut trial);
                std::mem::swap(&mut g, &mut gt);
                f = ft;
                gn = gnt;
                accepted = true;
                break;
            }
            a = a * T::lit(0.5);
        }
        iterations += 1;
        if !accepted {
            break;
        }
    }
    Polish {
        u,
        energy: f,
        converged: gn <= tol,
    }
}
