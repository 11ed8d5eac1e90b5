//! The nonlinearity `g`, its primitive `G`, the smoothing pair `(β, B)` and
//! the smoothed `g_ε`, `G_ε`.
//!
//! ```text
//!   β(s)   = 30 s² (1-s)²  on [0, 1], 0 elsewhere      (∫β = 1, C¹)
//!   B(s)   = ∫₀ˢ β
//!   g_ε(s) = B(s/ε) g(s)
//!   G_ε(s) = ∫₀ˢ g_ε
//! ```

use crate::error::{Error, Result};
use crate::quadrature::integrate;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// `g ≡ 1`
    PrandtlBatchelor,
    /// `g(s) = a1 + a2 s^(p-1)`
    Power,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::PrandtlBatchelor => "prandtl_batchelor",
            ModelKind::Power => "power",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "prandtl_batchelor" => Some(ModelKind::PrandtlBatchelor),
            "power" => Some(ModelKind::Power),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NonlinearityModel<T> {
    kind: ModelKind,
    a1: T,
    a2: T,
    p: T,
}

impl<T: Real> NonlinearityModel<T> {
    pub fn prandtl_batchelor() -> Self {
        Self {
            kind: ModelKind::PrandtlBatchelor,
            a1: T::one(),
            a2: T::zero(),
            p: T::lit(1.5),
        }
    }

    pub fn power(a1: T, a2: T, p: T) -> Result<Self> {
        if !(a1 >= T::zero() && a2 >= T::zero()) {
            return Err(Error::InvalidArgument(format!(
                "a1 and a2 must be nonnegative, got a1 = {a1}, a2 = {a2}"
            )));
        }
        if !(p > T::one() && p < T::lit(2.0)) {
            return Err(Error::InvalidArgument(format!(
                "exponent must satisfy 1 < p < 2, got p = {p}"
            )));
        }
        Ok(Self {
            kind: ModelKind::Power,
            a1,
            a2,
            p,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn a1(&self) -> T {
        self.a1
    }

    pub fn a2(&self) -> T {
        self.a2
    }

    pub fn p(&self) -> T {
        self.p
    }

    /// `g(x, s)` for `s >= 0`. The built-in kinds do not depend on `x`.
    pub fn g(&self, _x: [T; 2], s: T) -> T {
        match self.kind {
            ModelKind::PrandtlBatchelor => T::one(),
            ModelKind::Power => {
                if s > T::zero() {
                    self.a1 + self.a2 * s.powf(self.p - T::one())
                } else {
                    self.a1
                }
            }
        }
    }

    /// `G(x, s) = ∫₀ˢ g(x, t) dt` for `s >= 0`.
    pub fn big_g(&self, _x: [T; 2], s: T) -> T {
        if s <= T::zero() {
            return T::zero();
        }
        match self.kind {
            ModelKind::PrandtlBatchelor => s,
            ModelKind::Power => self.a1 * s + self.a2 / self.p * s.powf(self.p),
        }
    }

    /// `a1 ε + (a2/p) ε^p`, the largest possible gap `G - G_ε`.
    pub fn smoothing_gap_bound(&self, eps: T) -> T {
        self.a1 * eps + self.a2 / self.p * eps.powf(self.p)
    }
}

pub fn beta<T: Real>(s: T) -> T {
    if s <= T::zero() || s >= T::one() {
        return T::zero();
    }
    let t = s * (T::one() - s);
    T::lit(30.0) * t * t
}

/// `β'(s) = 60 s (1 - s)(1 - 2s)` on `(0, 1)`.
pub fn beta_prime<T: Real>(s: T) -> T {
    if s <= T::zero() || s >= T::one() {
        return T::zero();
    }
    T::lit(60.0) * s * (T::one() - s) * (T::one() - s - s)
}

pub fn big_b<T: Real>(s: T) -> T {
    if s <= T::zero() {
        return T::zero();
    }
    if s >= T::one() {
        return T::one();
    }
    // 10s³ - 15s⁴ + 6s⁵
    s * s * s * (T::lit(10.0) + s * (T::lit(-15.0) + s * T::lit(6.0)))
}

pub fn g_eps<T: Real>(model: &NonlinearityModel<T>, s: T, eps: T) -> T {
    if s <= T::zero() {
        return T::zero();
    }
    big_b(s / eps) * model.g([T::zero(); 2], s)
}

const PRIMITIVE_TOL: f64 = 1e-12;

/// `G_ε(s)` by adaptive quadrature of `g_ε` over `[0, s]`, split at `ε`
/// where `g_ε` stops being smoothed.
pub fn big_g_eps<T: Real>(model: &NonlinearityModel<T>, s: T, eps: T) -> T {
    if s <= T::zero() {
        return T::zero();
    }
    let tol = T::lit(PRIMITIVE_TOL);
    let f = |t: T| g_eps(model, t, eps);
    if s <= eps {
        integrate(f, T::zero(), s, tol)
    } else {
        let half = tol * T::lit(0.5);
        integrate(f, T::zero(), eps, half) + integrate(f, eps, s, half)
    }
}

/// Evaluator for a fixed `(model, ε)`.
///
/// For `s >= ε`, `G_ε(s) = G(s) - D_ε` with the constant deficit
/// `D_ε = ∫₀^ε (1 - B(t/ε)) g(t) dt`, computed once by quadrature. Below
/// `ε` the primitive is integrated directly.
#[derive(Debug, Clone, Copy)]
pub struct Smoother<T> {
    model: NonlinearityModel<T>,
    eps: T,
    deficit: T,
}

impl<T: Real> Smoother<T> {
    pub fn new(model: NonlinearityModel<T>, eps: T) -> Result<Self> {
        if !(eps > T::zero() && eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("eps must be positive, got {eps}")));
        }
        let deficit = model.big_g([T::zero(); 2], eps) - big_g_eps(&model, eps, eps);
        Ok(Self {
            model,
            eps,
            deficit,
        })
    }

    pub fn eps(&self) -> T {
        self.eps
    }

    pub fn model(&self) -> &NonlinearityModel<T> {
        &self.model
    }

    /// `∫₀^ε (g - g_ε)`
    pub fn deficit(&self) -> T {
        self.deficit
    }

    /// `B((u - 1)/ε)`
    pub fn phase(&self, u: T) -> T {
        big_b((u - T::one()) / self.eps)
    }

    /// `(1/ε) β((u - 1)/ε)`, the derivative of [`Smoother::phase`].
    pub fn phase_derivative(&self, u: T) -> T {
        beta((u - T::one()) / self.eps) / self.eps
    }

    /// `(1/ε²) β'((u - 1)/ε)`
    pub fn phase_curvature(&self, u: T) -> T {
        beta_prime((u - T::one()) / self.eps) / (self.eps * self.eps)
    }

    pub fn g_eps(&self, s: T) -> T {
        g_eps(&self.model, s, self.eps)
    }

    /// Derivative of [`Smoother::g_eps`] in `s`.
    pub fn g_eps_derivative(&self, s: T) -> T {
        if s <= T::zero() {
            return T::zero();
        }
        let t = s / self.eps;
        let zero = [T::zero(); 2];
        let dg = match self.model.kind() {
            ModelKind::PrandtlBatchelor => T::zero(),
            ModelKind::Power => {
                let p = self.model.p();
                self.model.a2() * (p - T::one()) * s.powf(p - T::lit(2.0))
            }
        };
        beta(t) / self.eps * self.model.g(zero, s) + big_b(t) * dg
    }

    pub fn big_g_eps(&self, s: T) -> T {
        if s <= T::zero() {
            T::zero()
        } else if s >= self.eps {
            self.model.big_g([T::zero(); 2], s) - self.deficit
        } else {
            integrate(
                |t| g_eps(&self.model, t, self.eps),
                T::zero(),
                s,
                T::lit(PRIMITIVE_TOL) * T::lit(1e-2),
            )
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pb() -> NonlinearityModel<f64> {
        NonlinearityModel::prandtl_batchelor()
    }

    fn pw() -> NonlinearityModel<f64> {
        NonlinearityModel::power(1.0, 1.0, 1.5).unwrap()
    }

    // closed form of G_ε for g ≡ 1
    fn pb_oracle(s: f64, eps: f64) -> f64 {
        if s >= eps {
            s - eps / 2.0
        } else {
            let t = s / eps;
            eps * (2.5 * t.powi(4) - 3.0 * t.powi(5) + t.powi(6))
        }
    }

    #[test]
    fn beta_examples() {
        assert_eq!(beta(-1.0), 0.0);
        assert_eq!(beta(0.5), 1.875);
        assert_eq!(beta(2.0), 0.0);
        let area = integrate(beta::<f64>, 0.0, 1.0, 1e-14);
        assert!((area - 1.0).abs() < 1e-14);
    }

    #[test]
    fn big_b_examples() {
        assert_eq!(big_b(0.0), 0.0);
        assert_eq!(big_b(1.0), 1.0);
        assert!((big_b(0.5f64) - 0.5).abs() < 1e-15);
        assert_eq!(big_b(-3.0), 0.0);
        assert_eq!(big_b(7.0), 1.0);
    }

    #[test]
    fn g_eps_examples() {
        let eps = 0.1;
        assert_eq!(g_eps(&pb(), 2.0 * eps, eps), 1.0);
        assert_eq!(g_eps(&pb(), 0.0, eps), 0.0);
        assert_eq!(g_eps(&pw(), 0.0, eps), 0.0);
        let v = g_eps(&pw(), eps / 2.0, eps);
        assert!((v - 0.5 * (1.0 + (eps / 2.0).sqrt())).abs() < 1e-15);
    }

    #[test]
    fn big_g_eps_examples() {
        assert_eq!(big_g_eps(&pb(), 0.0, 0.1), 0.0);
        for &(s, eps) in &[(5.0, 0.1), (0.05, 0.1), (0.3, 0.2), (1e-3, 0.01)] {
            assert!((big_g_eps(&pb(), s, eps) - pb_oracle(s, eps)).abs() < 1e-12);
        }
        let s = 3.0;
        let v = big_g_eps(&pb(), s, 0.01);
        assert!(v >= s - 0.01 && v <= s);
    }

    #[test]
    fn power_primitive_against_quadrature_of_g() {
        let m = pw();
        for &s in &[0.0, 0.1, 1.0, 4.0] {
            let q = integrate(|t| m.g([0.0; 2], t), 0.0, s, 1e-13);
            assert!((m.big_g([0.0; 2], s) - q).abs() < 1e-10);
        }
    }

    #[test]
    fn smoother_matches_free_functions() {
        for m in [pb(), pw()] {
            let eps = 0.07;
            let sm = Smoother::new(m, eps).unwrap();
            for k in 0..50 {
                let s = k as f64 * 0.013;
                assert!((sm.big_g_eps(s) - big_g_eps(&m, s, eps)).abs() < 1e-12, "s = {s}");
            }
        }
        assert!((Smoother::new(pb(), 0.2).unwrap().deficit() - 0.1).abs() < 1e-14);
    }

    #[test]
    fn smoother_rejects_bad_eps() {
        assert!(Smoother::new(pb(), 0.0).is_err());
        assert!(Smoother::new(pb(), -1.0).is_err());
    }

    #[test]
    fn power_validation() {
        assert!(NonlinearityModel::power(1.0, 1.0, 2.0f64).is_err());
        assert!(NonlinearityModel::power(1.0, 1.0, 1.0f64).is_err());
        assert!(NonlinearityModel::power(-1.0, 1.0, 1.5f64).is_err());
    }

    #[test]
    fn single_precision_smoothing() {
        let m = NonlinearityModel::<f32>::prandtl_batchelor();
        let v = big_g_eps(&m, 1.0f32, 0.1);
        assert!((v - 0.95).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn big_b_derivative_is_beta(s in -0.5f64..1.5) {
            let h = 1e-6;
            let fd = (big_b(s + h) - big_b(s - h)) / (2.0 * h);
            prop_assert!((fd - beta(s)).abs() < 1e-8);
        }

        #[test]
        fn big_b_bounded_and_monotone(a in -2.0f64..3.0, b in -2.0f64..3.0) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!((0.0..=1.0).contains(&big_b(lo)));
            prop_assert!(big_b(lo) <= big_b(hi));
        }

        #[test]
        fn smoothing_sandwich(
            s in 0.0f64..5.0,
            eps in 1e-3f64..1.0,
            a1 in 0.0f64..3.0,
            a2 in 0.0f64..3.0,
            p in 1.01f64..1.99,
        ) {
            let m = NonlinearityModel::power(a1, a2, p).unwrap();
            let g = m.g([0.0; 2], s);
            let ge = g_eps(&m, s, eps);
            prop_assert!(ge >= 0.0 && ge <= g);
            let gap = m.big_g([0.0; 2], s) - big_g_eps(&m, s, eps);
            prop_assert!(gap >= -1e-12);
            prop_assert!(gap <= m.smoothing_gap_bound(eps) + 1e-12);
        }

        #[test]
        fn big_g_eps_monotone(a in 0.0f64..2.0, b in 0.0f64..2.0, eps in 0.01f64..0.5) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let m = pw();
            prop_assert!(big_g_eps(&m, lo, eps) <= big_g_eps(&m, hi, eps) + 1e-13);
        }
    }
}
