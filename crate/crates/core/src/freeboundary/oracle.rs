//! Closed-form two-phase solutions with `g ≡ 1`: symmetric solutions on the
//! unit interval and radial solutions on a disk. Each has a lower-energy
//! (stable) and a higher-energy (unstable) free boundary position.

use crate::error::{Error, Result};
use crate::scalar::Real;

const BISECTION_STEPS: usize = 200;

fn bisect<T: Real, F: Fn(T) -> T>(f: F, mut lo: T, mut hi: T) -> T {
    let mut flo = f(lo);
    for _ in 0..BISECTION_STEPS {
        let mid = T::lit(0.5) * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == T::zero() {
            return mid;
        }
        if (fm > T::zero()) == (flo > T::zero()) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    T::lit(0.5) * (lo + hi)
}

/// Symmetric solutions on `(0, 1)`: `u = x/a` on `(0, a)`, `−u'' = λ` on
/// `(a, 1 − a)`, mirrored, with the jump `u'(a⁺)² − u'(a⁻)² = 2` imposed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Oracle1d<T> {
    pub lambda: T,
    pub a_stable: T,
    pub a_unstable: T,
}

impl<T: Real> Oracle1d<T> {
    /// `((λ/2)(1 − 2a))² − 1/a² − 2`
    pub fn matching(lambda: T, a: T) -> T {
        let s = T::lit(0.5) * lambda * (T::one() - T::lit(2.0) * a);
        s * s - T::one() / (a * a) - T::lit(2.0)
    }

    pub fn value(&self, a: T, x: T) -> T {
        let one = T::one();
        if x <= a {
            x / a
        } else if x >= one - a {
            (one - x) / a
        } else {
            one + T::lit(0.5) * self.lambda * (x - a) * (one - a - x)
        }
    }

    /// `J = 1/a + L − λ²L³/24` with `L = 1 − 2a`.
    pub fn energy(&self, a: T) -> T {
        let l = T::one() - T::lit(2.0) * a;
        T::one() / a + l - self.lambda * self.lambda * l * l * l / T::lit(24.0)
    }

    pub fn energy_stable(&self) -> T {
        self.energy(self.a_stable)
    }

    pub fn energy_unstable(&self) -> T {
        self.energy(self.a_unstable)
    }
}

/// Both roots of the matching function on `(0, ½)`, ordered by energy.
pub fn oracle_1d<T: Real>(lambda: T) -> Result<Oracle1d<T>> {
    if !(lambda > T::zero() && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!("lambda must be positive, got {lambda}")));
    }
    let half = T::lit(0.5);
    let f = |a: T| Oracle1d::matching(lambda, a);
    // f' = 2/a³ − λ²(1 − 2a) is convex in a with its minimum at (3/λ²)^¼;
    // its first zero is the maximum of f
    let df = |a: T| T::lit(2.0) / (a * a * a) - lambda * lambda * (T::one() - T::lit(2.0) * a);
    let a_star = (T::lit(3.0) / (lambda * lambda)).powf(T::lit(0.25)).min(half);
    if !(df(a_star) < T::zero()) {
        return Err(Error::NoSolution(format!("no free boundary solution at lambda = {lambda}")));
    }
    let tiny = T::min_positive_value().sqrt();
    let a_max = bisect(df, tiny, a_star);
    if !(f(a_max) > T::zero()) {
        return Err(Error::NoSolution(format!("no free boundary solution at lambda = {lambda}")));
    }
    let left = bisect(f, tiny, a_max);
    let right = bisect(f, a_max, half);
    let o = Oracle1d {
        lambda,
        a_stable: left,
        a_unstable: right,
    };
    Ok(if o.energy(left) <= o.energy(right) {
        o
    } else {
        Oracle1d {
            lambda,
            a_stable: right,
            a_unstable: left,
        }
    })
}

/// Radial solutions on the disk of radius `R`: `u = log(R/r)/log(R/ρ)` on
/// `(ρ, R)` and `u = 1 + (λ/4)(ρ² − r²)` on `(0, ρ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleRadial<T> {
    pub lambda: T,
    pub radius: T,
    pub rho_stable: T,
    pub rho_unstable: T,
}

impl<T: Real> OracleRadial<T> {
    /// `(λρ/2)² − (1/(ρ log(R/ρ)))² − 2`
    pub fn matching(lambda: T, radius: T, rho: T) -> T {
        let s = T::lit(0.5) * lambda * rho;
        let t = T::one() / (rho * (radius / rho).ln());
        s * s - t * t - T::lit(2.0)
    }

    pub fn value(&self, rho: T, r: T) -> T {
        if r >= rho {
            (self.radius / r).ln() / (self.radius / rho).ln()
        } else {
            T::one() + T::lit(0.25) * self.lambda * (rho * rho - r * r)
        }
    }

    /// `J = π/log(R/ρ) + πρ² − πλ²ρ⁴/16`
    pub fn energy(&self, rho: T) -> T {
        let pi = T::lit(std::f64::consts::PI);
        let r2 = rho * rho;
        pi / (self.radius / rho).ln() + pi * r2 - pi * self.lambda * self.lambda * r2 * r2 / T::lit(16.0)
    }

    pub fn energy_stable(&self) -> T {
        self.energy(self.rho_stable)
    }

    pub fn energy_unstable(&self) -> T {
        self.energy(self.rho_unstable)
    }
}

const RADIAL_SCAN: usize = 4096;

/// Both roots of the radial matching function on `(0, R)`, ordered by
/// energy. The maximum of the matching function is located by a scan, then
/// refined by golden-section search.
pub fn oracle_radial<T: Real>(lambda: T, radius: T) -> Result<OracleRadial<T>> {
    if !(lambda > T::zero() && lambda.is_finite() && radius > T::zero() && radius.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lambda and radius must be positive, got {lambda} and {radius}"
        )));
    }
    let f = |rho: T| OracleRadial::matching(lambda, radius, rho);
    let n = RADIAL_SCAN;
    let at = |j: usize| radius * T::from_usize_lossy(j) / T::from_usize_lossy(n);
    let mut best = 1;
    for j in 2..n {
        if f(at(j)) > f(at(best)) {
            best = j;
        }
    }
    let (mut lo, mut hi) = (at(best - 1), at(best + 1));
    let g = T::lit(0.5 * (5f64.sqrt() - 1.0));
    for _ in 0..BISECTION_STEPS {
        let x1 = hi - g * (hi - lo);
        let x2 = lo + g * (hi - lo);
        if !(x1 < x2) {
            break;
        }
        if f(x1) < f(x2) {
            lo = x1;
        } else {
            hi = x2;
        }
    }
    let rho_max = T::lit(0.5) * (lo + hi);
    if !(f(rho_max) > T::zero()) {
        return Err(Error::NoSolution(format!(
            "no radial free boundary solution at lambda = {lambda}, radius = {radius}"
        )));
    }
    let tiny = radius * T::epsilon();
    let inner = bisect(f, tiny, rho_max);
    let outer = bisect(f, rho_max, radius * (T::one() - T::epsilon()));
    let o = OracleRadial {
        lambda,
        radius,
        rho_stable: inner,
        rho_unstable: outer,
    };
    Ok(if o.energy(inner) <= o.energy(outer) {
        o
    } else {
        OracleRadial {
            rho_stable: outer,
            rho_unstable: inner,
            ..o
        }
    })
}
