//! Adaptive Gauss–Kronrod (7, 15) quadrature.

use crate::scalar::Real;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the odd Kronrod nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: usize = 48;

fn gk15<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T) -> (T, T) {
    let half = T::lit(0.5);
    let c = (a + b) * half;
    let r = (b - a) * half;
    let fc = f(c);
    let mut k = fc * T::lit(WGK[7]);
    let mut g = fc * T::lit(WG[3]);
    for j in 0..7 {
        let x = r * T::lit(XGK[j]);
        let s = f(c - x) + f(c + x);
        k = k + s * T::lit(WGK[j]);
        if j % 2 == 1 {
            g = g + s * T::lit(WG[j / 2]);
        }
    }
    (k * r, ((k - g) * r).abs())
}

fn recurse<T: Real, F: Fn(T) -> T>(f: &F, a: T, b: T, tol: T, depth: usize) -> T {
    let (est, err) = gk15(f, a, b);
    if err <= tol || depth >= MAX_DEPTH {
        return est;
    }
    let m = (a + b) * T::lit(0.5);
    if !(m > a && m < b) {
        return est;
    }
    let half_tol = tol * T::lit(0.5);
    recurse(f, a, m, half_tol, depth + 1) + recurse(f, m, b, half_tol, depth + 1)
}

/// `∫_a^b f` to absolute tolerance `tol` (floored at a few ulps of the
/// working precision).
pub fn integrate<T: Real, F: Fn(T) -> T>(f: F, a: T, b: T, tol: T) -> T {
    if a == b {
        return T::zero();
    }
    let tol = tol.max(T::epsilon() * T::lit(16.0) * (b - a).abs());
    recurse(&f, a, b, tol, 0)
}
