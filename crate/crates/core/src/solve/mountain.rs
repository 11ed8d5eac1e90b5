//! Mountain-pass critical point of the truncated energy by a string method
//! in the H¹₀ metric.
//!
//! A discrete path from `0` to the minimizer is kept equispaced in the
//! energy norm. At every sweep the highest node is pushed to the maximum of
//! the energy along the local path tangent and then descends in the
//! directions orthogonal to it; the other interior nodes descend
//! orthogonally to their own tangents, which keeps the string close to a
//! minimal energy path. The highest node converges to a saddle.

use rayon::prelude::*;

use super::descent::{line_search, Objective};
use super::newton::newton_polish;
use super::{BranchKind, BranchResult, SolveConfig, StageRecord};
use crate::energy::{Energy, Field};
use crate::error::{Error, Result};
use crate::mesh::AssembledForms;
use crate::scalar::{dot, Real};

const TANGENT_ITERS: usize = 60;
const MIN_RELAX_STEP: f64 = 1e-8;
const POLISH_EVERY: usize = 10;
const POLISH_STEPS: usize = 30;
const PEAK_SAMPLES: usize = 256;
const MAX_RECOVERIES: usize = 20;

struct Path<'f, T> {
    forms: &'f AssembledForms<T>,
    nodes: Vec<Vec<T>>,
}

impl<T: Real> Path<'_, T> {
    fn dist(&self, a: &[T], b: &[T]) -> T {
        let d: Vec<T> = a.iter().zip(b).map(|(&x, &y)| x - y).collect();
        self.forms.h1_norm(&d)
    }

    fn arc_lengths(forms: &AssembledForms<T>, nodes: &[Vec<T>]) -> Vec<T> {
        let mut s = vec![T::zero(); nodes.len()];
        for k in 1..nodes.len() {
            let d: Vec<T> = nodes[k].iter().zip(&nodes[k - 1]).map(|(&x, &y)| x - y).collect();
            s[k] = s[k - 1] + forms.h1_norm(&d);
        }
        s
    }

    /// Points of the polyline through `nodes` at the increasing arc
    /// positions `at`, given the cumulative arc lengths `s`.
    fn sample(nodes: &[Vec<T>], s: &[T], at: &[T]) -> Vec<Vec<T>> {
        let p = nodes.len();
        let mut seg = 0;
        at.iter()
            .map(|&t| {
                if p == 1 {
                    return nodes[0].clone();
                }
                while seg + 1 < p - 1 && s[seg + 1] < t {
                    seg += 1;
                }
                let len = s[seg + 1] - s[seg];
                let w = if len > T::zero() { (t - s[seg]) / len } else { T::zero() };
                let w = w.max(T::zero()).min(T::one());
                if w == T::one() {
                    return nodes[seg + 1].clone();
                }
                nodes[seg]
                    .iter()
                    .zip(&nodes[seg + 1])
                    .map(|(&a, &b)| (T::one() - w) * a + w * b)
                    .collect()
            })
            .collect()
    }

    /// Rebuilds a path of `count` points from two polylines sharing the
    /// peak (the last node of `left`, the first of `right`), with the peak at
    /// index `count / 2`. Both neighbours of the peak sit at the same
    /// distance from it; spacing grows geometrically toward an endpoint when
    /// one side is much longer than the other.
    fn split_resample(
        forms: &AssembledForms<T>,
        left: &[Vec<T>],
        right: &[Vec<T>],
        count: usize,
    ) -> Vec<Vec<T>> {
        let mid = count / 2;
        let (nl, nr) = (mid, count - 1 - mid);
        let sl = Self::arc_lengths(forms, left);
        let sr = Self::arc_lengths(forms, right);
        let (ll, lr) = (sl[sl.len() - 1], sr[sr.len() - 1]);
        let delta = (ll / T::from_usize_lossy(nl)).min(lr / T::from_usize_lossy(nr));
        let from_peak_left = graded(ll, nl, delta);
        let at_left: Vec<T> = from_peak_left.iter().rev().map(|&d| ll - d).collect();
        let mut out = Self::sample(left, &sl, &at_left);
        *out.first_mut().expect("nonempty") = left[0].clone();
        out.pop();
        let mut r = Self::sample(right, &sr, &graded(lr, nr, delta));
        r[0] = right[0].clone();
        *r.last_mut().expect("nonempty") = right[right.len() - 1].clone();
        out.extend(r);
        out
    }

    /// Unit tangent `(φ_{k+1} - φ_{k-1}) / ‖·‖_K` and its stiffness image.
    fn tangent(&self, k: usize) -> Option<(Vec<T>, Vec<T>)> {
        let mut tau: Vec<T> = self.nodes[k + 1]
            .iter()
            .zip(&self.nodes[k - 1])
            .map(|(&a, &b)| a - b)
            .collect();
        let norm = self.forms.h1_norm(&tau);
        if !(norm > T::zero()) {
            return None;
        }
        tau.iter_mut().for_each(|v| *v = *v / norm);
        let ktau = self.forms.stiffness().mul_vec(&tau);
        Some((tau, ktau))
    }
}

/// `segments + 1` positions on `[0, len]` from 0: uniform when that is no
/// coarser than `delta`, otherwise starting at `delta` and growing by a
/// constant ratio.
fn graded<T: Real>(len: T, segments: usize, delta: T) -> Vec<T> {
    let m = T::from_usize_lossy(segments);
    let uniform = |_: ()| (0..=segments).map(|j| len * T::from_usize_lossy(j) / m).collect();
    if segments <= 1 || !(delta > T::zero()) || len <= delta * m * (T::one() + T::lit(1e-12)) {
        return uniform(());
    }
    // total length of the geometric spacing with ratio q
    let total = |q: T| delta * (q.powi(segments as i32) - T::one()) / (q - T::one());
    let (mut lo, mut hi) = (T::one(), T::lit(2.0));
    while total(hi) < len {
        lo = hi;
        hi = hi * T::lit(2.0);
    }
    for _ in 0..200 {
        let q = T::lit(0.5) * (lo + hi);
        if q <= lo || q >= hi {
            break;
        }
        if total(q) < len {
            lo = q;
        } else {
            hi = q;
        }
    }
    let q = T::lit(0.5) * (lo + hi);
    let mut out: Vec<T> = (0..=segments)
        .map(|j| delta * (q.powi(j as i32) - T::one()) / (q - T::one()))
        .collect();
    out[segments] = len;
    out
}

/// Maximizes `s ↦ f(φ + s τ)` on `[-smax, smax]` by a safeguarded
/// (Illinois) regula falsi on the directional derivative.
fn tangent_max<T: Real>(obj: &Objective<'_, '_, T>, phi: &[T], tau: &[T], smax: T) -> Vec<T> {
    let n = phi.len();
    let mut g = vec![T::zero(); n];
    let at = |s: T, g: &mut Vec<T>| -> T {
        let x: Vec<T> = phi.iter().zip(tau).map(|(&p, &t)| p + s * t).collect();
        obj.value_grad(&x, g);
        dot(g, tau)
    };
    let point = |s: T| -> Vec<T> { phi.iter().zip(tau).map(|(&p, &t)| p + s * t).collect() };
    let d0 = at(T::zero(), &mut g);
    if d0 == T::zero() || !(smax > T::zero()) {
        return phi.to_vec();
    }
    let sign = if d0 > T::zero() { T::one() } else { -T::one() };
    let (mut a, mut fa) = (T::zero(), d0);
    let mut b = sign * smax * T::lit(0.25);
    let mut fb = at(b, &mut g);
    while fb * fa > T::zero() && b.abs() < smax {
        a = b;
        fa = fb;
        b = sign * (b.abs() * T::lit(2.0)).min(smax);
        fb = at(b, &mut g);
    }
    if fb * fa > T::zero() {
        return point(b);
    }
    // the derivative changes sign between a and b
    let scale = d0.abs();
    let mut c = b;
    let mut side = 0i8;
    for _ in 0..TANGENT_ITERS {
        if fb == fa {
            break;
        }
        c = (a * fb - b * fa) / (fb - fa);
        let fc = at(c, &mut g);
        if fc.abs() <= T::lit(1e-12) * scale || fc == T::zero() {
            break;
        }
        if fc * fb < T::zero() {
            a = b;
            fa = fb;
            side = 0;
        } else {
            if side == 1 {
                fa = fa * T::lit(0.5);
            }
            side = 1;
        }
        b = c;
        fb = fc;
    }
    point(c)
}

/// Steepest descent step orthogonal (in the energy inner product) to `tau`.
fn perpendicular_descent<T: Real>(
    obj: &Objective<'_, '_, T>,
    phi: &[T],
    f0: T,
    grad: &[T],
    tau: &[T],
    ktau: &[T],
    a0: T,
) -> Option<(Vec<T>, T, T)> {
    let z = obj.energy.forms().riesz(grad);
    let comp = dot(&z, ktau);
    let d: Vec<T> = z.iter().zip(tau).map(|(&zi, &ti)| -(zi - comp * ti)).collect();
    let slope = dot(grad, &d);
    if !(slope < T::zero()) {
        return None;
    }
    line_search(obj, phi, f0, &d, slope, a0).map(|s| (s.u, s.energy, s.alpha))
}

/// Samples the polyline through `nodes` finely, and rebuilds a path of
/// `count` points whose middle node is the highest sample. `None` when no
/// interior sample rises above both ends.
fn split_at_peak<T: Real>(
    obj: &Objective<'_, '_, T>,
    nodes: &[Vec<T>],
    count: usize,
) -> Option<Vec<Vec<T>>> {
    let forms = obj.energy.forms();
    let p = nodes.len();
    let per_seg = (PEAK_SAMPLES / (p - 1)).max(16);
    let ends = obj.value(&nodes[0]).max(obj.value(&nodes[p - 1]));
    let samples: Vec<(usize, T)> = (0..p - 1)
        .flat_map(|seg| (1..=per_seg).map(move |j| (seg, j)))
        .filter(|&(seg, j)| !(seg == p - 2 && j == per_seg))
        .map(|(seg, j)| (seg, T::from_usize_lossy(j) / T::from_usize_lossy(per_seg)))
        .collect();
    let point = |seg: usize, w: T| -> Vec<T> {
        nodes[seg]
            .iter()
            .zip(&nodes[seg + 1])
            .map(|(&a, &b)| (T::one() - w) * a + w * b)
            .collect()
    };
    let values: Vec<T> = samples.par_iter().map(|&(seg, w)| obj.value(&point(seg, w))).collect();
    // first maximum, for determinism
    let mut top = 0;
    for j in 1..values.len() {
        if values[j] > values[top] {
            top = j;
        }
    }
    if values.is_empty() || !(values[top] > ends) {
        return None;
    }
    let (seg, w) = samples[top];
    let peak = point(seg, w);
    let mut left: Vec<Vec<T>> = nodes[..=seg].to_vec();
    left.push(peak.clone());
    let mut right = vec![peak];
    right.extend_from_slice(&nodes[seg + 1..]);
    Some(Path::split_resample(forms, &left, &right, count))
}

enum Outcome<T> {
    Saddle {
        u: Vec<T>,
        iterations: usize,
        converged: bool,
    },
    Collapse,
}

fn string_method<T: Real>(
    obj: &Objective<'_, '_, T>,
    cap: &[T],
    warm: Option<&[T]>,
    points: usize,
    tol: T,
    max_iters: usize,
) -> Outcome<T> {
    let forms = obj.energy.forms();
    let n = cap.len();
    let zero = vec![T::zero(); n];
    let polyline: Vec<Vec<T>> = match warm {
        None => vec![zero, cap.to_vec()],
        Some(w) => vec![zero, w.iter().zip(cap).map(|(&a, &b)| a.min(b)).collect(), cap.to_vec()],
    };
    let Some(nodes) = split_at_peak(obj, &polyline, points) else {
        return Outcome::Collapse;
    };
    let mut path = Path { forms, nodes };
    let p = points;
    let mut alpha = vec![T::one(); p];
    let mut best: Option<(Vec<T>, T)> = None;
    let mut recoveries = 0;
    for it in 0..max_iters {
        let energies: Vec<T> = path.nodes.par_iter().map(|u| obj.value(u)).collect();
        let mut k = 0;
        for j in 1..p {
            if energies[j] > energies[k] {
                k = j;
            }
        }
        if k == 0 || k == p - 1 {
            // the barrier fell between two samples
            recoveries += 1;
            match split_at_peak(obj, &path.nodes, p) {
                Some(nodes) if recoveries <= MAX_RECOVERIES => {
                    path.nodes = nodes;
                    alpha.iter_mut().for_each(|a| *a = T::one());
                    continue;
                }
                _ => return Outcome::Collapse,
            }
        }
        let Some((tau, ktau)) = path.tangent(k) else {
            return Outcome::Collapse;
        };
        let smax = path
            .dist(&path.nodes[k + 1], &path.nodes[k])
            .min(path.dist(&path.nodes[k], &path.nodes[k - 1]));
        let phi = tangent_max(obj, &path.nodes[k], &tau, smax);
        let mut g = vec![T::zero(); n];
        let f_phi = obj.value_grad(&phi, &mut g);
        let gn = obj.grad_norm(&g);
        // a critical point is accepted only strictly between the level of
        // 0 and the current path maximum; the trivial critical point 0 is
        // reached when the string has slipped below the barrier
        let floor = T::lit(1e-10) * (T::one() + energies[k].abs());
        let ceiling = energies[k].max(f_phi) + floor;
        let admissible = |e: T| e > floor && e <= ceiling;
        if admissible(f_phi) && best.as_ref().map_or(true, |(_, b)| gn < *b) {
            best = Some((phi.clone(), gn));
        }
        if gn <= tol && admissible(f_phi) {
            return Outcome::Saddle {
                u: phi,
                iterations: it,
                converged: true,
            };
        }
        if it % POLISH_EVERY == 0 {
            let pol = newton_polish(obj, &phi, tol, POLISH_STEPS);
            if pol.converged && admissible(pol.energy) {
                return Outcome::Saddle {
                    u: pol.u,
                    iterations: it,
                    converged: true,
                };
            }
        }
        let a0 = (alpha[k] * T::lit(2.0)).min(T::one());
        let res = perpendicular_descent(obj, &phi, f_phi, &g, &tau, &ktau, a0);
        let new_k = match res {
            Some((u, _, a)) => {
                alpha[k] = a.max(T::lit(MIN_RELAX_STEP));
                u
            }
            None => phi,
        };

        // relax the other interior nodes against the pre-sweep path
        let relaxed: Vec<Option<(Vec<T>, T)>> = (1..p - 1)
            .into_par_iter()
            .map(|j| {
                if j == k {
                    return None;
                }
                let (t, kt) = path.tangent(j)?;
                let mut gj = vec![T::zero(); n];
                let fj = obj.value_grad(&path.nodes[j], &mut gj);
                let a0 = (alpha[j] * T::lit(2.0)).min(T::one());
                perpendicular_descent(obj, &path.nodes[j], fj, &gj, &t, &kt, a0)
                    .map(|(u, _, a)| (u, a))
            })
            .collect();
        for (off, r) in relaxed.into_iter().enumerate() {
            if let Some((u, a)) = r {
                let j = off + 1;
                path.nodes[j] = u;
                alpha[j] = a.max(T::lit(MIN_RELAX_STEP));
            }
        }
        path.nodes[k] = new_k;

        // resample both sides so that the highest node sits mid-path, which
        // concentrates resolution around the saddle
        path.nodes = Path::split_resample(forms, &path.nodes[..=k], &path.nodes[k..], p);
    }
    match best {
        Some((u, _)) => Outcome::Saddle {
            u,
            iterations: max_iters,
            converged: false,
        },
        None => Outcome::Collapse,
    }
}

/// Mountain-pass critical point of the energy truncated at `cap`, on paths
/// from 0 to `cap`. `warm` (a previous saddle) shapes the initial path.
/// The result is clipped to `cap` nodally.
pub fn mountain_pass<T: Real>(
    config: &SolveConfig<T>,
    energy: &Energy<'_, T>,
    eps: T,
    cap: &Field<T>,
    warm: Option<&Field<T>>,
) -> Result<BranchResult<T>> {
    let sm = energy.smoother(eps)?;
    let cap_v = cap.values();
    let obj = Objective {
        energy,
        sm: &sm,
        cap: Some(cap_v),
    };
    let top = obj.value(cap_v);
    if !(top < T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "mountain pass needs an endpoint below zero energy, got {top}"
        )));
    }
    let mut points = config.path_points;
    let mut outcome = string_method(&obj, cap_v, warm.map(|w| w.values()), points, config.grad_tol, config.max_iters);
    if matches!(outcome, Outcome::Collapse) {
        points = 2 * points - 1;
        outcome = string_method(&obj, cap_v, None, points, config.grad_tol, config.max_iters);
    }
    let Outcome::Saddle {
        u,
        iterations,
        converged,
    } = outcome
    else {
        return Err(Error::PathCollapse { points });
    };
    let clipped: Vec<T> = u.iter().zip(cap_v).map(|(&a, &b)| a.min(b)).collect();
    let field = Field::from_values(energy.mesh(), clipped)?;
    let mut g = vec![T::zero(); field.len()];
    let energy_eps = obj.value_grad(field.values(), &mut g);
    // clipping moves the iterate by at most its overshoot above the cap
    let grad_after = energy.dual_norm(&g);
    let energy_true = energy.j(&field)?.total;
    let record = StageRecord {
        eps,
        energy_eps,
        grad_norm: grad_after,
        max_grad: energy.max_gradient(field.values()),
        iterations,
        converged: converged && grad_after <= config.grad_tol,
    };
    Ok(BranchResult {
        field,
        energy_eps,
        energy_true,
        eps_history: vec![record],
        kind: BranchKind::MountainPass,
        converged: record.converged,
    })
}
