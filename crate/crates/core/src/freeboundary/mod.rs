//! Free boundary diagnostics: level sets of the P1 interpolant, one-sided
//! gradients and the jump `|∇u⁺|² - |∇u⁻|² = 2`, the surface-integral form
//! of the free boundary condition, and phase-wise residuals of the PDE.

mod oracle;

use std::io::Write;

use crate::energy::{Energy, Field};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::scalar::Real;

pub use oracle::{oracle_1d, oracle_radial, Oracle1d, OracleRadial};

/// How far (in cells past the cut cell) to look for a cell entirely in one
/// phase.
const MAX_WALK: usize = 3;

/// One piece of a level set: a segment inside the cut cell `cell`, or in 1D
/// a crossing point (`a == b`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment<T> {
    pub a: [T; 2],
    pub b: [T; 2],
    pub cell: usize,
}

impl<T: Real> Segment<T> {
    pub fn midpoint(&self) -> [T; 2] {
        let h = T::lit(0.5);
        [h * (self.a[0] + self.b[0]), h * (self.a[1] + self.b[1])]
    }

    /// Zero for 1D crossings.
    pub fn length(&self) -> T {
        let dx = self.b[0] - self.a[0];
        let dy = self.b[1] - self.a[1];
        (dx * dx + dy * dy).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet<T> {
    pub level: T,
    pub segments: Vec<Segment<T>>,
    /// Vertices exactly at the level, nudged upward for the extraction.
    pub degenerate_nodes: usize,
    /// Cells lying entirely at the level, skipped.
    pub degenerate_cells: usize,
}

impl<T: Real> LevelSet<T> {
    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }

    pub fn total_length(&self) -> T {
        self.segments.iter().map(|s| s.length()).sum()
    }

    /// The cells on the `{u > level}` and `{u < level}` sides of segment
    /// `i`. A P1 level segment lies inside a single cell, which therefore
    /// holds both sides.
    pub fn adjacent_cells(&self, i: usize) -> (usize, usize) {
        let c = self.segments[i].cell;
        (c, c)
    }
}

fn nudge<T: Real>(level: T) -> T {
    T::lit(1e-14).max(T::lit(4.0) * T::epsilon() * level.abs().max(T::one()))
}

/// `{u = level}` by linear interpolation along cell edges.
pub fn extract_level_set<T: Real>(mesh: &Mesh<T>, field: &Field<T>, level: T) -> Result<LevelSet<T>> {
    check_field(mesh, field)?;
    let raw = field.values();
    let bump = nudge(level);
    let mut degenerate_nodes = 0;
    let values: Vec<T> = raw
        .iter()
        .map(|&v| {
            if v == level {
                degenerate_nodes += 1;
                level + bump
            } else {
                v
            }
        })
        .collect();
    let mut segments = Vec::new();
    let mut degenerate_cells = 0;
    for k in 0..mesh.n_cells() {
        let c = mesh.cell(k);
        if c.iter().all(|&v| raw[v] == level) {
            degenerate_cells += 1;
            continue;
        }
        let mut pts: Vec<[T; 2]> = Vec::with_capacity(2);
        for a in 0..c.len() {
            for b in a + 1..c.len() {
                let (va, vb) = (values[c[a]], values[c[b]]);
                if (va > level) != (vb > level) {
                    let t = (level - va) / (vb - va);
                    let (pa, pb) = (mesh.vertex(c[a]), mesh.vertex(c[b]));
                    pts.push([pa[0] + t * (pb[0] - pa[0]), pa[1] + t * (pb[1] - pa[1])]);
                }
            }
        }
        match pts.len() {
            1 => segments.push(Segment {
                a: pts[0],
                b: pts[0],
                cell: k,
            }),
            2 => segments.push(Segment {
                a: pts[0],
                b: pts[1],
                cell: k,
            }),
            _ => {}
        }
    }
    Ok(LevelSet {
        level,
        segments,
        degenerate_nodes,
        degenerate_cells,
    })
}

fn check_field<T: Real>(mesh: &Mesh<T>, field: &Field<T>) -> Result<()> {
    if field.mesh_id() != mesh.id() {
        return Err(Error::MeshMismatch {
            field: field.mesh_id(),
            forms: mesh.id(),
        });
    }
    Ok(())
}

fn norm2<T: Real>(g: [T; 2]) -> T {
    g[0] * g[0] + g[1] * g[1]
}

/// Squared one-sided gradients at a level-set segment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OneSided<T> {
    pub gplus_sq: T,
    pub gminus_sq: T,
    /// Both phase cells were found within reach of the segment.
    pub reliable: bool,
}

impl<T: Real> OneSided<T> {
    /// `(|∇u⁺|² - |∇u⁻|²) - 2`
    pub fn jump_residual(&self) -> T {
        self.gplus_sq - self.gminus_sq - T::lit(2.0)
    }
}

/// Walks from `p` along `dir` through at most `MAX_WALK` cells past `start`
/// and returns the first cell accepted by `pred`.
fn walk<T: Real, F: Fn(usize) -> bool>(
    mesh: &Mesh<T>,
    neighbors: &[[Option<usize>; 3]],
    start: usize,
    p: [T; 2],
    dir: [T; 2],
    pred: F,
) -> Option<usize> {
    let mut cell = start;
    let mut prev: Option<usize> = None;
    let mut x = p;
    for _ in 0..MAX_WALK {
        let lam = mesh.barycentric(cell, x);
        let g = mesh.basis_gradients(cell);
        let nv = mesh.cell(cell).len();
        // exit through the facet whose barycentric coordinate vanishes first
        let mut exit: Option<(T, usize)> = None;
        for a in 0..nv {
            let rate = g[a][0] * dir[0] + g[a][1] * dir[1];
            if rate < T::zero() {
                let next = neighbors[cell][a];
                if next.is_some() && next == prev {
                    continue;
                }
                let t = (-lam[a] / rate).max(T::zero());
                if exit.map_or(true, |(best, _)| t < best) {
                    exit = Some((t, a));
                }
            }
        }
        let (t, a) = exit?;
        let next = neighbors[cell][a]?;
        x = [x[0] + t * dir[0], x[1] + t * dir[1]];
        prev = Some(cell);
        cell = next;
        if pred(cell) {
            return Some(cell);
        }
    }
    None
}

/// For every segment of `ls`, `|∇u|²` on the nearest cell along the normal
/// that lies entirely in `{u > level + δ}` (respectively `{u < level - δ}`).
pub fn one_sided_gradients<T: Real>(
    mesh: &Mesh<T>,
    field: &Field<T>,
    ls: &LevelSet<T>,
    delta: T,
) -> Result<Vec<OneSided<T>>> {
    check_field(mesh, field)?;
    if !(delta > T::zero()) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let u = field.values();
    let neighbors = mesh.cell_neighbors();
    let above = |k: usize| mesh.cell(k).iter().all(|&v| u[v] > ls.level + delta);
    let below = |k: usize| mesh.cell(k).iter().all(|&v| u[v] < ls.level - delta);
    Ok(ls
        .segments
        .iter()
        .map(|s| {
            let g = mesh.cell_gradient(s.cell, u);
            let gn = norm2(g).sqrt();
            if !(gn > T::zero()) {
                return OneSided {
                    gplus_sq: T::zero(),
                    gminus_sq: T::zero(),
                    reliable: false,
                };
            }
            let nu = [g[0] / gn, g[1] / gn];
            let back = [-nu[0], -nu[1]];
            let p = s.midpoint();
            let plus = walk(mesh, &neighbors, s.cell, p, nu, above);
            let minus = walk(mesh, &neighbors, s.cell, p, back, below);
            let sq = |k: Option<usize>| k.map_or(T::zero(), |k| norm2(mesh.cell_gradient(k, u)));
            OneSided {
                gplus_sq: sq(plus),
                gminus_sq: sq(minus),
                reliable: plus.is_some() && minus.is_some(),
            }
        })
        .collect())
}

/// Vertex gradients recovered by averaging the cell gradients around each
/// vertex with measure weights.
fn recovered_gradients<T: Real>(mesh: &Mesh<T>, u: &[T]) -> Vec<[T; 2]> {
    let mut acc = vec![[T::zero(); 2]; mesh.n_vertices()];
    let mut weight = vec![T::zero(); mesh.n_vertices()];
    for k in 0..mesh.n_cells() {
        let g = mesh.cell_gradient(k, u);
        let w = mesh.cell_measures()[k];
        for &v in mesh.cell(k) {
            acc[v][0] = acc[v][0] + w * g[0];
            acc[v][1] = acc[v][1] + w * g[1];
            weight[v] = weight[v] + w;
        }
    }
    acc.iter()
        .zip(&weight)
        .map(|(a, &w)| if w > T::zero() { [a[0] / w, a[1] / w] } else { [T::zero(); 2] })
        .collect()
}

fn interpolate<T: Real>(mesh: &Mesh<T>, cell: usize, p: [T; 2], nodal: &[[T; 2]]) -> [T; 2] {
    let lam = mesh.barycentric(cell, p);
    let mut out = [T::zero(); 2];
    for (a, &v) in mesh.cell(cell).iter().enumerate() {
        out[0] = out[0] + lam[a] * nodal[v][0];
        out[1] = out[1] + lam[a] * nodal[v][1];
    }
    out
}

/// The surface-integral difference at `(δ⁺, δ⁻)` and at half those values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneralizedCheck<T> {
    pub value: T,
    pub value_half: T,
    /// One of the level sets at `(δ⁺, δ⁻)` was empty.
    pub empty: bool,
}

fn surface_difference<T: Real>(
    mesh: &Mesh<T>,
    field: &Field<T>,
    grads: &[[T; 2]],
    phi: &[[T; 2]],
    dplus: T,
    dminus: T,
) -> Result<(T, bool)> {
    let one = T::one();
    let upper = extract_level_set(mesh, field, one + dplus)?;
    let lower = extract_level_set(mesh, field, one - dminus)?;
    // n is the outward normal of the strip between the two level sets:
    // +∇u/|∇u| on the upper one, -∇u/|∇u| on the lower one
    let integral = |ls: &LevelSet<T>, upper_side: bool| -> T {
        ls.segments
            .iter()
            .map(|s| {
                let p = s.midpoint();
                let g = interpolate(mesh, s.cell, p, grads);
                let gsq = norm2(g);
                let gn = gsq.sqrt();
                if !(gn > T::zero()) {
                    return T::zero();
                }
                let f = interpolate(mesh, s.cell, p, phi);
                let flux = (f[0] * g[0] + f[1] * g[1]) / gn;
                let measure = if mesh.dim() == 1 { one } else { s.length() };
                if upper_side {
                    (T::lit(2.0) - gsq) * flux * measure
                } else {
                    gsq * (-flux) * measure
                }
            })
            .sum()
    };
    let value = integral(&upper, true) - integral(&lower, false);
    Ok((value, upper.is_empty() || lower.is_empty()))
}

/// `∫_{u=1+δ⁺} (2 - |∇u|²) Φ·n dσ - ∫_{u=1-δ⁻} |∇u|² Φ·n dσ`, with `n` the
/// outward normal of `{1-δ⁻ < u < 1+δ⁺}` and `Φ` given by its vertex
/// values. Gradients on the level sets come from the recovered vertex
/// gradients. In 1D the integrals are point evaluations.
pub fn generalized_fb_check<T: Real>(
    mesh: &Mesh<T>,
    field: &Field<T>,
    phi: &[[T; 2]],
    delta_plus: T,
    delta_minus: T,
) -> Result<GeneralizedCheck<T>> {
    check_field(mesh, field)?;
    if !(delta_plus > T::zero() && delta_minus > T::zero()) {
        return Err(Error::InvalidArgument(format!(
            "deltas must be positive, got {delta_plus} and {delta_minus}"
        )));
    }
    if phi.len() != mesh.n_vertices() {
        return Err(Error::InvalidArgument(format!(
            "test field has {} vertices, mesh has {}",
            phi.len(),
            mesh.n_vertices()
        )));
    }
    let grads = recovered_gradients(mesh, field.values());
    let half = T::lit(0.5);
    let (value, empty) = surface_difference(mesh, field, &grads, phi, delta_plus, delta_minus)?;
    let (value_half, _) =
        surface_difference(mesh, field, &grads, phi, delta_plus * half, delta_minus * half)?;
    Ok(GeneralizedCheck {
        value,
        value_half,
        empty,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdeResiduals<T> {
    /// `max |(Ku)_i| / m_i` over vertices in `{u < 1 - δ}` with all
    /// neighbours there too.
    pub harmonic: T,
    /// `max |(Ku)_i / m_i - λ g(u_i - 1)|` over vertices in `{u > 1 + δ}`
    /// with all neighbours there too.
    pub interior: T,
}

pub fn pde_residuals<T: Real>(energy: &Energy<'_, T>, field: &Field<T>, delta: T) -> Result<PdeResiduals<T>> {
    let mesh = energy.mesh();
    check_field(mesh, field)?;
    if !(delta > T::zero()) {
        return Err(Error::InvalidArgument(format!("delta must be positive, got {delta}")));
    }
    let u = field.values();
    let forms = energy.forms();
    let k = forms.stiffness();
    let m = forms.lumped_mass();
    let adj = mesh.vertex_neighbors();
    let one = T::one();
    let (mut harmonic, mut interior) = (T::zero(), T::zero());
    for &i in forms.interior_index() {
        let lap = k.row(i).map(|(j, v)| v * u[j]).sum::<T>() / m[i];
        let all = |pred: &dyn Fn(T) -> bool| pred(u[i]) && adj[i].iter().all(|&j| pred(u[j]));
        if all(&|v| v < one - delta) {
            harmonic = harmonic.max(lap.abs());
        }
        if all(&|v| v > one + delta) {
            let rhs = energy.lambda() * energy.model().g(mesh.vertex(i), u[i] - one);
            interior = interior.max((lap - rhs).abs());
        }
    }
    Ok(PdeResiduals { harmonic, interior })
}

/// Per-segment jump data and aggregate residuals of one field.
#[derive(Debug, Clone, PartialEq)]
pub struct FbReport<T> {
    pub level_set: LevelSet<T>,
    pub one_sided: Vec<OneSided<T>>,
    /// `(|∇u⁺|² - |∇u⁻|²) - 2` per segment.
    pub jump_residuals: Vec<T>,
    /// Median of `|jump residual|` over reliable segments, `None` if there
    /// are none.
    pub median_jump: Option<T>,
    pub generalized: GeneralizedCheck<T>,
    pub harmonic_residual: T,
    pub interior_residual: T,
    pub delta: T,
}

impl<T: Real> FbReport<T> {
    pub fn reliable_count(&self) -> usize {
        self.one_sided.iter().filter(|o| o.reliable).count()
    }

    /// CSV `seg_id,x0,y0,x1,y1,gplus_sq,gminus_sq,jump_residual,reliable`.
    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "seg_id,x0,y0,x1,y1,gplus_sq,gminus_sq,jump_residual,reliable")?;
        for (i, (s, o)) in self.level_set.segments.iter().zip(&self.one_sided).enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                i,
                s.a[0].to_f64_lossy(),
                s.a[1].to_f64_lossy(),
                s.b[0].to_f64_lossy(),
                s.b[1].to_f64_lossy(),
                o.gplus_sq.to_f64_lossy(),
                o.gminus_sq.to_f64_lossy(),
                self.jump_residuals[i].to_f64_lossy(),
                u8::from(o.reliable)
            )?;
        }
        Ok(())
    }
}

pub fn median<T: Real>(values: &mut [T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        T::lit(0.5) * (values[n / 2 - 1] + values[n / 2])
    })
}

/// Default test vector field for the surface-integral check: `d² (x - c)`
/// with `d` the normalized depth of the domain and `c` its centre, so that
/// it vanishes on the boundary.
pub fn default_test_field<T: Real>(mesh: &Mesh<T>) -> Vec<[T; 2]> {
    let depth = crate::solve::depth(mesh);
    let n = T::from_usize_lossy(mesh.n_vertices());
    let mut c = [T::zero(); 2];
    for v in mesh.vertices() {
        c[0] = c[0] + v[0] / n;
        c[1] = c[1] + v[1] / n;
    }
    mesh.vertices()
        .iter()
        .zip(depth)
        .map(|(v, d)| [d * d * (v[0] - c[0]), d * d * (v[1] - c[1])])
        .collect()
}

/// Full diagnostic of `field` at width `delta` using `phi` (or the default
/// test field) for the surface-integral check.
pub fn fb_report<T: Real>(
    energy: &Energy<'_, T>,
    field: &Field<T>,
    delta: T,
    phi: Option<&[[T; 2]]>,
) -> Result<FbReport<T>> {
    let mesh = energy.mesh();
    let level_set = extract_level_set(mesh, field, T::one())?;
    let one_sided = one_sided_gradients(mesh, field, &level_set, delta)?;
    let jump_residuals: Vec<T> = one_sided.iter().map(|o| o.jump_residual()).collect();
    let mut reliable: Vec<T> = one_sided
        .iter()
        .filter(|o| o.reliable)
        .map(|o| o.jump_residual().abs())
        .collect();
    let median_jump = median(&mut reliable);
    let default_phi;
    let phi = match phi {
        Some(p) => p,
        None => {
            default_phi = default_test_field(mesh);
            &default_phi
        }
    };
    let generalized = generalized_fb_check(mesh, field, phi, delta, delta)?;
    let res = pde_residuals(energy, field, delta)?;
    Ok(FbReport {
        level_set,
        one_sided,
        jump_residuals,
        median_jump,
        generalized,
        harmonic_residual: res.harmonic,
        interior_residual: res.interior,
        delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{assemble, build_disk_mesh, build_interval_mesh, build_rect_mesh};
    use crate::model::NonlinearityModel;

    fn field_from<F: Fn([f64; 2]) -> f64>(mesh: &Mesh<f64>, f: F) -> Field<f64> {
        let v = mesh
            .vertices()
            .iter()
            .zip(mesh.boundary_mask())
            .map(|(&p, &b)| if b { 0.0 } else { f(p) })
            .collect();
        Field::from_values(mesh, v).unwrap()
    }

    #[test]
    fn one_d_crossing_by_interpolation() {
        let m = build_interval_mesh(5, 1.0f64).unwrap();
        // vertices at 0, .2, .4, .6, .8, 1
        let f = Field::from_values(&m, vec![0.0, 0.2, 0.5, 1.5, 0.4, 0.0]).unwrap();
        let ls = extract_level_set(&m, &f, 1.0).unwrap();
        assert_eq!(ls.len(), 2);
        assert!((ls.segments[0].a[0] - 0.5).abs() < 1e-15);
        assert_eq!(ls.segments[0].a, ls.segments[0].b);
        let (up, down) = ls.adjacent_cells(0);
        for c in [up, down] {
            let vals: Vec<f64> = m.cell(c).iter().map(|&v| f.values()[v]).collect();
            assert!(vals.iter().any(|&v| v > 1.0) && vals.iter().any(|&v| v < 1.0));
        }
    }

    #[test]
    fn zero_field_has_empty_level_set() {
        let m = build_rect_mesh(4, 4, 1.0f64, 1.0).unwrap();
        let ls = extract_level_set(&m, &Field::zeros(&m), 1.0).unwrap();
        assert!(ls.is_empty());
        assert_eq!(ls.degenerate_nodes, 0);
    }

    #[test]
    fn exact_level_values_are_nudged_and_counted() {
        let m = build_interval_mesh(4, 1.0f64).unwrap();
        let f = Field::from_values(&m, vec![0.0, 1.0, 1.0, 0.5, 0.0]).unwrap();
        let ls = extract_level_set(&m, &f, 1.0).unwrap();
        assert_eq!(ls.degenerate_nodes, 2);
        assert_eq!(ls.degenerate_cells, 1);
        // the nudged plateau crosses once on each side
        assert_eq!(ls.len(), 2);
    }

    #[test]
    fn segment_endpoints_interpolate_the_level() {
        let m = build_rect_mesh(8, 8, 1.0f64, 1.0).unwrap();
        let f = field_from(&m, |p| 4.0 * (p[0] * (1.0 - p[0]) + p[1] * (1.0 - p[1])));
        let ls = extract_level_set(&m, &f, 1.0).unwrap();
        assert!(!ls.is_empty());
        for s in &ls.segments {
            for p in [s.a, s.b] {
                let l = m.barycentric(s.cell, p);
                let val: f64 = m.cell(s.cell).iter().zip(l).map(|(&v, w)| w * f.values()[v]).sum();
                assert!((val - 1.0).abs() < 1e-12);
                assert!(l.iter().all(|&w| w > -1e-12));
                // on an edge: one barycentric coordinate vanishes
                assert!(l.iter().any(|w| w.abs() < 1e-12));
            }
        }
        // closed curves on this mesh have an even number of pieces
        assert_eq!(ls.len() % 2, 0);
    }

    #[test]
    fn radial_level_set_length() {
        let m = build_disk_mesh(32, 1.0f64).unwrap();
        let o = oracle_radial(100.0, 1.0).unwrap();
        let rho = o.rho_unstable;
        let f = field_from(&m, |p| o.value(rho, (p[0] * p[0] + p[1] * p[1]).sqrt()));
        let ls = extract_level_set(&m, &f, 1.0).unwrap();
        let len = ls.total_length();
        let exact = 2.0 * std::f64::consts::PI * rho;
        assert!((len - exact).abs() < 0.05 * exact, "{len} vs {exact}");
    }

    #[test]
    fn linear_field_has_no_jump() {
        // u = 1 + a (x - ½) away from the boundary: equal slopes on both sides
        let m = build_interval_mesh(64, 1.0f64).unwrap();
        let f = field_from(&m, |p| 1.0 + 0.9 * (p[0] - 0.5));
        let ls = extract_level_set(&m, &f, 1.0).unwrap();
        // the second crossing is the drop to the boundary value
        assert_eq!(ls.len(), 2);
        let i = (0..2).find(|&i| (ls.segments[i].a[0] - 0.5).abs() < 1e-12).unwrap();
        let os = one_sided_gradients(&m, &f, &ls, 1e-3).unwrap();
        assert!(os[i].reliable);
        assert!((os[i].jump_residual() + 2.0).abs() < 1e-10);
    }

    #[test]
    fn one_d_exact_solution_jump_within_order_h() {
        let o = oracle_1d(60.0f64).unwrap();
        let mut errs = Vec::new();
        for n in [256, 512, 1024] {
            let m = build_interval_mesh(n, 1.0).unwrap();
            let f = field_from(&m, |p| o.value(o.a_stable, p[0]));
            let ls = extract_level_set(&m, &f, 1.0).unwrap();
            assert_eq!(ls.len(), 2);
            let os = one_sided_gradients(&m, &f, &ls, 1e-6).unwrap();
            let e = os.iter().map(|s| s.jump_residual().abs()).fold(0.0, f64::max);
            assert!(os.iter().all(|s| s.reliable));
            errs.push(e);
        }
        // sampled up to 1.5 cells away: |Δ|u'|²| <= 2 |u'| λ 1.5 h
        let slope = 0.5 * 60.0 * (1.0 - 2.0 * o.a_stable);
        for (e, n) in errs.iter().zip([256.0, 512.0, 1024.0]) {
            assert!(*e < 3.0 * slope * 60.0 / n, "{errs:?}");
        }
        assert!(errs[0] / errs[1] > 1.5 && errs[1] / errs[2] > 1.5, "{errs:?}");
    }

    #[test]
    fn one_sided_rejects_nonpositive_delta() {
        let m = build_interval_mesh(4, 1.0f64).unwrap();
        let f = Field::zeros(&m);
        let ls = extract_level_set(&m, &f, 1.0).unwrap();
        assert!(one_sided_gradients(&m, &f, &ls, 0.0).is_err());
    }

    #[test]
    fn generalized_check_below_one_is_zero() {
        let m = build_rect_mesh(8, 8, 1.0f64, 1.0).unwrap();
        let f = field_from(&m, |p| 0.5 * p[0]);
        let phi = default_test_field(&m);
        let g = generalized_fb_check(&m, &f, &phi, 0.1, 0.1).unwrap();
        assert_eq!(g.value, 0.0);
        assert!(g.empty);
    }

    #[test]
    fn generalized_check_on_one_d_oracle_decreases() {
        let o = oracle_1d(60.0f64).unwrap();
        let m = build_interval_mesh(1024, 1.0).unwrap();
        let f = field_from(&m, |p| o.value(o.a_stable, p[0]));
        // bump around the left crossing
        let phi: Vec<[f64; 2]> = m
            .vertices()
            .iter()
            .map(|p| {
                let t = (p[0] - 0.06) / 0.055;
                [if t.abs() < 1.0 { (1.0 - t * t).powi(2) } else { 0.0 }, 0.0]
            })
            .collect();
        let (mut dp, mut dm) = (0.8, 0.4);
        for _ in 0..3 {
            let g = generalized_fb_check(&m, &f, &phi, dp, dm).unwrap();
            let half = generalized_fb_check(&m, &f, &phi, 0.5 * dp, 0.5 * dm).unwrap();
            assert!((g.value_half - half.value).abs() < 1e-12);
            assert!(g.value.abs() / half.value.abs() > 1.2, "{} {}", g.value, half.value);
            dp *= 0.5;
            dm *= 0.5;
        }
    }

    #[test]
    fn harmonic_residual_vanishes_on_discrete_harmonic_patch() {
        let m = build_rect_mesh(16, 16, 1.0f64, 1.0).unwrap();
        let forms = assemble(&m).unwrap();
        let e = Energy::new(&m, &forms, NonlinearityModel::prandtl_batchelor(), 1.0).unwrap();
        // a linear field inside, shielded from the boundary by a ring above 1
        let f = field_from(&m, |p| {
            let d = p[0].min(1.0 - p[0]).min(p[1]).min(1.0 - p[1]);
            if d < 0.1 {
                2.0
            } else {
                0.2 + 0.3 * p[0] + 0.1 * p[1]
            }
        });
        let r = pde_residuals(&e, &f, 0.05).unwrap();
        assert!(r.harmonic < 1e-10, "{}", r.harmonic);
        let zero = pde_residuals(&e, &Field::zeros(&m), 0.05).unwrap();
        assert_eq!(zero.harmonic, 0.0);
        assert_eq!(zero.interior, 0.0);
    }

    #[test]
    fn report_csv_has_one_row_per_segment() {
        let m = build_rect_mesh(8, 8, 1.0f64, 1.0).unwrap();
        let forms = assemble(&m).unwrap();
        let e = Energy::new(&m, &forms, NonlinearityModel::prandtl_batchelor(), 10.0).unwrap();
        let f = field_from(&m, |p| 8.0 * p[0] * (1.0 - p[0]) * 4.0 * p[1] * (1.0 - p[1]));
        let rep = fb_report(&e, &f, 0.05, None).unwrap();
        let mut out = Vec::new();
        rep.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "seg_id,x0,y0,x1,y1,gplus_sq,gminus_sq,jump_residual,reliable");
        assert_eq!(lines.len(), rep.level_set.len() + 1);
        assert!(rep.jump_residuals.iter().all(|v| v.is_finite()));
        assert!(rep.generalized.value.is_finite());
    }
}
