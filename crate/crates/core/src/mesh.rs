//! Simplicial meshes (intervals and triangles) and P1 assembly.

use std::collections::HashMap;
use std::io::Write;
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::sparse::{CsrMatrix, SkylineCholesky};

static NEXT_MESH_ID: AtomicU64 = AtomicU64::new(1);

/// How the mesh was generated. Used to build domain-aware initial guesses.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain<T> {
    Interval { length: T },
    Rect { lx: T, ly: T },
    Disk { radius: T },
    Custom,
}

#[derive(Debug, Clone)]
pub struct Mesh<T> {
    id: u64,
    dim: usize,
    domain: Domain<T>,
    vertices: Vec<[T; 2]>,
    cells: Vec<[usize; 3]>,
    boundary_mask: Vec<bool>,
    cell_measures: Vec<T>,
    omega: T,
}

impl<T: Real> Mesh<T> {
    /// Builds a mesh from raw parts. In 1D only the first coordinate and the
    /// first two cell indices are used. Triangles are reoriented
    /// counter-clockwise. Degenerate cells are accepted here and reported by
    /// [`assemble`].
    pub fn new(
        dim: usize,
        vertices: Vec<[T; 2]>,
        cells: Vec<[usize; 3]>,
        boundary_mask: Vec<bool>,
    ) -> Result<Self> {
        let measures = Self::check_and_measure(dim, &vertices, &cells, &boundary_mask)?;
        let omega = measures.iter().copied().sum();
        Self::from_parts(dim, Domain::Custom, vertices, cells, boundary_mask, omega)
    }

    fn from_parts(
        dim: usize,
        domain: Domain<T>,
        vertices: Vec<[T; 2]>,
        mut cells: Vec<[usize; 3]>,
        boundary_mask: Vec<bool>,
        omega: T,
    ) -> Result<Self> {
        Self::check_and_measure(dim, &vertices, &cells, &boundary_mask)?;
        if dim == 2 {
            for c in cells.iter_mut() {
                if signed_area(&vertices, c) < T::zero() {
                    c.swap(1, 2);
                }
            }
        }
        let cell_measures = cells
            .iter()
            .map(|c| cell_measure(dim, &vertices, c))
            .collect();
        Ok(Self {
            id: NEXT_MESH_ID.fetch_add(1, Ordering::Relaxed),
            dim,
            domain,
            vertices,
            cells,
            boundary_mask,
            cell_measures,
            omega,
        })
    }

    fn check_and_measure(
        dim: usize,
        vertices: &[[T; 2]],
        cells: &[[usize; 3]],
        boundary_mask: &[bool],
    ) -> Result<Vec<T>> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidArgument(format!("dimension {dim} not supported")));
        }
        if boundary_mask.len() != vertices.len() {
            return Err(Error::InvalidArgument(
                "boundary mask length differs from vertex count".into(),
            ));
        }
        for (k, c) in cells.iter().enumerate() {
            if c[..=dim].iter().any(|&v| v >= vertices.len()) {
                return Err(Error::InvalidArgument(format!(
                    "cell {k} references a missing vertex"
                )));
            }
        }
        Ok(cells.iter().map(|c| cell_measure(dim, vertices, c)).collect())
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn domain(&self) -> Domain<T> {
        self.domain
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn vertices(&self) -> &[[T; 2]] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> [T; 2] {
        self.vertices[i]
    }

    /// Vertex indices of cell `k` (two in 1D, three in 2D).
    pub fn cell(&self, k: usize) -> &[usize] {
        &self.cells[k][..=self.dim]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary_mask
    }

    pub fn cell_measures(&self) -> &[T] {
        &self.cell_measures
    }

    /// Measure of the discrete domain (the polygon for disks).
    pub fn omega_measure(&self) -> T {
        self.omega
    }

    pub fn centroid(&self, k: usize) -> [T; 2] {
        let c = self.cell(k);
        let w = T::one() / T::from_usize_lossy(c.len());
        let mut p = [T::zero(); 2];
        for &v in c {
            p[0] = p[0] + self.vertices[v][0] * w;
            p[1] = p[1] + self.vertices[v][1] * w;
        }
        p
    }

    /// Gradients of the P1 hat functions of cell `k`, one per local vertex.
    pub fn basis_gradients(&self, k: usize) -> [[T; 2]; 3] {
        let c = self.cells[k];
        let x = &self.vertices;
        if self.dim == 1 {
            let h = x[c[1]][0] - x[c[0]][0];
            let inv = T::one() / h;
            return [[-inv, T::zero()], [inv, T::zero()], [T::zero(); 2]];
        }
        let (p0, p1, p2) = (x[c[0]], x[c[1]], x[c[2]]);
        let two_a = (p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]);
        let inv = T::one() / two_a;
        [
            [(p1[1] - p2[1]) * inv, (p2[0] - p1[0]) * inv],
            [(p2[1] - p0[1]) * inv, (p0[0] - p2[0]) * inv],
            [(p0[1] - p1[1]) * inv, (p1[0] - p0[0]) * inv],
        ]
    }

    /// Constant gradient of the P1 interpolant of `values` on cell `k`.
    pub fn cell_gradient(&self, k: usize, values: &[T]) -> [T; 2] {
        let g = self.basis_gradients(k);
        let mut out = [T::zero(); 2];
        for (a, &v) in self.cell(k).iter().enumerate() {
            out[0] = out[0] + g[a][0] * values[v];
            out[1] = out[1] + g[a][1] * values[v];
        }
        out
    }

    /// Barycentric coordinates of `p` with respect to cell `k`.
    pub fn barycentric(&self, k: usize, p: [T; 2]) -> [T; 3] {
        let c = self.cells[k];
        let x = &self.vertices;
        if self.dim == 1 {
            let t = (p[0] - x[c[0]][0]) / (x[c[1]][0] - x[c[0]][0]);
            return [T::one() - t, t, T::zero()];
        }
        let g = self.basis_gradients(k);
        let mut l = [T::zero(); 3];
        for a in 0..3 {
            let v = x[c[a]];
            // λ_a(p) = 1 at vertex a, linear with gradient g[a]
            l[a] = T::one() + g[a][0] * (p[0] - v[0]) + g[a][1] * (p[1] - v[1]);
        }
        l
    }

    /// For every cell, the neighbor across the facet opposite each local
    /// vertex (`None` on the boundary).
    pub fn cell_neighbors(&self) -> Vec<[Option<usize>; 3]> {
        let mut facets: HashMap<Vec<usize>, Vec<(usize, usize)>> = HashMap::new();
        for k in 0..self.n_cells() {
            let c = self.cell(k);
            for a in 0..c.len() {
                let mut f: Vec<usize> = c
                    .iter()
                    .enumerate()
                    .filter(|&(b, _)| b != a)
                    .map(|(_, &v)| v)
                    .collect();
                f.sort_unstable();
                facets.entry(f).or_default().push((k, a));
            }
        }
        let mut out = vec![[None; 3]; self.n_cells()];
        for owners in facets.values() {
            if owners.len() == 2 {
                let (k0, a0) = owners[0];
                let (k1, a1) = owners[1];
                out[k0][a0] = Some(k1);
                out[k1][a1] = Some(k0);
            }
        }
        out
    }

    /// Vertices lying on facets that belong to exactly one cell.
    pub fn topological_boundary(&self) -> Vec<usize> {
        let nb = self.cell_neighbors();
        let mut on = vec![false; self.n_vertices()];
        for k in 0..self.n_cells() {
            let c = self.cell(k);
            for a in 0..c.len() {
                if nb[k][a].is_none() {
                    for (b, &v) in c.iter().enumerate() {
                        if b != a {
                            on[v] = true;
                        }
                    }
                }
            }
        }
        (0..self.n_vertices()).filter(|&v| on[v]).collect()
    }

    /// Vertex adjacency through shared cells (without the vertex itself).
    pub fn vertex_neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_vertices()];
        for k in 0..self.n_cells() {
            let c = self.cell(k);
            for &a in c {
                for &b in c {
                    if a != b {
                        adj[a].push(b);
                    }
                }
            }
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
            a.dedup();
        }
        adj
    }

    /// Writes the two CSV tables `vertex_id,x,y,boundary` and
    /// `cell_id,v0,v1,v2`.
    pub fn write_csv<W: Write>(&self, vertices: &mut W, cells: &mut W) -> Result<()> {
        writeln!(vertices, "vertex_id,x,y,boundary")?;
        for (i, v) in self.vertices.iter().enumerate() {
            writeln!(
                vertices,
                "{},{},{},{}",
                i,
                v[0].to_f64_lossy(),
                v[1].to_f64_lossy(),
                u8::from(self.boundary_mask[i])
            )?;
        }
        writeln!(cells, "cell_id,v0,v1,v2")?;
        for k in 0..self.n_cells() {
            let c = self.cell(k);
            if self.dim == 1 {
                writeln!(cells, "{},{},{},", k, c[0], c[1])?;
            } else {
                writeln!(cells, "{},{},{},{}", k, c[0], c[1], c[2])?;
            }
        }
        Ok(())
    }
}

fn signed_area<T: Real>(x: &[[T; 2]], c: &[usize; 3]) -> T {
    let (p0, p1, p2) = (x[c[0]], x[c[1]], x[c[2]]);
    ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1])) * T::lit(0.5)
}

fn cell_measure<T: Real>(dim: usize, x: &[[T; 2]], c: &[usize; 3]) -> T {
    if dim == 1 {
        (x[c[1]][0] - x[c[0]][0]).abs()
    } else {
        signed_area(x, c).abs()
    }
}

/// Uniform mesh of `(0, length)` with `n_cells` intervals.
pub fn build_interval_mesh<T: Real>(n_cells: usize, length: T) -> Result<Mesh<T>> {
    if n_cells < 2 {
        return Err(Error::InvalidArgument(format!(
            "interval mesh needs at least 2 cells, got {n_cells}"
        )));
    }
    if !(length > T::zero()) {
        return Err(Error::InvalidArgument("interval length must be positive".into()));
    }
    let h = length / T::from_usize_lossy(n_cells);
    let mut vertices: Vec<[T; 2]> = (0..=n_cells)
        .map(|i| [T::from_usize_lossy(i) * h, T::zero()])
        .collect();
    vertices[n_cells][0] = length;
    let cells = (0..n_cells).map(|i| [i, i + 1, 0]).collect();
    let mut mask = vec![false; n_cells + 1];
    mask[0] = true;
    mask[n_cells] = true;
    Mesh::from_parts(1, Domain::Interval { length }, vertices, cells, mask, length)
}

/// Structured triangulation of `(0, lx) x (0, ly)`: every grid square is cut
/// along its `(i, j) -> (i+1, j+1)` diagonal.
pub fn build_rect_mesh<T: Real>(nx: usize, ny: usize, lx: T, ly: T) -> Result<Mesh<T>> {
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidArgument(format!(
            "rectangle mesh needs nx, ny >= 2, got {nx} x {ny}"
        )));
    }
    if !(lx > T::zero() && ly > T::zero()) {
        return Err(Error::InvalidArgument("rectangle sides must be positive".into()));
    }
    let (hx, hy) = (lx / T::from_usize_lossy(nx), ly / T::from_usize_lossy(ny));
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    let mut mask = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let x = if i == nx { lx } else { T::from_usize_lossy(i) * hx };
            let y = if j == ny { ly } else { T::from_usize_lossy(j) * hy };
            vertices.push([x, y]);
            mask.push(i == 0 || j == 0 || i == nx || j == ny);
        }
    }
    let mut cells = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            cells.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            cells.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh::from_parts(2, Domain::Rect { lx, ly }, vertices, cells, mask, lx * ly)
}

/// Disk of radius `radius` approximated by concentric rings: ring `k` carries
/// `6k` equally spaced vertices at radius `k * radius / n_rings`. The domain
/// measure is the area of the outer `6 n_rings`-gon.
pub fn build_disk_mesh<T: Real>(n_rings: usize, radius: T) -> Result<Mesh<T>> {
    if n_rings < 2 {
        return Err(Error::InvalidArgument(format!(
            "disk mesh needs at least 2 rings, got {n_rings}"
        )));
    }
    if !(radius > T::zero()) {
        return Err(Error::InvalidArgument("disk radius must be positive".into()));
    }
    let two_pi = T::lit(std::f64::consts::TAU);
    let mut vertices = vec![[T::zero(), T::zero()]];
    let mut ring_start = vec![0usize];
    for k in 1..=n_rings {
        ring_start.push(vertices.len());
        let r = radius * T::from_usize_lossy(k) / T::from_usize_lossy(n_rings);
        let count = 6 * k;
        for j in 0..count {
            let th = two_pi * T::from_usize_lossy(j) / T::from_usize_lossy(count);
            vertices.push([r * th.cos(), r * th.sin()]);
        }
    }
    let mut mask = vec![false; vertices.len()];
    for m in mask.iter_mut().skip(ring_start[n_rings]) {
        *m = true;
    }
    let mut cells = Vec::new();
    for j in 0..6 {
        cells.push([0, ring_start[1] + j, ring_start[1] + (j + 1) % 6]);
    }
    for k in 2..=n_rings {
        let (a, b) = (6 * (k - 1), 6 * k);
        let (sa, sb) = (ring_start[k - 1], ring_start[k]);
        let (mut i, mut j) = (0usize, 0usize);
        while i < a || j < b {
            // advance along whichever ring has the smaller next angle;
            // compare i+1 / a against j+1 / b exactly in integers
            let advance_outer = i == a || (j < b && (j + 1) * a <= (i + 1) * b);
            if advance_outer {
                cells.push([sa + i % a, sb + j % b, sb + (j + 1) % b]);
                j += 1;
            } else {
                cells.push([sa + i % a, sa + (i + 1) % a, sb + j % b]);
                i += 1;
            }
        }
    }
    let sides = T::from_usize_lossy(6 * n_rings);
    let omega = T::lit(0.5) * sides * radius * radius * (two_pi / sides).sin();
    Mesh::from_parts(2, Domain::Disk { radius }, vertices, cells, mask, omega)
}

/// P1 stiffness, lumped mass and interior numbering of a mesh, plus the
/// Cholesky factor of the interior stiffness block used as the H¹₀ Riesz map.
#[derive(Debug, Clone)]
pub struct AssembledForms<T> {
    mesh_id: u64,
    stiffness: CsrMatrix<T>,
    lumped_mass: Vec<T>,
    interior_index: Vec<usize>,
    riesz: SkylineCholesky<T>,
}

impl<T: Real> AssembledForms<T> {
    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }

    pub fn stiffness(&self) -> &CsrMatrix<T> {
        &self.stiffness
    }

    pub fn lumped_mass(&self) -> &[T] {
        &self.lumped_mass
    }

    pub fn interior_index(&self) -> &[usize] {
        &self.interior_index
    }

    /// Solves `K_II z = r_I` with zero boundary entries: the H¹₀ representer
    /// of the linear functional `r`.
    pub fn riesz(&self, r: &[T]) -> Vec<T> {
        self.riesz.solve(r)
    }

    pub fn riesz_in_place(&self, r: &mut [T]) {
        self.riesz.solve_in_place(r)
    }

    /// `‖r‖_{M⁻¹}` over interior vertices: the discrete L² size of the nodal
    /// residual.
    pub fn dual_norm(&self, r: &[T]) -> T {
        self.interior_index
            .iter()
            .map(|&i| r[i] * r[i] / self.lumped_mass[i])
            .sum::<T>()
            .sqrt()
    }

    /// Energy norm `sqrt(vᵀ K v)`.
    pub fn h1_norm(&self, v: &[T]) -> T {
        self.stiffness.quad_form(v).max(T::zero()).sqrt()
    }

    /// `aᵀ K b`
    pub fn h1_inner(&self, a: &[T], b: &[T]) -> T {
        let kb = self.stiffness.mul_vec(b);
        crate::scalar::dot(a, &kb)
    }
}

pub fn assemble<T: Real>(mesh: &Mesh<T>) -> Result<AssembledForms<T>> {
    let n = mesh.n_vertices();
    let dim = mesh.dim();
    let mut triplets = Vec::with_capacity(mesh.n_cells() * (dim + 1) * (dim + 1));
    let mut mass = vec![T::zero(); n];
    let share = T::one() / T::from_usize_lossy(dim + 1);
    let tiny = T::epsilon() * mesh.omega_measure();
    for k in 0..mesh.n_cells() {
        let meas = mesh.cell_measures()[k];
        if !(meas > tiny) {
            return Err(Error::AssemblyFailure { cell: k });
        }
        let g = mesh.basis_gradients(k);
        let c = mesh.cell(k);
        for a in 0..c.len() {
            mass[c[a]] = mass[c[a]] + meas * share;
            for b in 0..c.len() {
                let v = meas * (g[a][0] * g[b][0] + g[a][1] * g[b][1]);
                triplets.push((c[a], c[b], v));
            }
        }
    }
    let stiffness = CsrMatrix::from_triplets(n, &triplets);
    let interior_index: Vec<usize> = (0..n).filter(|&i| !mesh.boundary_mask()[i]).collect();
    let riesz = SkylineCholesky::factor(&stiffness, &interior_index)?;
    Ok(AssembledForms {
        mesh_id: mesh.id(),
        stiffness,
        lumped_mass: mass,
        interior_index,
        riesz,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn all_meshes() -> Vec<Mesh<f64>> {
        vec![
            build_interval_mesh(10, 1.0).unwrap(),
            build_rect_mesh(4, 4, 1.0, 1.0).unwrap(),
            build_rect_mesh(3, 2, 3.0, 2.0).unwrap(),
            build_disk_mesh(5, 1.0).unwrap(),
        ]
    }

    #[test]
    fn interval_mesh_examples() {
        let m = build_interval_mesh(4, 1.0).unwrap();
        let xs: Vec<f64> = m.vertices().iter().map(|v| v[0]).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!(m.cell_measures().iter().all(|&h| h == 0.25));

        let m = build_interval_mesh(2, 2.0).unwrap();
        assert_eq!(m.cell_measures().iter().sum::<f64>(), 2.0);

        let m = build_interval_mesh(10, 1.0).unwrap();
        let b: Vec<usize> = (0..11).filter(|&i| m.boundary_mask()[i]).collect();
        assert_eq!(b, vec![0, 10]);

        assert!(matches!(
            build_interval_mesh(1, 1.0f64),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn rect_mesh_examples() {
        assert!(build_rect_mesh(1, 1, 1.0f64, 1.0).is_err());
        assert!(build_rect_mesh(2, 2, 0.0f64, 1.0).is_err());
        let m = build_rect_mesh(2, 2, 1.0, 1.0).unwrap();
        assert_eq!(m.n_vertices(), 9);
        assert_eq!(m.n_cells(), 8);
        assert!((m.cell_measures().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        let m = build_rect_mesh(4, 4, 1.0, 1.0).unwrap();
        assert!((m.cell_measures().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let m = build_rect_mesh(3, 2, 3.0, 2.0).unwrap();
        assert!((m.cell_measures().iter().sum::<f64>() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn disk_mesh_examples() {
        assert!(build_disk_mesh(1, 1.0f64).is_err());
        let m = build_disk_mesh(2, 1.0).unwrap();
        let area: f64 = m.cell_measures().iter().sum();
        assert!(area < std::f64::consts::PI);
        assert!((area - m.omega_measure()).abs() < 1e-12);

        // regular 192-gon inscribed in the unit circle
        let m = build_disk_mesh(32, 1.0).unwrap();
        let oracle = 0.5 * 192.0 * (std::f64::consts::TAU / 192.0).sin();
        assert!((m.omega_measure() - oracle).abs() < 1e-12);
        assert!((m.omega_measure() - std::f64::consts::PI).abs() < 0.01);

        let a1 = build_disk_mesh(4, 1.0f64).unwrap().omega_measure();
        let a2 = build_disk_mesh(4, 2.0).unwrap().omega_measure();
        assert!((a2 - 4.0 * a1).abs() < 1e-12);
    }

    #[test]
    fn mesh_invariants() {
        for m in all_meshes() {
            assert!(m.cell_measures().iter().all(|&a| a > 0.0));
            let total: f64 = m.cell_measures().iter().sum();
            assert!((total - m.omega_measure()).abs() <= 1e-12 * m.omega_measure());
            for v in m.topological_boundary() {
                assert!(m.boundary_mask()[v], "vertex {v} on boundary but unflagged");
            }
        }
    }

    #[test]
    fn disk_boundary_is_exactly_outer_ring() {
        let m = build_disk_mesh(6, 1.0).unwrap();
        let topo = m.topological_boundary();
        let flagged: Vec<usize> = (0..m.n_vertices()).filter(|&v| m.boundary_mask()[v]).collect();
        assert_eq!(topo, flagged);
        assert_eq!(flagged.len(), 36);
    }

    #[test]
    fn two_triangle_square_hand_assembly() {
        let v: Vec<[f64; 2]> = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        // one free vertex so the interior block is nonsingular
        let f = Mesh::new(2, v, vec![[0, 1, 2], [0, 2, 3]], vec![false, true, true, true]).unwrap();
        let forms = assemble(&f).unwrap();
        let k = forms.stiffness();
        #[rustfmt::skip]
        let expected = [
            [ 1.0, -0.5,  0.0, -0.5],
            [-0.5,  1.0, -0.5,  0.0],
            [ 0.0, -0.5,  1.0, -0.5],
            [-0.5,  0.0, -0.5,  1.0],
        ];
        for i in 0..4 {
            for j in 0..4 {
                assert!((k.get(i, j) - expected[i][j]).abs() < 1e-15, "K[{i}][{j}]");
            }
        }
        assert!(k.is_symmetric());
        assert!(k.row_sums().iter().all(|s| s.abs() < 1e-12));
        assert_eq!(f.n_cells(), 2);
    }

    #[test]
    fn interval_stiffness_pattern() {
        let m = build_interval_mesh(2, 1.0).unwrap();
        let forms = assemble(&m).unwrap();
        let k = forms.stiffness();
        assert_eq!(k.get(1, 1), 4.0);
        assert_eq!(k.get(1, 0), -2.0);
        assert_eq!(k.get(1, 2), -2.0);
        assert_eq!(k.get(0, 0), 2.0);
    }

    #[test]
    fn degenerate_cell_fails_assembly() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0], [0.0, 1.0]];
        let m = Mesh::new(2, v, vec![[0, 1, 3], [0, 1, 2]], vec![false, true, true, true]).unwrap();
        assert!(matches!(assemble(&m), Err(Error::AssemblyFailure { cell: 1 })));
    }

    #[test]
    fn assembled_form_invariants() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for m in all_meshes() {
            let f = assemble(&m).unwrap();
            let k = f.stiffness();
            assert!(k.is_symmetric());
            assert!(k.row_sums().iter().all(|s| s.abs() < 1e-12));
            assert!(f.lumped_mass().iter().all(|&w| w > 0.0));
            let total: f64 = f.lumped_mass().iter().sum();
            let cells: f64 = m.cell_measures().iter().sum();
            assert!((total - cells).abs() < 1e-12 * cells);
            for _ in 0..100 {
                let x: Vec<f64> = (0..m.n_vertices()).map(|_| rng.gen_range(-1.0..1.0)).collect();
                assert!(k.quad_form(&x) >= -1e-12);
            }
        }
    }

    #[test]
    fn dirichlet_energy_exact_on_linears() {
        for m in all_meshes() {
            let k = assemble(&m).unwrap();
            let (a, b, c) = (0.7, -1.3, 0.25);
            let v: Vec<f64> = m
                .vertices()
                .iter()
                .map(|p| a * p[0] + if m.dim() == 2 { b * p[1] } else { 0.0 } + c)
                .collect();
            let slope_sq = if m.dim() == 2 { a * a + b * b } else { a * a };
            let energy = 0.5 * k.stiffness().quad_form(&v);
            let exact = 0.5 * slope_sq * m.omega_measure();
            assert!((energy - exact).abs() <= 1e-10 * exact, "{energy} vs {exact}");
        }
    }

    #[test]
    fn riesz_map_inverts_interior_stiffness() {
        let m = build_disk_mesh(4, 1.0).unwrap();
        let f = assemble(&m).unwrap();
        let r: Vec<f64> = (0..m.n_vertices())
            .map(|i| if m.boundary_mask()[i] { 0.0 } else { (i as f64).cos() })
            .collect();
        let z = f.riesz(&r);
        let kz = f.stiffness().mul_vec(&z);
        for &i in f.interior_index() {
            assert!((kz[i] - r[i]).abs() < 1e-12);
        }
        for i in 0..m.n_vertices() {
            if m.boundary_mask()[i] {
                assert_eq!(z[i], 0.0);
            }
        }
    }

    #[test]
    fn csv_export_shapes() {
        let m = build_interval_mesh(2, 1.0f64).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        m.write_csv(&mut a, &mut b).unwrap();
        let cells = String::from_utf8(b).unwrap();
        assert_eq!(cells.lines().next().unwrap(), "cell_id,v0,v1,v2");
        assert_eq!(cells.lines().nth(1).unwrap(), "0,0,1,");
        let verts = String::from_utf8(a).unwrap();
        assert_eq!(verts.lines().nth(1).unwrap(), "0,0,0,1");
    }

    #[test]
    fn works_in_single_precision() {
        let m = build_rect_mesh(4, 4, 1.0f32, 1.0).unwrap();
        let f = assemble(&m).unwrap();
        let total: f32 = f.lumped_mass().iter().sum();
        assert!((total - 1.0).abs() < 1e-5);
    }
}
