//! Discrete energies and their gradients.
//!
//! The Dirichlet part is `½ uᵀ K u`; every nonlinear term is integrated with
//! the lumped vertex weights, so each energy is a nodal sum and the gradient
//! is its exact derivative.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::mesh::{AssembledForms, Mesh};
use crate::model::{NonlinearityModel, Smoother};
use crate::scalar::Real;

const BOUNDARY_SLACK: f64 = 1e-14;

/// Nodal values of a P1 function vanishing on the Dirichlet vertices.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<T> {
    values: Vec<T>,
    mesh_id: u64,
}

impl<T: Real> Field<T> {
    pub fn zeros(mesh: &Mesh<T>) -> Self {
        Self {
            values: vec![T::zero(); mesh.n_vertices()],
            mesh_id: mesh.id(),
        }
    }

    /// Validates length and finiteness; boundary values within `1e-14` of
    /// zero are clamped, larger ones are rejected.
    pub fn from_values(mesh: &Mesh<T>, mut values: Vec<T>) -> Result<Self> {
        if values.len() != mesh.n_vertices() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values but the mesh has {} vertices",
                values.len(),
                mesh.n_vertices()
            )));
        }
        for (i, v) in values.iter_mut().enumerate() {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!("non-finite value at vertex {i}")));
            }
            if mesh.boundary_mask()[i] {
                if v.abs() > T::lit(BOUNDARY_SLACK) {
                    return Err(Error::InvalidArgument(format!(
                        "boundary vertex {i} has value {v}, expected 0"
                    )));
                }
                *v = T::zero();
            }
        }
        Ok(Self {
            values,
            mesh_id: mesh.id(),
        })
    }

    /// Builds a field from nodal values, forcing the boundary entries to 0.
    pub fn from_values_clamped(mesh: &Mesh<T>, mut values: Vec<T>) -> Self {
        assert_eq!(values.len(), mesh.n_vertices());
        for (v, &b) in values.iter_mut().zip(mesh.boundary_mask()) {
            if b {
                *v = T::zero();
            }
        }
        Self {
            values,
            mesh_id: mesh.id(),
        }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn mesh_id(&self) -> u64 {
        self.mesh_id
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn max(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    pub fn write_csv<W: Write>(&self, w: &mut W) -> Result<()> {
        writeln!(w, "vertex_id,value")?;
        for (i, v) in self.values.iter().enumerate() {
            writeln!(w, "{},{}", i, v.to_f64_lossy())?;
        }
        Ok(())
    }

    /// Reads a `vertex_id,value` table written by [`Field::write_csv`].
    pub fn read_csv<R: BufRead>(mesh: &Mesh<T>, r: R, path: &str) -> Result<Self> {
        let bad = |msg: String| Error::Format {
            path: path.to_string(),
            msg,
        };
        let mut lines = r.lines();
        match lines.next() {
            Some(Ok(h)) if h.trim() == "vertex_id,value" => {}
            _ => return Err(bad("missing header `vertex_id,value`".into())),
        }
        let mut values = Vec::with_capacity(mesh.n_vertices());
        for (k, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let (id, val) = line
                .split_once(',')
                .ok_or_else(|| bad(format!("line {}: expected two columns", k + 2)))?;
            let id: usize = id
                .trim()
                .parse()
                .map_err(|_| bad(format!("line {}: bad vertex id", k + 2)))?;
            if id != values.len() {
                return Err(bad(format!("line {}: vertex ids must be consecutive", k + 2)));
            }
            let v: f64 = val
                .trim()
                .parse()
                .map_err(|_| bad(format!("line {}: bad value", k + 2)))?;
            values.push(T::lit(v));
        }
        Field::from_values(mesh, values).map_err(|e| bad(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyBreakdown<T> {
    pub dirichlet: T,
    pub phase: T,
    pub potential: T,
    pub total: T,
}

impl<T: Real> EnergyBreakdown<T> {
    fn new(dirichlet: T, phase: T, potential: T) -> Self {
        Self {
            dirichlet,
            phase,
            potential,
            total: dirichlet + phase - potential,
        }
    }
}

/// Energy functionals for fixed `(mesh, λ, g)`.
#[derive(Debug, Clone, Copy)]
pub struct Energy<'a, T> {
    mesh: &'a Mesh<T>,
    forms: &'a AssembledForms<T>,
    model: NonlinearityModel<T>,
    lambda: T,
}

impl<'a, T: Real> Energy<'a, T> {
    pub fn new(
        mesh: &'a Mesh<T>,
        forms: &'a AssembledForms<T>,
        model: NonlinearityModel<T>,
        lambda: T,
    ) -> Result<Self> {
        if forms.mesh_id() != mesh.id() {
            return Err(Error::MeshMismatch {
                field: mesh.id(),
                forms: forms.mesh_id(),
            });
        }
        if !(lambda >= T::zero() && lambda.is_finite()) {
            return Err(Error::InvalidArgument(format!("lambda must be >= 0, got {lambda}")));
        }
        Ok(Self {
            mesh,
            forms,
            model,
            lambda,
        })
    }

    pub fn mesh(&self) -> &'a Mesh<T> {
        self.mesh
    }

    pub fn forms(&self) -> &'a AssembledForms<T> {
        self.forms
    }

    pub fn model(&self) -> &NonlinearityModel<T> {
        &self.model
    }

    pub fn lambda(&self) -> T {
        self.lambda
    }

    pub fn smoother(&self, eps: T) -> Result<Smoother<T>> {
        Smoother::new(self.model, eps)
    }

    fn check(&self, f: &Field<T>) -> Result<()> {
        if f.mesh_id() != self.mesh.id() {
            return Err(Error::MeshMismatch {
                field: f.mesh_id(),
                forms: self.forms.mesh_id(),
            });
        }
        Ok(())
    }

    /// `∫ ½|∇u|² + χ{u>1} - λ G((u-1)+)`
    pub fn j(&self, u: &Field<T>) -> Result<EnergyBreakdown<T>> {
        self.check(u)?;
        Ok(self.j_values(u.values()))
    }

    pub fn j_values(&self, u: &[T]) -> EnergyBreakdown<T> {
        let m = self.forms.lumped_mass();
        let mut phase = T::zero();
        let mut potential = T::zero();
        for (i, &ui) in u.iter().enumerate() {
            if ui > T::one() {
                phase = phase + m[i];
                potential = potential + m[i] * self.model.big_g(self.mesh.vertex(i), ui - T::one());
            }
        }
        let dirichlet = T::lit(0.5) * self.forms.stiffness().quad_form(u);
        EnergyBreakdown::new(dirichlet, phase, self.lambda * potential)
    }

    /// `∫ ½|∇u|² + B((u-1)/ε) - λ G_ε((u-1)+)`
    pub fn j_eps(&self, u: &Field<T>, sm: &Smoother<T>) -> Result<EnergyBreakdown<T>> {
        self.check(u)?;
        Ok(self.eval(u.values(), sm, None, None))
    }

    pub fn grad_j_eps(&self, u: &Field<T>, sm: &Smoother<T>) -> Result<Field<T>> {
        self.check(u)?;
        let mut g = vec![T::zero(); u.len()];
        self.eval(u.values(), sm, None, Some(&mut g));
        Ok(Field {
            values: g,
            mesh_id: u.mesh_id(),
        })
    }

    /// Energy with both nonlinearities frozen above the nodal `cap`.
    pub fn j_tilde(
        &self,
        u: &Field<T>,
        sm: &Smoother<T>,
        cap: &Field<T>,
    ) -> Result<EnergyBreakdown<T>> {
        self.check(u)?;
        self.check(cap)?;
        Ok(self.eval(u.values(), sm, Some(cap.values()), None))
    }

    pub fn grad_j_tilde(&self, u: &Field<T>, sm: &Smoother<T>, cap: &Field<T>) -> Result<Field<T>> {
        self.check(u)?;
        self.check(cap)?;
        let mut g = vec![T::zero(); u.len()];
        self.eval(u.values(), sm, Some(cap.values()), Some(&mut g));
        Ok(Field {
            values: g,
            mesh_id: u.mesh_id(),
        })
    }

    /// Energy of `J_ε` (`cap = None`) or of the truncated energy, and
    /// optionally its gradient with zero Dirichlet rows.
    pub fn eval(
        &self,
        u: &[T],
        sm: &Smoother<T>,
        cap: Option<&[T]>,
        grad: Option<&mut [T]>,
    ) -> EnergyBreakdown<T> {
        let one = T::one();
        let m = self.forms.lumped_mass();
        let mask = self.mesh.boundary_mask();
        let k = self.forms.stiffness();
        let mut phase = T::zero();
        let mut potential = T::zero();
        let mut dirichlet = T::zero();
        let mut grad = grad;
        for i in 0..u.len() {
            let ui = u[i];
            let ku: T = k.row(i).map(|(j, v)| v * u[j]).sum();
            dirichlet = dirichlet + ui * ku;
            let (b, g_big, db, dg) = match cap {
                Some(c) if ui > c[i] => {
                    let ci = c[i];
                    let beta_c = sm.phase_derivative(ci);
                    let g_c = sm.g_eps((ci - one).max(T::zero()));
                    let d = ui - ci;
                    (
                        sm.phase(ci) + d * beta_c,
                        sm.big_g_eps((ci - one).max(T::zero())) + d * g_c,
                        beta_c,
                        g_c,
                    )
                }
                _ => {
                    let s = (ui - one).max(T::zero());
                    let want_grad = grad.is_some();
                    (
                        sm.phase(ui),
                        sm.big_g_eps(s),
                        if want_grad { sm.phase_derivative(ui) } else { T::zero() },
                        if want_grad { sm.g_eps(s) } else { T::zero() },
                    )
                }
            };
            phase = phase + m[i] * b;
            potential = potential + m[i] * g_big;
            if let Some(g) = grad.as_deref_mut() {
                g[i] = if mask[i] {
                    T::zero()
                } else {
                    ku + m[i] * (db - self.lambda * dg)
                };
            }
        }
        EnergyBreakdown::new(T::lit(0.5) * dirichlet, phase, self.lambda * potential)
    }

    /// Diagonal of the Hessian of the nodal terms, `m_i ψ_i''(u_i)`, zero on
    /// Dirichlet vertices. The full Hessian is the stiffness plus this
    /// diagonal. Above the cap both terms are linear.
    pub fn curvature(&self, u: &[T], sm: &Smoother<T>, cap: Option<&[T]>) -> Vec<T> {
        let m = self.forms.lumped_mass();
        let mask = self.mesh.boundary_mask();
        (0..u.len())
            .map(|i| {
                let above = cap.map_or(false, |c| u[i] > c[i]);
                if mask[i] || above {
                    return T::zero();
                }
                let s = (u[i] - T::one()).max(T::zero());
                m[i] * (sm.phase_curvature(u[i]) - self.lambda * sm.g_eps_derivative(s))
            })
            .collect()
    }

    /// Lumped measure of the vertices where `pred(u_i)` holds.
    pub fn nodal_measure<F: Fn(T) -> bool>(&self, u: &[T], pred: F) -> T {
        u.iter()
            .zip(self.forms.lumped_mass())
            .filter(|(&v, _)| pred(v))
            .map(|(_, &w)| w)
            .sum()
    }

    /// Largest element gradient magnitude of the P1 interpolant.
    pub fn max_gradient(&self, u: &[T]) -> T {
        (0..self.mesh.n_cells())
            .map(|k| {
                let g = self.mesh.cell_gradient(k, u);
                (g[0] * g[0] + g[1] * g[1]).sqrt()
            })
            .fold(T::zero(), T::max)
    }

    /// `‖r‖_{M⁻¹}` over interior vertices.
    pub fn dual_norm(&self, r: &[T]) -> T {
        self.forms.dual_norm(r)
    }
}
