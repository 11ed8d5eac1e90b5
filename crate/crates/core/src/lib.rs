//! Minimizer and mountain-pass solutions of the sublinear elliptic free
//! boundary problem
//!
//! ```text
//!   -Δu = λ χ{u>1} g(x, (u-1)+)   in Ω \ F(u)
//!   |∇u⁺|² - |∇u⁻|² = 2           on F(u) = ∂{u > 1}
//!   u = 0                         on ∂Ω
//! ```
//!
//! The nonsmooth energy is approximated by a family of C¹ energies with a
//! smoothing width `eps`. For each `eps` of a decreasing schedule the crate
//! computes a global minimizer and a mountain-pass critical point of a
//! truncated energy, then checks the energy orderings, the ordering
//! `u1 <= u0`, and the free-boundary conditions on the discrete solutions.
//!
//! All numerical code is generic over the floating point type through
//! [`Real`]; the aliases at the crate root fix it to `f64`, which is what the
//! command line front end uses.

pub mod cli;
pub mod energy;
pub mod error;
pub mod freeboundary;
pub mod mesh;
pub mod model;
pub mod quadrature;
pub mod scalar;
pub mod solve;
pub mod sparse;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Mesh64 = mesh::Mesh<f64>;
pub type AssembledForms64 = mesh::AssembledForms<f64>;
pub type Field64 = energy::Field<f64>;
pub type EnergyBreakdown64 = energy::EnergyBreakdown<f64>;
pub type Energy64<'a> = energy::Energy<'a, f64>;
pub type NonlinearityModel64 = model::NonlinearityModel<f64>;
pub type Smoother64 = model::Smoother<f64>;
pub type SolveConfig64 = solve::SolveConfig<f64>;
pub type BranchResult64 = solve::BranchResult<f64>;
pub type Continuation64 = solve::Continuation<f64>;
pub type LevelSet64 = freeboundary::LevelSet<f64>;
pub type FbReport64 = freeboundary::FbReport<f64>;
