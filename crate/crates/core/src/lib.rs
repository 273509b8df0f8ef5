//! Least-energy nodal (sign-changing) solutions of the Schrödinger–Poisson
//! system
//!
//! ```text
//! -Δu + φ_u u = f(u),   -Δφ_u = u²   in Ω ⊂ ℝ³,   u = φ_u = 0 on ∂Ω,
//! ```
//!
//! computed by minimizing the energy over the nodal Nehari set
//! `M = {u : u± ≠ 0, J'(u)u⁺ = J'(u)u⁻ = 0}`, together with a suite of
//! numerical checks of the identities and inequalities the construction
//! relies on.

pub mod cli;
pub mod discretization;
pub mod energy;
pub mod error;
pub mod io;
pub mod minimizer;
pub mod nehari;
pub mod nonlinearity;
pub mod parallel;
pub mod poisson;
pub mod problem;
pub mod verify;

pub use discretization::{DomainKind, Field, GridDomain, NodalReport};
pub use energy::EnergyReport;
pub use error::{Error, Result};
pub use nonlinearity::{Nonlinearity, Reaction};
pub use problem::Problem;
