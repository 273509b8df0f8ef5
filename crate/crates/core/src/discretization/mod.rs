//! Discrete domains, the Dirichlet Laplacian and the linear algebra built on it.

pub mod eigen;
pub mod grid;
pub mod nodal;
pub mod random;
pub mod solve;

pub use eigen::{smallest_eigenpair, smallest_eigenvalue, EigenEstimate};
pub use grid::{negative_part, positive_part, DomainKey, DomainKind, Field, GridDomain};
pub use nodal::{default_threshold, nodal_domains, NodalReport};
pub use random::random_smooth_field;
pub use solve::{
    cg_solve, cg_solve_capped, stiffness_solve, tridiagonal_solve, LinearSolve, SpdOperator,
};
