use crate::discretization::GridDomain;
use crate::nonlinearity::{Nonlinearity, Reaction};
use crate::poisson::{Poisson, DEFAULT_POISSON_TOL};

/// A discretized instance of `-Δu + φ_u u = f(u)`: domain, reaction term and
/// the (cached) potential solver shared by every evaluation.
pub struct Problem<'a, R: Reaction + ?Sized = Nonlinearity> {
    pub domain: &'a GridDomain,
    pub nl: &'a R,
    pub poisson: Poisson<'a>,
}

impl<'a, R: Reaction + ?Sized> Problem<'a, R> {
    pub fn new(domain: &'a GridDomain, nl: &'a R) -> Self {
        Self::with_tol(domain, nl, DEFAULT_POISSON_TOL)
    }

    pub fn with_tol(domain: &'a GridDomain, nl: &'a R, poisson_tol: f64) -> Self {
        Problem {
            domain,
            nl,
            poisson: Poisson::new(domain, poisson_tol),
        }
    }

    pub fn tol(&self) -> f64 {
        self.poisson.tol()
    }
}
