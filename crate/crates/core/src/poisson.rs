//! The nonlocal potential `φ_u`, solution of `-Δφ = u²` with `φ = 0` on the
//! boundary, and the scalar couplings built from it.

use std::collections::hash_map::DefaultHasher;
use std::collections::VecDeque;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, RwLock};

use crate::discretization::grid::dot;
use crate::discretization::{stiffness_solve, Field, GridDomain};
use crate::error::Result;

pub const DEFAULT_POISSON_TOL: f64 = 1e-10;
const CACHE_CAPACITY: usize = 16;

#[derive(Clone, Debug)]
pub struct PoissonSolveResult {
    pub phi: Field,
    pub residual: f64,
    pub iterations: usize,
}

/// Uncached solve of the discrete `K φ = M u²`.
pub fn solve_phi(d: &GridDomain, u: &Field, tol: f64) -> Result<PoissonSolveResult> {
    d.check(u)?;
    let rhs = density(d, u);
    let sol = stiffness_solve(d, &rhs, tol)?;
    Ok(PoissonSolveResult {
        phi: d.field(sol.x)?,
        residual: sol.residual,
        iterations: sol.iterations,
    })
}

/// `M u²`, the weak right-hand side of the potential equation.
fn density(d: &GridDomain, u: &Field) -> Vec<f64> {
    d.quad_weights()
        .iter()
        .zip(u.values())
        .map(|(w, v)| w * v * v)
        .collect()
}

struct CacheEntry {
    key: u64,
    source: Field,
    result: Arc<PoissonSolveResult>,
}

/// Potential solver bound to one domain, with a small content-addressed
/// cache of recent solves (keyed by the bit pattern of `u`).
pub struct Poisson<'d> {
    domain: &'d GridDomain,
    tol: f64,
    cache: RwLock<VecDeque<CacheEntry>>,
}

impl<'d> Poisson<'d> {
    pub fn new(domain: &'d GridDomain, tol: f64) -> Self {
        Poisson {
            domain,
            tol,
            cache: RwLock::new(VecDeque::with_capacity(CACHE_CAPACITY)),
        }
    }

    pub fn domain(&self) -> &'d GridDomain {
        self.domain
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn solve_phi(&self, u: &Field) -> Result<Arc<PoissonSolveResult>> {
        self.domain.check(u)?;
        let key = field_hash(u);
        if let Ok(cache) = self.cache.read() {
            if let Some(hit) = cache.iter().find(|e| e.key == key && e.source == *u) {
                return Ok(hit.result.clone());
            }
        }
        let result = Arc::new(solve_phi(self.domain, u, self.tol)?);
        if let Ok(mut cache) = self.cache.write() {
            if cache.len() == CACHE_CAPACITY {
                cache.pop_front();
            }
            cache.push_back(CacheEntry {
                key,
                source: u.clone(),
                result: result.clone(),
            });
        }
        Ok(result)
    }

    /// `N(u) = ∫ φ_u u²`.
    pub fn nonlocal_energy(&self, u: &Field) -> Result<f64> {
        if u.is_zero() {
            return Ok(0.0);
        }
        let phi = self.solve_phi(u)?;
        Ok(weighted_triple(
            self.domain,
            phi.phi.values(),
            u.values(),
            u.values(),
        ))
    }

    /// `∫ φ_a b²`.
    pub fn cross_coupling(&self, a: &Field, b: &Field) -> Result<f64> {
        self.domain.check(b)?;
        if a.is_zero() || b.is_zero() {
            return Ok(0.0);
        }
        let phi = self.solve_phi(a)?;
        Ok(weighted_triple(
            self.domain,
            phi.phi.values(),
            b.values(),
            b.values(),
        ))
    }

    /// `∫ |∇φ_u|² = φᵀ K φ`.
    pub fn potential_dirichlet_energy(&self, u: &Field) -> Result<f64> {
        let phi = self.solve_phi(u)?;
        Ok(dot(
            &self.domain.stiffness(phi.phi.values()),
            phi.phi.values(),
        ))
    }

    pub fn clear_cache(&self) {
        if let Ok(mut cache) = self.cache.write() {
            cache.clear();
        }
    }
}

/// `Σ w_i a_i b_i c_i`.
pub(crate) fn weighted_triple(d: &GridDomain, a: &[f64], b: &[f64], c: &[f64]) -> f64 {
    d.quad_weights()
        .iter()
        .zip(a)
        .zip(b.iter().zip(c))
        .map(|((w, x), (y, z))| w * x * y * z)
        .sum()
}

fn field_hash(u: &Field) -> u64 {
    let mut h = DefaultHasher::new();
    for v in u.values() {
        v.to_bits().hash(&mut h);
    }
    h.finish()
}
