//! The energy `J(u) = ½‖u‖² + ¼∫φ_u u² − ∫F(u)` and its derivative
//! `J'(u)v = ∫∇u·∇v + ∫φ_u u v − ∫f(u) v`.

use serde::Serialize;

use crate::discretization::grid::dot;
use crate::discretization::{stiffness_solve, Field};
use crate::error::Result;
use crate::nonlinearity::Reaction;
use crate::poisson::weighted_triple;
use crate::problem::Problem;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyReport {
    #[serde(rename = "J")]
    pub j: f64,
    pub norm_sq: f64,
    pub nonlocal: f64,
    pub potential: f64,
    /// `J'(u)u`
    pub nehari_res: f64,
    /// `J'(u)u⁺`
    pub split_res_plus: f64,
    /// `J'(u)u⁻`
    pub split_res_minus: f64,
}

/// Full energy breakdown of `u`.
pub fn energy<R: Reaction + ?Sized>(p: &Problem<'_, R>, u: &Field) -> Result<EnergyReport> {
    let d = p.domain;
    d.check(u)?;
    let ku = d.stiffness(u.values());
    let norm_sq = dot(&ku, u.values());
    let phi = if u.is_zero() {
        d.zeros()
    } else {
        p.poisson.solve_phi(u)?.phi.clone()
    };
    let nonlocal = weighted_triple(d, phi.values(), u.values(), u.values());
    let potential = d.integrate_map(u, |s| p.nl.primitive(s))?;
    let r = covector_from_parts(p, u, &ku, phi.values());
    let (mut plus, mut minus) = (0.0, 0.0);
    for (ri, &ui) in r.iter().zip(u.values()) {
        if ui > 0.0 {
            plus += ri * ui;
        } else if ui < 0.0 {
            minus += ri * ui;
        }
    }
    Ok(EnergyReport {
        j: 0.5 * norm_sq + 0.25 * nonlocal - potential,
        norm_sq,
        nonlocal,
        potential,
        nehari_res: dot(&r, u.values()),
        split_res_plus: plus,
        split_res_minus: minus,
    })
}

pub fn energy_value<R: Reaction + ?Sized>(p: &Problem<'_, R>, u: &Field) -> Result<f64> {
    Ok(energy(p, u)?.j)
}

/// `r_i = J'(u) e_i` for every nodal basis function `e_i`, so that
/// `J'(u)v = rᵀ v`.
pub fn residual_covector<R: Reaction + ?Sized>(p: &Problem<'_, R>, u: &Field) -> Result<Vec<f64>> {
    let d = p.domain;
    d.check(u)?;
    let ku = d.stiffness(u.values());
    if u.is_zero() {
        return Ok(ku);
    }
    let phi = p.poisson.solve_phi(u)?;
    Ok(covector_from_parts(p, u, &ku, phi.phi.values()))
}

/// `K u + M (φ u − f(u))` given `K u` and `φ_u`.
pub(crate) fn covector_from_parts<R: Reaction + ?Sized>(
    p: &Problem<'_, R>,
    u: &Field,
    ku: &[f64],
    phi: &[f64],
) -> Vec<f64> {
    let w = p.domain.quad_weights();
    ku.iter()
        .zip(u.values())
        .zip(phi.iter().zip(w))
        .map(|((k, &x), (ph, m))| {
            if *m > 0.0 {
                k + m * (ph * x - p.nl.f(x))
            } else {
                0.0
            }
        })
        .collect()
}

/// `J'(u)v`.
pub fn directional<R: Reaction + ?Sized>(p: &Problem<'_, R>, u: &Field, v: &Field) -> Result<f64> {
    p.domain.check(v)?;
    Ok(dot(&residual_covector(p, u)?, v.values()))
}

/// Riesz representative of `J'(u)` in the `∫∇·∇` inner product: the `g`
/// with `⟨g, v⟩_{H¹} = J'(u)v` for every `v`.
pub fn h1_gradient<R: Reaction + ?Sized>(p: &Problem<'_, R>, u: &Field) -> Result<Field> {
    let r = residual_covector(p, u)?;
    gradient_from_covector(p, &r)
}

pub(crate) fn gradient_from_covector<R: Reaction + ?Sized>(
    p: &Problem<'_, R>,
    r: &[f64],
) -> Result<Field> {
    let sol = stiffness_solve(p.domain, r, p.tol())?;
    p.domain.field(sol.x)
}
