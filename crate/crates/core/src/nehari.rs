//! Projection onto the Nehari set `N = {u ≠ 0 : J'(u)u = 0}` and the nodal
//! Nehari set `M = {u : u± ≠ 0, J'(u)u⁺ = J'(u)u⁻ = 0}`.
//!
//! Along the family `t v⁺ + s v⁻` everything reduces to a few scalars:
//!
//! ```text
//! h(t,s) = ½t²A₊ + ½s²A₋ + tsE + ¼t⁴B₊ + ¼s⁴B₋ + ½t²s²D − ∫F(tv⁺) − ∫F(sv⁻)
//! Φ(t,s) = ∇h(t,s) = (J'(tv⁺+sv⁻)v⁺, J'(tv⁺+sv⁻)v⁻)
//! ```
//!
//! with `A± = ‖v±‖²`, `B± = ∫φ_{v±}(v±)²`, `D = ∫φ_{v⁻}(v⁺)²` and
//! `E = ∫∇v⁺·∇v⁻`. `E` vanishes in the continuum; on a grid the stencil
//! couples the two nodes on either side of a sign change, so it is kept.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::discretization::grid::dot;
use crate::discretization::{default_threshold, Field, GridDomain};
use crate::error::{Error, Result};
use crate::nonlinearity::{PowerTerm, Reaction};
use crate::poisson::weighted_triple;
use crate::problem::Problem;

pub const DEFAULT_PROJECTION_TOL: f64 = 1e-10;
/// Looser membership test used before trusting the Jacobian at `(1,1)`.
pub const DEFAULT_MEMBERSHIP_TOL: f64 = 1e-8;

const MAX_NEWTON: usize = 200;
const MAX_HALVINGS: usize = 30;
const MAX_BISECTION: usize = 120;
const POLISH_STEPS: usize = 20;
const EDGE_SAMPLES: usize = 33;
const BOX_CAP: usize = 60;

/// `∫ f(t v) v` and friends along the ray `t ↦ t v` for a one-signed `v`.
#[derive(Clone, Debug)]
pub enum RayProfile {
    /// `(term, ∫|v|^e)` per power term.
    Moments(Vec<(PowerTerm, f64)>),
    /// Nonzero nodal values with their quadrature weights.
    Quadrature { values: Vec<f64>, weights: Vec<f64> },
}

impl RayProfile {
    pub fn new<R: Reaction + ?Sized>(d: &GridDomain, nl: &R, v: &Field) -> Self {
        let w = d.quad_weights();
        match nl.power_terms() {
            Some(terms) => RayProfile::Moments(
                terms
                    .iter()
                    .map(|t| {
                        let m = w
                            .iter()
                            .zip(v.values())
                            .filter(|(_, x)| **x != 0.0)
                            .map(|(wi, x)| wi * x.abs().powf(t.exponent))
                            .sum();
                        (*t, m)
                    })
                    .collect(),
            ),
            None => {
                let (mut values, mut weights) = (Vec::new(), Vec::new());
                for (wi, &x) in w.iter().zip(v.values()) {
                    if x != 0.0 && *wi > 0.0 {
                        values.push(x);
                        weights.push(*wi);
                    }
                }
                RayProfile::Quadrature { values, weights }
            }
        }
    }

    /// `∫ f(t v) v`.
    pub fn reaction<R: Reaction + ?Sized>(&self, nl: &R, t: f64) -> f64 {
        match self {
            RayProfile::Moments(ms) => ms
                .iter()
                .map(|(p, m)| p.coef * t.powf(p.exponent - 1.0) * m)
                .sum(),
            RayProfile::Quadrature { values, weights } => values
                .iter()
                .zip(weights)
                .map(|(v, w)| w * nl.f(t * v) * v)
                .sum(),
        }
    }

    /// `∫ f'(t v) v²`.
    pub fn reaction_slope<R: Reaction + ?Sized>(&self, nl: &R, t: f64) -> f64 {
        match self {
            RayProfile::Moments(ms) => ms
                .iter()
                .map(|(p, m)| p.coef * (p.exponent - 1.0) * t.powf(p.exponent - 2.0) * m)
                .sum(),
            RayProfile::Quadrature { values, weights } => values
                .iter()
                .zip(weights)
                .map(|(v, w)| w * nl.derivative(t * v) * v * v)
                .sum(),
        }
    }

    /// `∫ F(t v)`.
    pub fn primitive<R: Reaction + ?Sized>(&self, nl: &R, t: f64) -> f64 {
        match self {
            RayProfile::Moments(ms) => ms
                .iter()
                .map(|(p, m)| p.coef * t.powf(p.exponent) * m / p.exponent)
                .sum(),
            RayProfile::Quadrature { values, weights } => values
                .iter()
                .zip(weights)
                .map(|(v, w)| w * nl.primitive(t * v))
                .sum(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct NehariCoefficients {
    pub a_plus: f64,
    pub a_minus: f64,
    /// `E = ∫∇v⁺·∇v⁻`.
    pub grad_cross: f64,
    pub b_plus: f64,
    pub b_minus: f64,
    /// `∫φ_{v⁻}(v⁺)²`, used in both components of `Φ`.
    pub d: f64,
    /// `∫φ_{v⁺}(v⁻)²`, kept for the symmetry check only.
    pub d_swapped: f64,
    pub plus: RayProfile,
    pub minus: RayProfile,
    pub v_plus: Field,
    pub v_minus: Field,
    pub phi_plus: Field,
    pub phi_minus: Field,
}

/// Splits `v` and computes every scalar needed on the family `tv⁺ + sv⁻`.
pub fn coefficients<R: Reaction + ?Sized>(
    p: &Problem<'_, R>,
    v: &Field,
) -> Result<NehariCoefficients> {
    let d = p.domain;
    d.check(v)?;
    let thr = default_threshold(v);
    let (vp, vm) = (v.positive_part(), v.negative_part());
    if v.is_zero() || vp.max_abs() <= thr {
        return Err(Error::OneSigned("positive"));
    }
    if vm.max_abs() <= thr {
        return Err(Error::OneSigned("negative"));
    }
    let kp = d.stiffness(vp.values());
    let km = d.stiffness(vm.values());
    let phi_plus = p.poisson.solve_phi(&vp)?.phi.clone();
    let phi_minus = p.poisson.solve_phi(&vm)?.phi.clone();
    Ok(NehariCoefficients {
        a_plus: dot(&kp, vp.values()),
        a_minus: dot(&km, vm.values()),
        grad_cross: dot(&kp, vm.values()),
        b_plus: weighted_triple(d, phi_plus.values(), vp.values(), vp.values()),
        b_minus: weighted_triple(d, phi_minus.values(), vm.values(), vm.values()),
        d: weighted_triple(d, phi_minus.values(), vp.values(), vp.values()),
        d_swapped: weighted_triple(d, phi_plus.values(), vm.values(), vm.values()),
        plus: RayProfile::new(d, p.nl, &vp),
        minus: RayProfile::new(d, p.nl, &vm),
        v_plus: vp,
        v_minus: vm,
        phi_plus,
        phi_minus,
    })
}

impl NehariCoefficients {
    /// `A₊ + A₋`, the scale residuals are measured against.
    pub fn scale(&self) -> f64 {
        self.a_plus + self.a_minus
    }

    /// `Φ(t,s)` without argument checks.
    pub fn phi_raw<R: Reaction + ?Sized>(&self, nl: &R, t: f64, s: f64) -> (f64, f64) {
        let e = self.grad_cross;
        let f1 = t * self.a_plus + s * e + t.powi(3) * self.b_plus + t * s * s * self.d
            - self.plus.reaction(nl, t);
        let f2 = s * self.a_minus + t * e + s.powi(3) * self.b_minus + s * t * t * self.d
            - self.minus.reaction(nl, s);
        (f1, f2)
    }

    /// `Φ'(t,s)`, symmetric.
    pub fn jacobian<R: Reaction + ?Sized>(&self, nl: &R, t: f64, s: f64) -> [[f64; 2]; 2] {
        let off = self.grad_cross + 2.0 * t * s * self.d;
        [
            [
                self.a_plus + 3.0 * t * t * self.b_plus + s * s * self.d
                    - self.plus.reaction_slope(nl, t),
                off,
            ],
            [
                off,
                self.a_minus + 3.0 * s * s * self.b_minus + t * t * self.d
                    - self.minus.reaction_slope(nl, s),
            ],
        ]
    }

    pub fn eval_h<R: Reaction + ?Sized>(&self, nl: &R, t: f64, s: f64) -> f64 {
        0.5 * t * t * self.a_plus
            + 0.5 * s * s * self.a_minus
            + t * s * self.grad_cross
            + 0.25 * t.powi(4) * self.b_plus
            + 0.25 * s.powi(4) * self.b_minus
            + 0.5 * t * t * s * s * self.d
            - self.plus.primitive(nl, t)
            - self.minus.primitive(nl, s)
    }

    /// `∫φ_u u²` at `u = tv⁺ + sv⁻`.
    pub fn nonlocal_at(&self, t: f64, s: f64) -> f64 {
        t.powi(4) * self.b_plus + s.powi(4) * self.b_minus + 2.0 * t * t * s * s * self.d
    }

    pub fn point(&self, t: f64, s: f64) -> Field {
        self.v_plus.lin_comb(t, &self.v_minus, s)
    }

    /// `φ_u` at `u = tv⁺ + sv⁻`, by linearity of the potential in `u²`.
    pub fn potential_at(&self, t: f64, s: f64) -> Field {
        self.phi_plus.lin_comb(t * t, &self.phi_minus, s * s)
    }

    fn residual<R: Reaction + ?Sized>(&self, nl: &R, t: f64, s: f64) -> f64 {
        let (a, b) = self.phi_raw(nl, t, s);
        a.abs().max(b.abs())
    }
}

pub fn phi_map<R: Reaction + ?Sized>(
    c: &NehariCoefficients,
    nl: &R,
    t: f64,
    s: f64,
) -> Result<(f64, f64)> {
    if !(t > 0.0 && s > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "Φ needs t, s > 0, got ({t}, {s})"
        )));
    }
    Ok(c.phi_raw(nl, t, s))
}

pub fn eval_h<R: Reaction + ?Sized>(c: &NehariCoefficients, nl: &R, t: f64, s: f64) -> f64 {
    c.eval_h(nl, t, s)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MirandaBox {
    pub r: f64,
    #[serde(rename = "R")]
    pub big_r: f64,
    pub rounds: usize,
}

impl MirandaBox {
    pub fn contains(&self, t: f64, s: f64) -> bool {
        (self.r..=self.big_r).contains(&t) && (self.r..=self.big_r).contains(&s)
    }
}

fn edge_samples(r: f64, big_r: f64) -> impl Iterator<Item = f64> {
    (0..EDGE_SAMPLES).map(move |j| r + (big_r - r) * j as f64 / (EDGE_SAMPLES - 1) as f64)
}

/// Grows `[r, R]²` (halving `r`, doubling `R` from 1) until `Φ₁ > 0` on
/// `t = r`, `Φ₁ < 0` on `t = R`, `Φ₂ > 0` on `s = r` and `Φ₂ < 0` on
/// `s = R`, each checked at 33 points per edge. A sampled certificate, not a
/// proof.
pub fn find_miranda_box<R: Reaction + ?Sized>(
    c: &NehariCoefficients,
    nl: &R,
) -> Result<MirandaBox> {
    let (mut r, mut big_r) = (0.5, 2.0);
    for round in 1..=BOX_CAP {
        let lower = edge_samples(r, big_r)
            .all(|x| c.phi_raw(nl, r, x).0 > 0.0 && c.phi_raw(nl, x, r).1 > 0.0);
        let upper = edge_samples(r, big_r)
            .all(|x| c.phi_raw(nl, big_r, x).0 < 0.0 && c.phi_raw(nl, x, big_r).1 < 0.0);
        if lower && upper {
            return Ok(MirandaBox {
                r,
                big_r,
                rounds: round,
            });
        }
        if !lower {
            r *= 0.5;
        }
        if !upper {
            big_r *= 2.0;
        }
    }
    Err(Error::NoBracket(BOX_CAP))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ProjectionMethod {
    Newton,
    Bracketed,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProjectionResult {
    pub t: f64,
    pub s: f64,
    /// `max(|Φ₁|, |Φ₂|)` at `(t, s)`.
    pub residual: f64,
    /// Absolute target, `tol · (A₊ + A₋)`.
    pub tolerance: f64,
    pub iterations: usize,
    pub converged: bool,
    pub in_unit_box: bool,
    pub method: ProjectionMethod,
}

struct NewtonRun {
    t: f64,
    s: f64,
    residual: f64,
    iterations: usize,
    reached: bool,
}

/// `Ψ = (Φ₁/t, Φ₂/s)`: same roots as `Φ` in the open quadrant, but no
/// trivial root at the origin.
fn psi_raw<R: Reaction + ?Sized>(
    c: &NehariCoefficients,
    nl: &R,
    t: f64,
    s: f64,
) -> (f64, f64, f64) {
    let (f1, f2) = c.phi_raw(nl, t, s);
    let (g1, g2) = (f1 / t, f2 / s);
    (g1, g2, f1.abs().max(f2.abs()))
}

fn damped_newton<R: Reaction + ?Sized>(
    c: &NehariCoefficients,
    nl: &R,
    (mut t, mut s): (f64, f64),
    target: f64,
    max_steps: usize,
) -> NewtonRun {
    let (mut g1, mut g2, mut res) = psi_raw(c, nl, t, s);
    let mut merit = g1.abs().max(g2.abs());
    let done = |res: f64, merit: f64| res <= target && merit <= target;
    let mut iterations = 0;
    while !done(res, merit) && iterations < max_steps && merit.is_finite() {
        iterations += 1;
        let j = c.jacobian(nl, t, s);
        let a = (j[0][0] - g1) / t;
        let b = j[0][1] / t;
        let cc = j[1][0] / s;
        let dd = (j[1][1] - g2) / s;
        let det = a * dd - b * cc;
        if !(det.is_finite() && det != 0.0) {
            break;
        }
        let dt = -(dd * g1 - b * g2) / det;
        let ds = -(a * g2 - cc * g1) / det;
        let mut lam = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let (nt, ns) = (t + lam * dt, s + lam * ds);
            if nt > 0.0 && ns > 0.0 && nt.is_finite() && ns.is_finite() {
                let (h1, h2, nres) = psi_raw(c, nl, nt, ns);
                let nmerit = h1.abs().max(h2.abs());
                if nmerit < merit {
                    (t, s, g1, g2, res, merit) = (nt, ns, h1, h2, nres, nmerit);
                    accepted = true;
                    break;
                }
            }
            lam *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    NewtonRun {
        t,
        s,
        residual: res,
        iterations,
        reached: done(res, merit),
    }
}

/// Bisection for the root of a function that is positive at `lo` and
/// negative at `hi`.
fn bisect(mut lo: f64, mut hi: f64, steps: usize, g: impl Fn(f64) -> f64) -> f64 {
    for _ in 0..steps {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Widens `[lo, hi]` geometrically until `g(lo) > 0 > g(hi)`.
fn widen(mut lo: f64, mut hi: f64, g: &impl Fn(f64) -> f64) -> Option<(f64, f64)> {
    for _ in 0..2 * BOX_CAP {
        if g(lo) > 0.0 {
            break;
        }
        lo *= 0.5;
    }
    for _ in 0..2 * BOX_CAP {
        if g(hi) < 0.0 {
            break;
        }
        hi *= 2.0;
    }
    (g(lo) > 0.0 && g(hi) < 0.0).then_some((lo, hi))
}

/// The unique `s > 0` with `Φ₂(t, s) = 0`; `Φ₂(t,s)/s³` is strictly
/// decreasing in `s` whenever `f(s)/s³` is increasing.
fn s_star<R: Reaction + ?Sized>(c: &NehariCoefficients, nl: &R, t: f64, bx: &MirandaBox) -> f64 {
    let g = |s: f64| c.phi_raw(nl, t, s).1;
    match widen(bx.r, bx.big_r, &g) {
        Some((lo, hi)) => bisect(lo, hi, 4 * MAX_BISECTION, g),
        None => bx.r,
    }
}

fn bracketed<R: Reaction + ?Sized>(
    c: &NehariCoefficients,
    nl: &R,
    target: f64,
) -> Result<(NewtonRun, usize)> {
    let bx = find_miranda_box(c, nl)?;
    let psi = |t: f64| c.phi_raw(nl, t, s_star(c, nl, t, &bx)).0;
    let t = bisect(bx.r, bx.big_r, MAX_BISECTION, psi);
    let s = s_star(c, nl, t, &bx);
    let polished = damped_newton(c, nl, (t, s), target, POLISH_STEPS);
    Ok((polished, MAX_BISECTION))
}

/// Finds `(t, s)` with `Φ(t,s) = 0` from precomputed coefficients: damped
/// Newton from `(1,1)`, falling back to nested bisection inside a Miranda
/// box when Newton stalls or leaves the positive quadrant.
pub fn solve_projection<R: Reaction + ?Sized>(
    c: &NehariCoefficients,
    nl: &R,
    tol: f64,
) -> Result<ProjectionResult> {
    if !(tol > 0.0 && tol < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "projection tolerance {tol} must lie in (0, 1)"
        )));
    }
    let target = tol * c.scale();
    let newton = damped_newton(c, nl, (1.0, 1.0), target, MAX_NEWTON);
    let (run, method, extra) = if newton.reached {
        (newton, ProjectionMethod::Newton, 0)
    } else {
        let (run, steps) = bracketed(c, nl, target)?;
        (run, ProjectionMethod::Bracketed, newton.iterations + steps)
    };
    Ok(ProjectionResult {
        t: run.t,
        s: run.s,
        residual: run.residual,
        tolerance: target,
        iterations: run.iterations + extra,
        converged: run.reached,
        in_unit_box: run.t <= 1.0 && run.s <= 1.0,
        method,
    })
}

/// Projection of a sign-changing `v` onto `M`, together with the
/// coefficients it was computed from.
pub fn project_nodal_detailed<R: Reaction + ?Sized>(
    p: &Problem<'_, R>,
    v: &Field,
    tol: f64,
) -> Result<(ProjectionResult, NehariCoefficients)> {
    let c = coefficients(p, v)?;
    let res = solve_projection(&c, p.nl, tol)?;
    if !res.converged {
        return Err(Error::NotConverged {
            solver: "nodal projection",
            iterations: res.iterations,
            residual: res.residual / c.scale(),
        });
    }
    Ok((res, c))
}

pub fn project_nodal<R: Reaction + ?Sized>(
    p: &Problem<'_, R>,
    v: &Field,
    tol: f64,
) -> Result<ProjectionResult> {
    Ok(project_nodal_detailed(p, v, tol)?.0)
}

/// Roots of `Φ` reached by damped Newton from seeded log-uniform starts in
/// a Miranda box.
#[derive(Clone, Debug, Serialize)]
pub struct RootSurvey {
    pub starts: usize,
    pub converged: usize,
    /// Distinct roots, clustered at `1e-6` relative distance.
    pub roots: Vec<(f64, f64)>,
}

impl RootSurvey {
    pub fn unique(&self) -> bool {
        self.roots.len() == 1
    }
}

pub fn survey_roots<R: Reaction + ?Sized>(
    c: &NehariCoefficients,
    nl: &R,
    bx: &MirandaBox,
    starts: usize,
    seed: u64,
    tol: f64,
) -> RootSurvey {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = (bx.r.ln(), bx.big_r.ln());
    let mut roots: Vec<(f64, f64)> = Vec::new();
    let mut converged = 0;
    for _ in 0..starts {
        let t0 = rng.gen_range(lo..=hi).exp();
        let s0 = rng.gen_range(lo..=hi).exp();
        let run = damped_newton(c, nl, (t0, s0), tol * c.scale(), MAX_NEWTON);
        if !run.reached {
            continue;
        }
        converged += 1;
        let close = |(a, b): &(f64, f64)| {
            (a - run.t).abs().max((b - run.s).abs()) <= 1e-6 * run.t.max(run.s).max(1.0)
        };
        if !roots.iter().any(close) {
            roots.push((run.t, run.s));
        }
    }
    roots.sort_by(|a, b| a.partial_cmp(b).expect("finite roots"));
    RootSurvey {
        starts,
        converged,
        roots,
    }
}

/// `A = ‖u‖²`, `B = ∫φ_u u²` and the ray integrals for a one-signed `u`.
#[derive(Clone, Debug)]
pub struct ScalarCoefficients {
    pub a: f64,
    pub b: f64,
    pub ray: RayProfile,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScalarProjection {
    pub t: f64,
    /// `|J'(tu)u|`.
    pub residual: f64,
    /// `tol · ‖u‖²`.
    pub tolerance: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl ScalarCoefficients {
    pub fn new<R: Reaction + ?Sized>(p: &Problem<'_, R>, u: &Field) -> Result<Self> {
        let d = p.domain;
        d.check(u)?;
        if u.is_zero() {
            return Err(Error::InvalidArgument(
                "the Nehari ray of the zero field is undefined".into(),
            ));
        }
        let (pos, neg) = (
            u.values().iter().any(|v| *v > 0.0),
            u.values().iter().any(|v| *v < 0.0),
        );
        if pos && neg {
            return Err(Error::InvalidArgument(
                "scalar projection needs a one-signed field; use the nodal projection".into(),
            ));
        }
        Ok(ScalarCoefficients {
            a: d.inner_h1(u, u)?,
            b: p.poisson.nonlocal_energy(u)?,
            ray: RayProfile::new(d, p.nl, u),
        })
    }

    /// `J'(tu)u = tA + t³B − ∫f(tu)u`.
    pub fn residual<R: Reaction + ?Sized>(&self, nl: &R, t: f64) -> f64 {
        t * self.a + t.powi(3) * self.b - self.ray.reaction(nl, t)
    }

    /// `J(tu)`.
    pub fn energy<R: Reaction + ?Sized>(&self, nl: &R, t: f64) -> f64 {
        0.5 * t * t * self.a + 0.25 * t.powi(4) * self.b - self.ray.primitive(nl, t)
    }

    /// Safeguarded Newton for the positive root of `J'(tu)u`: Newton steps
    /// that leave the current sign bracket are replaced by bisection.
    pub fn solve<R: Reaction + ?Sized>(&self, nl: &R, tol: f64) -> Result<ScalarProjection> {
        if !(tol > 0.0 && tol < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "projection tolerance {tol} must lie in (0, 1)"
            )));
        }
        let g = |t: f64| self.residual(nl, t);
        let (mut lo, mut hi) = widen(1.0, 1.0, &g).ok_or(Error::NoBracket(2 * BOX_CAP))?;
        let target = tol * self.a;
        let mut t = 1.0f64.clamp(lo, hi);
        let mut gt = g(t);
        let mut iterations = 0;
        while gt.abs() > target && iterations < MAX_NEWTON {
            iterations += 1;
            if gt > 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let slope = self.a + 3.0 * t * t * self.b - self.ray.reaction_slope(nl, t);
            let newton = t - gt / slope;
            let next = if newton.is_finite() && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if next == t {
                break;
            }
            t = next;
            gt = g(t);
        }
        Ok(ScalarProjection {
            t,
            residual: gt.abs(),
            tolerance: target,
            iterations,
            converged: gt.abs() <= target,
        })
    }
}

/// The `t > 0` with `J'(tu)(tu) = 0` for a one-signed `u`.
pub fn project_scalar<R: Reaction + ?Sized>(
    p: &Problem<'_, R>,
    u: &Field,
    tol: f64,
) -> Result<ScalarProjection> {
    let c = ScalarCoefficients::new(p, u)?;
    let res = c.solve(p.nl, tol)?;
    if !res.converged {
        return Err(Error::NotConverged {
            solver: "scalar projection",
            iterations: res.iterations,
            residual: res.residual / c.a,
        });
    }
    Ok(res)
}

/// Second-order data of `Φ` at `(1,1)` for a point of `M`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct JacobianDiag {
    /// `G(w⁺) = ∫[f'(w⁺)(w⁺)² − f(w⁺)w⁺] − 2∫φ_{w⁺}(w⁺)²`.
    pub g_plus: f64,
    pub g_minus: f64,
    pub d: f64,
    pub e: f64,
    /// `G₊G₋ − 4D²`, the continuum determinant.
    pub det_continuum: f64,
    /// `det Φ'(1,1) = (G₊ + E)(G₋ + E) − (E + 2D)²` on the grid.
    pub det: f64,
    /// `max |Φ(1,1)|` relative to `A₊ + A₋`.
    pub membership: f64,
    pub certified: bool,
}

impl JacobianDiag {
    pub fn from_coefficients<R: Reaction + ?Sized>(c: &NehariCoefficients, nl: &R) -> Self {
        let g = |ray: &RayProfile, b: f64| {
            ray.reaction_slope(nl, 1.0) - ray.reaction(nl, 1.0) - 2.0 * b
        };
        let g_plus = g(&c.plus, c.b_plus);
        let g_minus = g(&c.minus, c.b_minus);
        let (d, e) = (c.d, c.grad_cross);
        let det = (g_plus + e) * (g_minus + e) - (e + 2.0 * d).powi(2);
        let det_continuum = g_plus * g_minus - 4.0 * d * d;
        JacobianDiag {
            g_plus,
            g_minus,
            d,
            e,
            det_continuum,
            det,
            membership: c.residual(nl, 1.0, 1.0) / c.scale(),
            certified: g_plus > 2.0 * d && g_minus > 2.0 * d && det > 0.0 && det_continuum > 0.0,
        }
    }
}

/// Jacobian diagnostics for `w`, refusing fields that are not on `M` to
/// within `membership_tol · (A₊ + A₋)`.
pub fn jacobian_diag<R: Reaction + ?Sized>(
    p: &Problem<'_, R>,
    w: &Field,
    membership_tol: f64,
) -> Result<JacobianDiag> {
    let c = coefficients(p, w)?;
    let diag = JacobianDiag::from_coefficients(&c, p.nl);
    if diag.membership > membership_tol {
        return Err(Error::NotOnNehariSet {
            residual: diag.membership,
            tolerance: membership_tol,
        });
    }
    Ok(diag)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Dominance {
    pub h11: f64,
    pub max_other: f64,
    pub argmax_other: (f64, f64),
    pub strict: bool,
}

/// `h(1,1)` against `h` on `{0.2, 0.4, …, 2.0}² \ {(1,1)}`.
pub fn sampled_dominance<R: Reaction + ?Sized>(c: &NehariCoefficients, nl: &R) -> Dominance {
    let h11 = c.eval_h(nl, 1.0, 1.0);
    let mut best = (f64::NEG_INFINITY, (0.0, 0.0));
    for i in 1..=10 {
        for j in 1..=10 {
            if i == 5 && j == 5 {
                continue;
            }
            let (t, s) = (0.2 * i as f64, 0.2 * j as f64);
            let h = c.eval_h(nl, t, s);
            if h > best.0 {
                best = (h, (t, s));
            }
        }
    }
    Dominance {
        h11,
        max_other: best.0,
        argmax_other: best.1,
        strict: h11 > best.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::{directional, energy};
    use crate::nonlinearity::Nonlinearity;

    fn dipole(d: &GridDomain) -> Field {
        d.field_from_fn(|[x, y, z]| {
            let g =
                |c: f64| (-((x - c).powi(2) + (y - 0.5).powi(2) + (z - 0.5).powi(2)) / 0.02).exp();
            3.0 * g(0.3) - 2.0 * g(0.7)
        })
        .unwrap()
    }

    #[test]
    fn one_signed_inputs_are_rejected() {
        let d = GridDomain::build_box_grid(7, 1.0).unwrap();
        let nl = Nonlinearity::pure_power(1.0, 5.0).unwrap();
        let p = Problem::new(&d, &nl);
        let u = dipole(&d).positive_part();
        assert!(matches!(
            coefficients(&p, &u),
            Err(Error::OneSigned("negative"))
        ));
        assert!(matches!(
            coefficients(&p, &u.scaled(-1.0)),
            Err(Error::OneSigned("positive"))
        ));
        assert!(coefficients(&p, &d.zeros()).is_err());
        assert!(project_scalar(&p, &dipole(&d), 1e-10).is_err());
        assert!(project_scalar(&p, &d.zeros(), 1e-10).is_err());
    }

    #[test]
    fn odd_field_has_symmetric_coefficients() {
        let d = GridDomain::build_box_grid(8, 1.0).unwrap();
        let nl = Nonlinearity::pure_power(1.0, 5.0).unwrap();
        let p = Problem::new(&d, &nl);
        let v = d
            .field_from_fn(|[x, y, z]| {
                (2.0 * std::f64::consts::PI * x).sin() * (y * (1.0 - y) * z * (1.0 - z))
            })
            .unwrap();
        let c = coefficients(&p, &v).unwrap();
        assert!((c.a_plus - c.a_minus).abs() <= 1e-10 * c.a_plus);
        assert!((c.b_plus - c.b_minus).abs() <= 1e-10 * c.b_plus);
        assert!((c.d - c.d_swapped).abs() <= 1e-8 * c.d);
    }

    #[test]
    fn h_matches_full_field_energy_and_phi_matches_derivative() {
        let d = GridDomain::build_box_grid(9, 1.0).unwrap();
        let nl = Nonlinearity::two_power(1.0, 5.0, 0.5, 4.5).unwrap();
        let p = Problem::new(&d, &nl);
        let c = coefficients(&p, &dipole(&d)).unwrap();
        assert_eq!(c.eval_h(&nl, 0.0, 0.0), 0.0);
        for (t, s) in [(0.3, 1.2), (1.0, 1.0), (2.1, 0.7), (0.05, 3.0)] {
            let u = c.point(t, s);
            let e = energy(&p, &u).unwrap();
            assert!(
                (c.eval_h(&nl, t, s) - e.j).abs() <= 1e-10 * (e.norm_sq + e.nonlocal + e.potential)
            );
            let (f1, f2) = phi_map(&c, &nl, t, s).unwrap();
            let g1 = directional(&p, &u, &c.v_plus).unwrap();
            let g2 = directional(&p, &u, &c.v_minus).unwrap();
            assert!((f1 - g1).abs() <= 1e-9 * c.scale(), "{f1} vs {g1}");
            assert!((f2 - g2).abs() <= 1e-9 * c.scale(), "{f2} vs {g2}");
        }
        assert!(phi_map(&c, &nl, 0.0, 1.0).is_err());
    }

    #[test]
    fn projection_lands_on_the_nodal_set() {
        let d = GridDomain::build_box_grid(9, 1.0).unwrap();
        let nl = Nonlinearity::pure_power(1.0, 5.0).unwrap();
        let p = Problem::new(&d, &nl);
        let v = dipole(&d);
        let (res, c) = project_nodal_detailed(&p, &v, 1e-10).unwrap();
        assert!(res.converged && res.residual <= 1e-10 * c.scale());
        let w = c.point(res.t, res.s);
        let again = project_nodal(&p, &w, 1e-10).unwrap();
        assert!((again.t - 1.0).abs() < 1e-8 && (again.s - 1.0).abs() < 1e-8);
        let e = energy(&p, &w).unwrap();
        assert!(e.split_res_plus.abs() <= 1e-9 * e.norm_sq);
        assert!(e.split_res_minus.abs() <= 1e-9 * e.norm_sq);
        let scaled = project_nodal(&p, &w.scaled(2.0), 1e-10).unwrap();
        assert!(scaled.in_unit_box && scaled.t > 0.0 && scaled.s > 0.0);
    }

    #[test]
    fn miranda_box_edges_have_the_right_signs() {
        let d = GridDomain::build_box_grid(7, 1.0).unwrap();
        let nl = Nonlinearity::pure_power(1.0, 5.0).unwrap();
        let p = Problem::new(&d, &nl);
        let c = coefficients(&p, &dipole(&d).scaled(0.01)).unwrap();
        let bx = find_miranda_box(&c, &nl).unwrap();
        assert!(bx.r < 1.0 && bx.big_r > 1.0);
        for x in edge_samples(bx.r, bx.big_r) {
            assert!(c.phi_raw(&nl, bx.r, x).0 > 0.0);
            assert!(c.phi_raw(&nl, bx.big_r, x).0 < 0.0);
        }
        let res = solve_projection(&c, &nl, 1e-10).unwrap();
        assert!(bx.contains(res.t, res.s));
        let survey = survey_roots(&c, &nl, &bx, 20, 3, 1e-10);
        assert!(survey.unique(), "{survey:?}");
    }

    #[test]
    fn bracketed_fallback_agrees_with_newton() {
        let d = GridDomain::build_box_grid(7, 1.0).unwrap();
        let nl = Nonlinearity::pure_power(1.0, 5.0).unwrap();
        let p = Problem::new(&d, &nl);
        let c = coefficients(&p, &dipole(&d).scaled(0.3)).unwrap();
        let newton = solve_projection(&c, &nl, 1e-10).unwrap();
        let (run, _) = bracketed(&c, &nl, 1e-10 * c.scale()).unwrap();
        assert!(run.reached);
        assert!((run.t - newton.t).abs() < 1e-8 * newton.t);
        assert!((run.s - newton.s).abs() < 1e-8 * newton.s);
    }

    #[test]
    fn zero_coupling_decouples_into_scalar_problems() {
        let d = GridDomain::build_box_grid(8, 1.0).unwrap();
        let nl = Nonlinearity::pure_power(1.0, 5.0).unwrap();
        let p = Problem::new(&d, &nl);
        let mut c = coefficients(&p, &dipole(&d)).unwrap();
        c.d = 0.0;
        c.grad_cross = 0.0;
        let joint = solve_projection(&c, &nl, 1e-12).unwrap();
        let tp = project_scalar(&p, &c.v_plus, 1e-12).unwrap().t;
        let tm = project_scalar(&p, &c.v_minus, 1e-12).unwrap().t;
        assert!((joint.t - tp).abs() <= 1e-8 * tp);
        assert!((joint.s - tm).abs() <= 1e-8 * tm);
    }

    #[test]
    fn scalar_projection_on_constructed_coefficients() {
        let nl = Nonlinearity::pure_power(1.0, 5.0).unwrap();
        let moments = |m: f64| RayProfile::Moments(vec![(nl.terms()[0], m)]);
        let c = ScalarCoefficients {
            a: 1.0,
            b: 1.0,
            ray: moments(2.0),
        };
        assert!((c.solve(&nl, 1e-12).unwrap().t - 1.0).abs() < 1e-12);
        let c = ScalarCoefficients {
            a: 3.0,
            b: 0.0,
            ray: moments(3.0),
        };
        assert!((c.solve(&nl, 1e-12).unwrap().t - 1.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_projection_zeroes_the_ray_derivative() {
        let d = GridDomain::build_radial_grid(63, 1.0).unwrap();
        let nl = Nonlinearity::pure_power(1.0, 5.0).unwrap();
        let p = Problem::new(&d, &nl);
        let u = d.field_from_fn(|[r, _, _]| 0.1 * (1.0 - r * r)).unwrap();
        let res = project_scalar(&p, &u, 1e-10).unwrap();
        let tu = u.scaled(res.t);
        let e = energy(&p, &tu).unwrap();
        assert!(e.nehari_res.abs() <= 1e-10 * e.norm_sq);
    }

    #[test]
    fn jacobian_matches_finite_differences_at_a_nodal_point() {
        let d = GridDomain::build_box_grid(9, 1.0).unwrap();
        let nl = Nonlinearity::pure_power(1.0, 5.0).unwrap();
        let p = Problem::new(&d, &nl);
        let (res, c) = project_nodal_detailed(&p, &dipole(&d), 1e-12).unwrap();
        let w = c.point(res.t, res.s);
        let cw = coefficients(&p, &w).unwrap();
        let diag = jacobian_diag(&p, &w, DEFAULT_MEMBERSHIP_TOL).unwrap();
        let eps = 1e-5;
        let (a1, a2) = cw.phi_raw(&nl, 1.0 + eps, 1.0);
        let (b1, b2) = cw.phi_raw(&nl, 1.0 - eps, 1.0);
        let (c1, c2) = cw.phi_raw(&nl, 1.0, 1.0 + eps);
        let (d1, d2) = cw.phi_raw(&nl, 1.0, 1.0 - eps);
        let j = [
            [(a1 - b1) / (2.0 * eps), (c1 - d1) / (2.0 * eps)],
            [(a2 - b2) / (2.0 * eps), (c2 - d2) / (2.0 * eps)],
        ];
        let det_fd = j[0][0] * j[1][1] - j[0][1] * j[1][0];
        assert!(
            (det_fd - diag.det).abs() <= 1e-4 * diag.det.abs(),
            "{det_fd} vs {}",
            diag.det
        );
        assert!(diag.det > 0.0 && diag.g_plus > 2.0 * diag.d && diag.g_minus > 2.0 * diag.d);
        assert!(sampled_dominance(&cw, &nl).strict);
        assert!(jacobian_diag(&p, &w.scaled(1.5), DEFAULT_MEMBERSHIP_TOL).is_err());
    }

    #[test]
    fn projection_matches_dense_argmax_of_h() {
        let d = GridDomain::build_box_grid(8, 1.0).unwrap();
        let nl = Nonlinearity::pure_power(1.0, 5.0).unwrap();
        let p = Problem::new(&d, &nl);
        let c = coefficients(&p, &dipole(&d)).unwrap();
        let bx = find_miranda_box(&c, &nl).unwrap();
        let res = solve_projection(&c, &nl, 1e-10).unwrap();
        let m = 400;
        let step = (bx.big_r - bx.r) / (m - 1) as f64;
        let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
        for i in 0..m {
            for j in 0..m {
                let (t, s) = (bx.r + i as f64 * step, bx.r + j as f64 * step);
                let h = c.eval_h(&nl, t, s);
                if h > best.0 {
                    best = (h, t, s);
                }
            }
        }
        assert!((best.1 - res.t).abs() <= step, "{best:?} vs {res:?}");
        assert!((best.2 - res.s).abs() <= step, "{best:?} vs {res:?}");
    }
}
