//! Invariant suite: every checkable identity and inequality of the
//! construction, run on seeded random fields, with a fault-injection switch
//! so that the suite itself can be shown to detect breakage.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::discretization::grid::dot;
use crate::discretization::{
    random_smooth_field, smallest_eigenpair, stiffness_solve, DomainKind, Field, GridDomain,
};
use crate::error::{Error, Result};
use crate::minimizer::{
    ground_guess, initial_guess, minimize_ground, minimize_nodal, InitStyle, MinimizeOptions,
};
use crate::nehari::{coefficients, project_nodal_detailed, solve_projection, NehariCoefficients};
use crate::nonlinearity::{check_hypotheses, default_samples, Nonlinearity, PowerTerm, Reaction};
use crate::poisson::weighted_triple;
use crate::problem::Problem;

/// Poisson tolerance used inside the suite. Tighter than the solver default
/// so that finite-difference checks on 3D grids are not CG-noise limited.
pub const SUITE_POISSON_TOL: f64 = 1e-13;

/// Per-check tolerances, in one place.
pub const TOLERANCES: &[(&str, f64)] = &[
    ("cross_coupling_symmetry", 1e-8),
    ("energy_split", 1e-8),
    ("gradient_consistency", 0.2),
    ("h1_gradient_consistency", 1e-8),
    ("laplacian_symmetry", 1e-12),
    ("nehari_additivity", 1e-10),
    ("nonlocal_bound", 0.0),
    ("nonlocal_continuity", 1.0),
    ("nonlocal_decomposition", 1e-8),
    ("nonlocal_identity", 1e-8),
    ("nonlocal_quartic", 1e-8),
    ("poincare", 1e-8),
    ("potential_nonnegative", 1e-10),
    ("potential_scaling", 1e-8),
    ("projection_containment", 0.0),
    ("projection_residual", 1e-10),
    ("sign_part_residual", 1e-8),
    ("sign_split", 0.0),
];

pub fn tolerance(name: &str) -> f64 {
    TOLERANCES
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, t)| *t)
        .unwrap_or(0.0)
}

/// Deliberate faults, each breaking at least one check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutation {
    None,
    /// `u⁺` keeps a thousandth of the negative values.
    SignSplitLeak,
    /// Adds an unpaired super-diagonal entry to the stiffness matrix.
    StiffnessSkew,
    /// Halves the stiffness matrix used for `‖u‖²`.
    StiffnessHalved,
    /// Adds `1e-3 · max φ` to the potential.
    PotentialBias,
    /// Negates the potential at one node.
    PotentialSignFlip,
    /// Solves `−Δφ = |u|^{2.01}` instead of `u²`.
    PotentialExponent,
    /// Cross coupling `∫φ_a |b|^{2.001}`.
    CrossSkew,
    /// Halves the fitted constant in `N(u) ≤ Ĉ‖u‖⁴`.
    BoundConstantHalved,
    /// `N(u + δ)` jumps by `1e-3 N(u)` for every `δ ≠ 0`.
    ContinuityJump,
    /// Scales `J'(u)v` by `1 + 1e-3`.
    DerivativeScale,
    /// Scales the `H¹` gradient by `1 + 1e-3`.
    GradientScale,
    /// Projection returns `(1, 1)` without solving.
    ProjectionSkip,
    /// Projection returns `3.1 · (t, s)`.
    ProjectionOvershoot,
    /// Hypothesis checks see `f(s) = s³`.
    CubicReaction,
    /// Hypothesis checks see `s + f(s)`.
    LinearReaction,
    /// Hypothesis checks see `f(s) = |s|^{4.5} s`.
    SupercriticalReaction,
}

impl Mutation {
    pub const ALL: [Mutation; 17] = [
        Mutation::None,
        Mutation::SignSplitLeak,
        Mutation::StiffnessSkew,
        Mutation::StiffnessHalved,
        Mutation::PotentialBias,
        Mutation::PotentialSignFlip,
        Mutation::PotentialExponent,
        Mutation::CrossSkew,
        Mutation::BoundConstantHalved,
        Mutation::ContinuityJump,
        Mutation::DerivativeScale,
        Mutation::GradientScale,
        Mutation::ProjectionSkip,
        Mutation::ProjectionOvershoot,
        Mutation::CubicReaction,
        Mutation::LinearReaction,
        Mutation::SupercriticalReaction,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Mutation::None => "none",
            Mutation::SignSplitLeak => "sign_split_leak",
            Mutation::StiffnessSkew => "stiffness_skew",
            Mutation::StiffnessHalved => "stiffness_halved",
            Mutation::PotentialBias => "potential_bias",
            Mutation::PotentialSignFlip => "potential_sign_flip",
            Mutation::PotentialExponent => "potential_exponent",
            Mutation::CrossSkew => "cross_skew",
            Mutation::BoundConstantHalved => "bound_constant_halved",
            Mutation::ContinuityJump => "continuity_jump",
            Mutation::DerivativeScale => "derivative_scale",
            Mutation::GradientScale => "gradient_scale",
            Mutation::ProjectionSkip => "projection_skip",
            Mutation::ProjectionOvershoot => "projection_overshoot",
            Mutation::CubicReaction => "cubic_reaction",
            Mutation::LinearReaction => "linear_reaction",
            Mutation::SupercriticalReaction => "supercritical_reaction",
        }
    }
}

impl fmt::Display for Mutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mutation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mutation::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| Error::Parse(format!("unknown mutation `{s}`")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SuiteConfig {
    pub seed: u64,
    pub n_samples: usize,
    pub mutation: Mutation,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            seed: 42,
            n_samples: 100,
            mutation: Mutation::None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub claim: &'static str,
    pub tested: usize,
    /// Largest violation measured in the check's own (relative) units.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub passed: bool,
    pub seed: u64,
    pub n_samples: usize,
    pub domain: String,
    pub nonlinearity: String,
    pub mutation: Mutation,
    /// `λ₁ʰ`.
    pub smallest_eigenvalue: f64,
    /// Empirical `Ĉ` with `N(u) ≤ Ĉ‖u‖⁴`.
    pub bound_constant: f64,
    pub checks: Vec<CheckResult>,
}

impl VerifyReport {
    pub fn get(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is plain data")
    }
}

/// Running maximum of a violation measure.
struct Tally {
    tested: usize,
    worst: f64,
    note: Option<String>,
}

impl Tally {
    fn new() -> Self {
        Tally {
            tested: 0,
            worst: 0.0,
            note: None,
        }
    }

    fn add(&mut self, v: f64) {
        self.tested += 1;
        // NaN counts as the worst possible outcome.
        self.worst = if v.is_nan() {
            f64::INFINITY
        } else {
            self.worst.max(v)
        };
    }
}

struct Suite<'a, R: Reaction + ?Sized> {
    p: Problem<'a, R>,
    mutation: Mutation,
}

impl<'a, R: Reaction + ?Sized> Suite<'a, R> {
    fn d(&self) -> &GridDomain {
        self.p.domain
    }

    fn split(&self, u: &Field) -> (Field, Field) {
        let (plus, minus) = (u.positive_part(), u.negative_part());
        if self.mutation == Mutation::SignSplitLeak {
            (plus.lin_comb(1.0, &minus, 1e-3), minus)
        } else {
            (plus, minus)
        }
    }

    fn stiffness(&self, x: &[f64]) -> Vec<f64> {
        let mut out = self.d().stiffness(x);
        match self.mutation {
            Mutation::StiffnessSkew => {
                let diag = self.d().stiffness_diagonal();
                for i in 0..out.len().saturating_sub(1) {
                    out[i] += 1e-3 * diag[i] * x[i + 1];
                }
            }
            Mutation::StiffnessHalved => out.iter_mut().for_each(|v| *v *= 0.5),
            _ => {}
        }
        out
    }

    fn norm_sq(&self, u: &Field) -> f64 {
        dot(&self.stiffness(u.values()), u.values())
    }

    fn phi(&self, u: &Field) -> Result<Field> {
        let d = self.d();
        if self.mutation == Mutation::PotentialExponent {
            let rhs: Vec<f64> = d
                .quad_weights()
                .iter()
                .zip(u.values())
                .map(|(w, v)| w * v.abs().powf(2.01))
                .collect();
            return d.field(stiffness_solve(d, &rhs, self.p.tol())?.x);
        }
        let phi = self.p.poisson.solve_phi(u)?.phi.clone();
        Ok(match self.mutation {
            Mutation::PotentialBias => {
                let b = 1e-3 * phi.max_abs();
                d.field(phi.values().iter().map(|v| v + b).collect())?
            }
            Mutation::PotentialSignFlip => {
                let mut v = phi.into_values();
                if let Some(k) = (0..v.len()).find(|&k| d.is_active(k) && v[k] != 0.0) {
                    v[k] = -v[k];
                }
                d.field(v)?
            }
            _ => phi,
        })
    }

    fn nonlocal(&self, u: &Field) -> Result<f64> {
        if u.is_zero() {
            return Ok(0.0);
        }
        let phi = self.phi(u)?;
        Ok(weighted_triple(
            self.d(),
            phi.values(),
            u.values(),
            u.values(),
        ))
    }

    fn cross(&self, a: &Field, b: &Field) -> Result<f64> {
        if a.is_zero() || b.is_zero() {
            return Ok(0.0);
        }
        let phi = self.phi(a)?;
        if self.mutation == Mutation::CrossSkew {
            let b2 = b.map(|x| x.abs().powf(2.001));
            let one = self.d().field(vec![1.0; b.len()])?;
            return Ok(weighted_triple(
                self.d(),
                phi.values(),
                b2.values(),
                one.values(),
            ));
        }
        Ok(weighted_triple(
            self.d(),
            phi.values(),
            b.values(),
            b.values(),
        ))
    }

    fn energy(&self, u: &Field) -> Result<f64> {
        let f = self.d().integrate_map(u, |s| self.p.nl.primitive(s))?;
        Ok(0.5 * self.norm_sq(u) + 0.25 * self.nonlocal(u)? - f)
    }

    fn covector(&self, u: &Field) -> Result<Vec<f64>> {
        let phi = if u.is_zero() {
            self.d().zeros()
        } else {
            self.phi(u)?
        };
        let ku = self.stiffness(u.values());
        let w = self.d().quad_weights();
        Ok((0..u.len())
            .map(|i| {
                let x = u.values()[i];
                if w[i] > 0.0 {
                    ku[i] + w[i] * (phi.values()[i] * x - self.p.nl.f(x))
                } else {
                    0.0
                }
            })
            .collect())
    }

    fn directional(&self, u: &Field, v: &Field) -> Result<f64> {
        let r = dot(&self.covector(u)?, v.values());
        Ok(if self.mutation == Mutation::DerivativeScale {
            r * (1.0 + 1e-3)
        } else {
            r
        })
    }

    fn h1_gradient(&self, u: &Field) -> Result<Field> {
        let r = self.covector(u)?;
        let g = self
            .d()
            .field(stiffness_solve(self.d(), &r, self.p.tol())?.x)?;
        Ok(if self.mutation == Mutation::GradientScale {
            g.scaled(1.0 + 1e-3)
        } else {
            g
        })
    }

    /// `(t, s, max|Φ(t,s)| / (A₊ + A₋), coefficients)`.
    fn project(&self, v: &Field, tol: f64) -> Result<(f64, f64, f64, NehariCoefficients)> {
        let c = coefficients(&self.p, v)?;
        let res = solve_projection(&c, self.p.nl, tol)?;
        let (t, s) = match self.mutation {
            Mutation::ProjectionSkip => (1.0, 1.0),
            Mutation::ProjectionOvershoot => (3.1 * res.t, 3.1 * res.s),
            _ => (res.t, res.s),
        };
        let (f1, f2) = c.phi_raw(self.p.nl, t, s);
        Ok((t, s, f1.abs().max(f2.abs()) / c.scale(), c))
    }
}

fn finish(name: &str, claim: &'static str, tally: Tally) -> CheckResult {
    let tol = tolerance(name);
    let passed = tally.worst <= tol && tally.worst.is_finite();
    CheckResult {
        name: name.to_string(),
        claim,
        tested: tally.tested,
        worst: tally.worst,
        tolerance: tol,
        passed,
        note: tally.note,
    }
}

fn skipped(name: &str, claim: &'static str, why: &str) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        claim,
        tested: 0,
        worst: 0.0,
        tolerance: tolerance(name),
        passed: true,
        note: Some(format!("skipped: {why}")),
    }
}

fn relative(a: f64, b: f64, scale: f64) -> f64 {
    if scale == 0.0 {
        if a == b {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (a - b).abs() / scale
    }
}

/// Runs every check on `cfg.n_samples` seeded random fields (plus
/// constructed edge cases). Failures are report entries, not errors; only
/// `n_samples = 0` and solver breakdowns are errors.
pub fn run_suite<R: Reaction + ?Sized>(
    d: &GridDomain,
    nl: &R,
    cfg: &SuiteConfig,
) -> Result<VerifyReport> {
    if cfg.n_samples == 0 {
        return Err(Error::InvalidArgument(
            "n_samples must be at least 1".into(),
        ));
    }
    let suite = Suite {
        p: Problem::with_tol(d, nl, SUITE_POISSON_TOL),
        mutation: cfg.mutation,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let fields: Vec<Field> = (0..cfg.n_samples)
        .map(|_| random_smooth_field(d, &mut rng, 2))
        .collect();
    let partners: Vec<Field> = (0..cfg.n_samples)
        .map(|_| random_smooth_field(d, &mut rng, 2))
        .collect();
    let mut checks = Vec::new();

    checks.extend(hypothesis_checks(nl, cfg.mutation));

    // Sign split.
    let mut tally = Tally::new();
    for u in &fields {
        let (a, b) = suite.split(u);
        let worst = (0..u.len())
            .map(|i| {
                (a.values()[i] + b.values()[i] - u.values()[i]).abs()
                    + (a.values()[i] * b.values()[i]).abs()
            })
            .fold(0.0, f64::max);
        tally.add(worst);
    }
    checks.push(finish(
        "sign_split",
        "u⁺ + u⁻ = u and u⁺u⁻ = 0 nodewise",
        tally,
    ));

    // Symmetry of the discrete Laplacian.
    let mut tally = Tally::new();
    for (u, v) in fields.iter().zip(&partners) {
        let a = dot(&suite.stiffness(u.values()), v.values());
        let b = dot(&suite.stiffness(v.values()), u.values());
        let scale = (d.inner_h1(u, u)? * d.inner_h1(v, v)?).sqrt();
        tally.add(relative(a, b, scale));
    }
    checks.push(finish("laplacian_symmetry", "⟨−Δu, v⟩ = ⟨u, −Δv⟩", tally));

    // Poincaré with the computed first eigenpair as a constructed edge case.
    let eig = smallest_eigenpair(d)?;
    let lambda1 = eig.value;
    let mut tally = Tally::new();
    let first_mode = d.field(eig.vector.clone())?;
    for u in fields.iter().chain(std::iter::once(&first_mode)) {
        let l2 = d.inner_l2(u, u)?;
        let h1 = suite.norm_sq(u);
        tally.add(((lambda1 * l2 - h1) / h1).max(0.0));
    }
    checks.push(finish("poincare", "‖u‖² ≥ λ₁ ∫u²", tally));

    // Potential: sign, scaling, energy identity, quartic scaling.
    let (mut nonneg, mut scaling, mut identity, mut quartic) =
        (Tally::new(), Tally::new(), Tally::new(), Tally::new());
    for u in &fields {
        let phi = suite.phi(u)?;
        let max = phi.values().iter().cloned().fold(0.0, f64::max);
        let min = phi.values().iter().cloned().fold(f64::INFINITY, f64::min);
        nonneg.add(if max > 0.0 {
            (-min / max).max(0.0)
        } else {
            f64::INFINITY
        });
        for t in [0.5, 2.0, 3.0] {
            let pt = suite.phi(&u.scaled(t))?;
            let diff = pt
                .values()
                .iter()
                .zip(phi.values())
                .map(|(a, b)| (a - t * t * b).abs())
                .fold(0.0, f64::max);
            scaling.add(diff / pt.max_abs());
        }
        let n = weighted_triple(d, phi.values(), u.values(), u.values());
        let grad = dot(&d.stiffness(phi.values()), phi.values());
        identity.add(relative(grad, n, n));
        let n1 = suite.nonlocal(u)?;
        let n2 = suite.nonlocal(&u.scaled(2.0))?;
        quartic.add(relative(n2, 16.0 * n1, 16.0 * n1));
    }
    checks.push(finish("potential_nonnegative", "φ_u ≥ 0", nonneg));
    checks.push(finish("potential_scaling", "φ_{tu} = t²φ_u", scaling));
    checks.push(finish("nonlocal_identity", "∫|∇φ_u|² = ∫φ_u u²", identity));
    checks.push(finish("nonlocal_quartic", "N(2u) = 16 N(u)", quartic));

    // Cross coupling symmetry and the decomposition of N.
    let (mut sym, mut decomp) = (Tally::new(), Tally::new());
    for (u, v) in fields.iter().zip(&partners) {
        let ab = suite.cross(u, v)?;
        let ba = suite.cross(v, u)?;
        sym.add(relative(ab, ba, ab.abs().max(ba.abs())));
        let (up, um) = suite.split(u);
        let n = suite.nonlocal(u)?;
        let parts = suite.nonlocal(&up)? + suite.nonlocal(&um)? + 2.0 * suite.cross(&um, &up)?;
        decomp.add(relative(n, parts, n));
    }
    checks.push(finish("cross_coupling_symmetry", "∫φ_a b² = ∫φ_b a²", sym));
    checks.push(finish(
        "nonlocal_decomposition",
        "N(u) = N(u⁺) + N(u⁻) + 2∫φ_{u⁻}(u⁺)²",
        decomp,
    ));

    // Empirical bound constant, then its validity on fresh fields.
    let (c_hat, maximizer) = fit_bound_constant(&suite, &fields[0])?;
    let c_used = if cfg.mutation == Mutation::BoundConstantHalved {
        0.5 * c_hat
    } else {
        c_hat
    };
    let mut tally = Tally::new();
    for u in partners.iter().chain(std::iter::once(&maximizer)) {
        let ratio = suite.nonlocal(u)? / suite.norm_sq(u).powi(2);
        tally.add((ratio / c_used - 1.0).max(0.0));
    }
    checks.push(finish(
        "nonlocal_bound",
        "N(u) ≤ Ĉ‖u‖⁴ with one fitted Ĉ",
        tally,
    ));

    // Continuity of N with a linear modulus: the first-order remainder
    // e(ε) = |N(u + εv) − N(u) − ε N'(u)v| must stay below ten times the
    // slope e(ε)/ε seen on the two coarsest rungs, plus a rounding floor.
    let mut tally = Tally::new();
    for (u, v) in fields.iter().zip(&partners).take(10) {
        let n0 = suite.nonlocal(u)?;
        let slope = 4.0 * weighted_triple(d, suite.phi(u)?.values(), u.values(), v.values());
        let mut rem = Vec::new();
        for k in 1..=6 {
            let eps = 10f64.powi(-k);
            let mut nk = suite.nonlocal(&u.lin_comb(1.0, v, eps))?;
            if cfg.mutation == Mutation::ContinuityJump {
                nk += 1e-3 * n0;
            }
            rem.push((eps, (nk - n0 - eps * slope).abs()));
        }
        let k_hat = rem[..2].iter().map(|(e, r)| r / e).fold(0.0, f64::max);
        let worst = rem[2..]
            .iter()
            .map(|(e, r)| r / (10.0 * k_hat * e + 1e3 * f64::EPSILON * n0 / e))
            .fold(0.0, f64::max);
        tally.add(worst);
    }
    checks.push(finish(
        "nonlocal_continuity",
        "N(u + δ) → N(u) as ‖δ‖ → 0",
        tally,
    ));

    // Energy split over sign parts and Nehari residual additivity.
    let (mut split, mut additivity) = (Tally::new(), Tally::new());
    for u in &fields {
        let (up, um) = suite.split(u);
        if up.is_zero() || um.is_zero() {
            continue;
        }
        let e = dot(&d.stiffness(up.values()), um.values());
        let (j, jp, jm) = (suite.energy(u)?, suite.energy(&up)?, suite.energy(&um)?);
        let half_d = 0.5 * suite.cross(&um, &up)?;
        // Measured against the terms that cancel, not the small remainder.
        let scale = [j, jp, jm, e, half_d]
            .iter()
            .fold(0.0f64, |m, x| m.max(x.abs()));
        split.add(relative(j - jp - jm - e, half_d, scale));
        let whole = suite.directional(u, u)?;
        let plus = suite.directional(u, &up)?;
        let minus = suite.directional(u, &um)?;
        additivity.add(relative(whole, plus + minus, plus.abs().max(minus.abs())));
    }
    checks.push(finish(
        "energy_split",
        "J(u) − J(u⁺) − J(u⁻) = ∫∇u⁺·∇u⁻ + ½∫φ_{u⁻}(u⁺)²",
        split,
    ));
    checks.push(finish(
        "nehari_additivity",
        "J'(u)u = J'(u)u⁺ + J'(u)u⁻",
        additivity,
    ));

    // Central differences of J against J'(u)v, and the Riesz representative.
    let (mut slope, mut riesz) = (Tally::new(), Tally::new());
    // Smooth, large-amplitude pairs: the nonlinear part must dominate the
    // third derivative, or rounding swamps the ε = 1e-4 rung. Pairs whose
    // ε = 1e-2 error already sits near the rounding floor of J carry no
    // slope information and are redrawn (at most 5 draws per pair).
    let eps = [1e-2, 1e-3, 1e-4];
    let want = cfg.n_samples.min(20);
    let mut redrawn = 0;
    let mut draws = 0;
    while slope.tested < want && draws < 5 * want {
        draws += 1;
        let u = smoothed(d, random_smooth_field(d, &mut rng, 2))?.scaled(5.0);
        let v = smoothed(d, random_smooth_field(d, &mut rng, 2))?.scaled(5.0);
        let dj = suite.directional(&u, &v)?;
        let mut errs = Vec::new();
        for e in eps {
            let fd = (suite.energy(&u.lin_comb(1.0, &v, e))?
                - suite.energy(&u.lin_comb(1.0, &v, -e))?)
                / (2.0 * e);
            errs.push((fd - dj).abs());
        }
        let magnitude = suite.norm_sq(&u)
            + suite.nonlocal(&u)?
            + d.integrate_map(&u, |x| nl.primitive(x).abs())?;
        let predicted = errs[0] * (eps[2] / eps[0]).powi(2);
        let floor = 100.0 * f64::EPSILON * magnitude / eps[2];
        if predicted < floor {
            redrawn += 1;
            continue;
        }
        let logs: Vec<f64> = errs
            .iter()
            .map(|e| e.max(f64::MIN_POSITIVE).log10())
            .collect();
        let fit = (logs[0] - logs[2]) / 2.0;
        slope.add((fit - 2.0).abs());
        let g = suite.h1_gradient(&u)?;
        riesz.add(relative(d.inner_h1(&g, &v)?, dj, dj.abs()));
    }
    if slope.tested < want {
        slope.worst = f64::INFINITY;
        slope.note = Some(format!(
            "only {} of {want} pairs rose above the rounding floor",
            slope.tested
        ));
    } else if redrawn > 0 {
        slope.note = Some(format!(
            "redrew {redrawn} pair(s) whose error sat at the rounding floor"
        ));
    }
    checks.push(finish(
        "gradient_consistency",
        "central differences of J match J'(u)v at second order",
        slope,
    ));
    checks.push(finish(
        "h1_gradient_consistency",
        "⟨g, v⟩ = J'(u)v for the H¹ gradient g",
        riesz,
    ));

    // Projection onto M; skipped when the reaction term fails (f3)/(f4),
    // since the projection then need not exist.
    let hyp_ok = check_hypotheses(nl, &default_samples()).all_passed();
    let names = [
        ("projection_residual", "Φ(t,s) = 0 after projection"),
        (
            "projection_containment",
            "scale-ups of points of M project into (0,1]²",
        ),
        (
            "sign_part_residual",
            "J'(w⁺)w⁺ = −∫∇w⁺·∇w⁻ − ∫φ_{w⁻}(w⁺)² on M",
        ),
    ];
    if !hyp_ok {
        for (n, c) in names {
            checks.push(skipped(
                n,
                c,
                "the reaction term violates the growth hypotheses",
            ));
        }
    } else {
        let (mut residual, mut contain, mut part) = (Tally::new(), Tally::new(), Tally::new());
        for (k, v) in fields.iter().take(50).enumerate() {
            let (_, _, res, _) = suite.project(v, 1e-10)?;
            residual.add(res);
            // Points of M are built with the reference projection so that a
            // faulty projection shows up in the checks, not in their inputs.
            let (first, c) = project_nodal_detailed(&suite.p, v, 1e-10)?;
            let (again, cw) = project_nodal_detailed(&suite.p, &c.point(first.t, first.s), 1e-13)?;
            let wm = cw.point(again.t, again.s);
            let (wp, wn) = (wm.positive_part(), wm.negative_part());
            let lhs = suite.directional(&wp, &wp)?;
            let rhs = -(dot(&d.stiffness(wp.values()), wn.values()) + suite.cross(&wn, &wp)?);
            part.add(relative(lhs, rhs, rhs.abs()));
            let scale = 1.0 + 2.0 * rng.gen_range(f64::EPSILON..=1.0);
            let (ts, ss, _, _) = suite.project(&wm.scaled(scale), 1e-10)?;
            let outside = [ts, ss]
                .iter()
                .map(|x| {
                    if *x > 0.0 {
                        (x - 1.0).max(0.0)
                    } else {
                        f64::INFINITY
                    }
                })
                .fold(0.0, f64::max);
            contain.add(outside);
            if k == 0 {
                contain.note = Some("scale factors drawn from (1, 3]".into());
            }
        }
        checks.push(finish(names[0].0, names[0].1, residual));
        checks.push(finish(names[1].0, names[1].1, contain));
        checks.push(finish(names[2].0, names[2].1, part));
    }

    checks.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(VerifyReport {
        passed: checks.iter().all(|c| c.passed),
        seed: cfg.seed,
        n_samples: cfg.n_samples,
        domain: d.describe(),
        nonlinearity: nl.describe(),
        mutation: cfg.mutation,
        smallest_eigenvalue: lambda1,
        bound_constant: c_hat,
        checks,
    })
}

/// `K⁻¹ M g`, rescaled to unit maximum.
fn smoothed(d: &GridDomain, g: Field) -> Result<Field> {
    let rhs: Vec<f64> = g
        .values()
        .iter()
        .zip(d.quad_weights())
        .map(|(a, w)| a * w)
        .collect();
    let u = d.field(stiffness_solve(d, &rhs, SUITE_POISSON_TOL)?.x)?;
    Ok(u.scaled(1.0 / u.max_abs()))
}

fn hypothesis_checks<R: Reaction + ?Sized>(nl: &R, mutation: Mutation) -> Vec<CheckResult> {
    let samples = default_samples();
    let replacement = match mutation {
        Mutation::CubicReaction => Some(Nonlinearity::pure_power_unchecked(1.0, 4.0)),
        Mutation::LinearReaction => Some(Nonlinearity::pure_power_unchecked(1.0, 2.0)),
        Mutation::SupercriticalReaction => Some(Nonlinearity::pure_power_unchecked(1.0, 6.5)),
        _ => None,
    };
    let report = match &replacement {
        Some(r) if mutation == Mutation::LinearReaction => {
            let sum = LinearPlus(r.terms()[0], nl);
            check_hypotheses(&sum, &samples)
        }
        Some(r) => check_hypotheses(r, &samples),
        None => check_hypotheses(nl, &samples),
    };
    report
        .checks
        .iter()
        .map(|c| CheckResult {
            name: format!("hypothesis_{}", c.name),
            claim: hypothesis_claim(c.name),
            tested: samples.len(),
            worst: if c.passed { 0.0 } else { 1.0 },
            tolerance: 0.0,
            passed: c.passed,
            note: (!c.passed).then(|| c.detail.clone()),
        })
        .collect()
}

fn hypothesis_claim(name: &str) -> &'static str {
    match name {
        "f1" => "f(s)/s → 0 as s → 0",
        "f2" => "f(s)/s⁵ → 0 as |s| → ∞",
        "f3" => "F(s)/s⁴ → ∞ as |s| → ∞",
        "f4" => "f(s)/s³ increasing in |s| > 0",
        "H_nonnegative" => "H(s) = s f(s) − 4F(s) ≥ 0",
        "H_increasing" => "H increasing in |s|",
        "sH_prime_positive" => "s²f'(s) − 3s f(s) > 0",
        _ => "growth hypothesis",
    }
}

/// `f + (linear term)`, used by the `LinearReaction` fault.
#[derive(Debug)]
struct LinearPlus<'a, R: Reaction + ?Sized>(PowerTerm, &'a R);

impl<R: Reaction + ?Sized> Reaction for LinearPlus<'_, R> {
    fn f(&self, s: f64) -> f64 {
        self.0.f(s) + self.1.f(s)
    }
    fn primitive(&self, s: f64) -> f64 {
        self.0.primitive(s) + self.1.primitive(s)
    }
    fn derivative(&self, s: f64) -> f64 {
        self.0.derivative(s) + self.1.derivative(s)
    }
}

/// Maximizes `N(u)/‖u‖⁴` by the fixed-point map `u ← K⁻¹ M φ_u u`
/// (normalized), the stationarity condition of the quotient. Returns the
/// best ratio seen, inflated by `1e-9` relative, and its maximizer.
fn fit_bound_constant<R: Reaction + ?Sized>(
    suite: &Suite<'_, R>,
    start: &Field,
) -> Result<(f64, Field)> {
    let d = suite.d();
    let mut u = start.scaled(1.0 / suite.norm_sq(start).sqrt());
    let mut best = (0.0, u.clone());
    for _ in 0..60 {
        let ratio = suite.nonlocal(&u)? / suite.norm_sq(&u).powi(2);
        if ratio > best.0 {
            best = (ratio, u.clone());
        }
        let phi = suite.phi(&u)?;
        let rhs: Vec<f64> = (0..u.len())
            .map(|i| d.quad_weights()[i] * phi.values()[i] * u.values()[i])
            .collect();
        let next = d.field(stiffness_solve(d, &rhs, suite.p.tol())?.x)?;
        let norm = suite.norm_sq(&next).sqrt();
        if !(norm > 0.0 && norm.is_finite()) {
            break;
        }
        u = next.scaled(1.0 / norm);
    }
    Ok((best.0 * (1.0 + 1e-9), best.1))
}

#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub kind: DomainKind,
    pub extent: f64,
    pub ladder: Vec<usize>,
    pub nonlinearity: Nonlinearity,
    pub opts: MinimizeOptions,
    /// Also run the nodal and ground-state descents per row.
    pub solve: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct StudyRow {
    pub n: usize,
    pub h: f64,
    pub poisson_error: Option<f64>,
    pub c0: Option<f64>,
    pub c_n: Option<f64>,
    pub errors: Vec<String>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceTable {
    pub rows: Vec<StudyRow>,
    /// `log(e_i / e_{i+1}) / log(h_i / h_{i+1})` for the Poisson oracle.
    pub poisson_orders: Vec<Option<f64>>,
    /// Successive-difference ratios `(c_i − c_{i+1}) / (c_{i+1} − c_{i+2})`.
    pub c0_ratios: Vec<Option<f64>>,
    pub c_n_ratios: Vec<Option<f64>>,
}

/// Max-norm relative error of the discrete potential against a closed form:
/// `(R² − r²)/6` for `−Δφ = 1` on balls, the first sine mode on boxes.
pub fn poisson_oracle_error(d: &GridDomain) -> Result<f64> {
    use std::f64::consts::PI;
    let r2 = d.extent() * d.extent();
    let (exact, source): (Field, Vec<f64>) = match d.kind() {
        DomainKind::RadialBall | DomainKind::Ball3d => (
            d.field_from_fn(|x| {
                let r = if d.kind().is_radial() {
                    x[0]
                } else {
                    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
                };
                (r2 - r * r) / 6.0
            })?,
            (0..d.len())
                .map(|i| if d.is_active(i) { 1.0 } else { 0.0 })
                .collect(),
        ),
        DomainKind::Box3d => {
            let l = d.extent();
            let mode = d.field_from_fn(|[x, y, z]| {
                (PI * x / l).sin() * (PI * y / l).sin() * (PI * z / l).sin()
            })?;
            let k = 3.0 * PI * PI / (l * l);
            let src = mode.values().iter().map(|v| k * v).collect();
            (mode, src)
        }
    };
    let rhs: Vec<f64> = source
        .iter()
        .zip(d.quad_weights())
        .map(|(s, w)| s * w)
        .collect();
    let phi = stiffness_solve(d, &rhs, 1e-13)?.x;
    let err = phi
        .iter()
        .zip(exact.values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    Ok(err / exact.max_abs())
}

fn ratios(values: &[Option<f64>]) -> Vec<Option<f64>> {
    values
        .windows(3)
        .map(|w| match (w[0], w[1], w[2]) {
            (Some(a), Some(b), Some(c)) if b != c => Some((a - b) / (b - c)),
            _ => None,
        })
        .collect()
}

/// Poisson-oracle error, `c₀` and `c_N` over a resolution ladder, with
/// empirical orders. Row failures are recorded and the study continues.
pub fn convergence_study(cfg: &StudyConfig) -> Result<ConvergenceTable> {
    if cfg.ladder.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "a convergence study needs at least 3 resolutions, got {}",
            cfg.ladder.len()
        )));
    }
    let mut rows = Vec::new();
    for &n in &cfg.ladder {
        let d = GridDomain::build(cfg.kind, n, cfg.extent)?;
        let mut row = StudyRow {
            n,
            h: d.h(),
            poisson_error: None,
            c0: None,
            c_n: None,
            errors: Vec::new(),
        };
        match poisson_oracle_error(&d) {
            Ok(e) => row.poisson_error = Some(e),
            Err(e) => row.errors.push(format!("poisson: {e}")),
        }
        if cfg.solve {
            let p = Problem::new(&d, &cfg.nonlinearity);
            match minimize_nodal(&p, &initial_guess(&d, InitStyle::Dipole, 0), &cfg.opts) {
                Ok(o) if o.converged() => row.c0 = Some(o.c0),
                Ok(o) => row
                    .errors
                    .push(format!("nodal descent ended {:?}", o.status)),
                Err(e) => row.errors.push(format!("nodal: {e}")),
            }
            match minimize_ground(&p, &ground_guess(&d), &cfg.opts) {
                Ok(o) if o.converged() => row.c_n = Some(o.c0),
                Ok(o) => row
                    .errors
                    .push(format!("ground descent ended {:?}", o.status)),
                Err(e) => row.errors.push(format!("ground: {e}")),
            }
        }
        rows.push(row);
    }
    let poisson_orders = rows
        .windows(2)
        .map(|w| match (w[0].poisson_error, w[1].poisson_error) {
            (Some(a), Some(b)) if a > 0.0 && b > 0.0 => Some((a / b).ln() / (w[0].h / w[1].h).ln()),
            _ => None,
        })
        .collect();
    let c0: Vec<Option<f64>> = rows.iter().map(|r| r.c0).collect();
    let cn: Vec<Option<f64>> = rows.iter().map(|r| r.c_n).collect();
    Ok(ConvergenceTable {
        poisson_orders,
        c0_ratios: ratios(&c0),
        c_n_ratios: ratios(&cn),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_samples_is_an_error() {
        let d = GridDomain::build_radial_grid(31, 1.0).unwrap();
        let nl = Nonlinearity::pure_power(1.0, 5.0).unwrap();
        let cfg = SuiteConfig {
            n_samples: 0,
            ..Default::default()
        };
        assert!(run_suite(&d, &nl, &cfg).is_err());
    }

    #[test]
    fn tolerance_table_is_sorted_and_complete() {
        let names: Vec<&str> = TOLERANCES.iter().map(|(n, _)| *n).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(names, sorted);
        let d = GridDomain::build_radial_grid(31, 1.0).unwrap();
        let nl = Nonlinearity::pure_power(1.0, 5.0).unwrap();
        let cfg = SuiteConfig {
            n_samples: 3,
            ..Default::default()
        };
        let report = run_suite(&d, &nl, &cfg).unwrap();
        for c in &report.checks {
            if !c.name.starts_with("hypothesis_") {
                assert!(
                    names.contains(&c.name.as_str()),
                    "{} has no tolerance entry",
                    c.name
                );
            }
        }
    }

    #[test]
    fn mutation_names_round_trip() {
        for m in Mutation::ALL {
            assert_eq!(m.as_str().parse::<Mutation>().unwrap(), m);
        }
    }

    #[test]
    fn short_ladder_is_rejected() {
        let cfg = StudyConfig {
            kind: DomainKind::RadialBall,
            extent: 1.0,
            ladder: vec![63, 127],
            nonlinearity: Nonlinearity::pure_power(1.0, 5.0).unwrap(),
            opts: MinimizeOptions::default(),
            solve: false,
        };
        assert!(convergence_study(&cfg).is_err());
    }
}
