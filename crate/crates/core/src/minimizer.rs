//! Projected Sobolev-gradient descent on `M` (least-energy nodal solution)
//! and on `N` (ground state).
//!
//! Each step moves against the `H¹` gradient, `u = w − α g`, and maps `u`
//! back with the Nehari projection; the first `α` in `1, ½, ¼, …` giving an
//! Armijo decrease of `J` is accepted.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::discretization::grid::dot;
use crate::discretization::{
    default_threshold, nodal_domains, random_smooth_field, DomainKind, Field, GridDomain,
    NodalReport,
};
use crate::energy::{covector_from_parts, gradient_from_covector};
use crate::error::{Error, Result};
use crate::nehari::{
    coefficients, project_nodal_detailed, sampled_dominance, Dominance, JacobianDiag,
    ScalarCoefficients, DEFAULT_PROJECTION_TOL,
};
use crate::nonlinearity::Reaction;
use crate::parallel::map_ordered;
use crate::problem::Problem;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStyle {
    /// Two opposite-sign Gaussian bumps (core and shell on radial grids).
    Dipole,
    /// Approximation of the second Dirichlet eigenfunction.
    Mode2,
    /// Seeded smoothed noise minus its mean.
    RandomSigned,
}

impl InitStyle {
    pub const ALL: [InitStyle; 3] = [InitStyle::Dipole, InitStyle::Mode2, InitStyle::RandomSigned];

    pub fn as_str(self) -> &'static str {
        match self {
            InitStyle::Dipole => "dipole",
            InitStyle::Mode2 => "mode2",
            InitStyle::RandomSigned => "random_signed",
        }
    }
}

impl fmt::Display for InitStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for InitStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "dipole" => Ok(InitStyle::Dipole),
            "mode2" => Ok(InitStyle::Mode2),
            "random_signed" | "random" => Ok(InitStyle::RandomSigned),
            other => Err(Error::Parse(format!(
                "unknown initial guess style `{other}`"
            ))),
        }
    }
}

/// A sign-changing starting field. `seed` only matters for `RandomSigned`.
pub fn initial_guess(d: &GridDomain, style: InitStyle, seed: u64) -> Field {
    let l = d.extent();
    let gauss = |x: [f64; 3], c: [f64; 3], sigma: f64| {
        let r2: f64 = (0..3).map(|i| (x[i] - c[i]).powi(2)).sum();
        (-r2 / (2.0 * sigma * sigma)).exp()
    };
    let field = match (style, d.kind()) {
        (InitStyle::Dipole, DomainKind::RadialBall) => d.field_from_fn(|[r, _, _]| {
            (-(r / (0.2 * l)).powi(2) / 2.0).exp()
                - (-((r - 0.6 * l) / (0.12 * l)).powi(2) / 2.0).exp()
        }),
        (InitStyle::Dipole, DomainKind::Box3d) => d.field_from_fn(|x| {
            let c = 0.5 * l;
            gauss(x, [0.25 * l, c, c], l / 8.0) - gauss(x, [0.75 * l, c, c], l / 8.0)
        }),
        (InitStyle::Dipole, DomainKind::Ball3d) => d.field_from_fn(|x| {
            gauss(x, [-0.5 * l, 0.0, 0.0], l / 4.0) - gauss(x, [0.5 * l, 0.0, 0.0], l / 4.0)
        }),
        (InitStyle::Mode2, DomainKind::RadialBall) => {
            d.field_from_fn(|[r, _, _]| (2.0 * PI * r / l).sin() / r)
        }
        (InitStyle::Mode2, DomainKind::Box3d) => d.field_from_fn(|[x, y, z]| {
            (2.0 * PI * x / l).sin() * (PI * y / l).sin() * (PI * z / l).sin()
        }),
        (InitStyle::Mode2, DomainKind::Ball3d) => d.field_from_fn(|[x, y, z]| {
            let r = (x * x + y * y + z * z).sqrt();
            x / l * (PI * r / (2.0 * l)).cos()
        }),
        (InitStyle::RandomSigned, _) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = random_smooth_field(d, &mut rng, 2);
            let mean = d.integrate(u.values()).expect("same domain") / d.volume();
            Ok(u.map(|v| v - mean))
        }
    };
    field.expect("initial guesses are finite on their own domain")
}

/// Samples a radial profile on a 3D grid by linear interpolation in `r`
/// (constant below the first node, linear to zero between the last node and
/// the boundary).
pub fn embed_radial(radial: &GridDomain, v: &Field, target: &GridDomain) -> Result<Field> {
    radial.check(v)?;
    if !radial.kind().is_radial() || target.kind().is_radial() {
        return Err(Error::InvalidArgument(
            "embed_radial maps a radial field onto a 3D grid".into(),
        ));
    }
    let (h, n, vals) = (radial.h(), radial.n(), v.values());
    let big_r = radial.extent();
    let at = |r: f64| -> f64 {
        if r >= big_r {
            return 0.0;
        }
        let x = r / h - 1.0;
        if x <= 0.0 {
            return vals[0];
        }
        let k = x.floor() as usize;
        let frac = x - k as f64;
        let lo = vals[k.min(n - 1)];
        let hi = if k + 1 < n { vals[k + 1] } else { 0.0 };
        if k >= n {
            0.0
        } else {
            lo + frac * (hi - lo)
        }
    };
    let values = (0..target.len())
        .map(|i| {
            if target.is_active(i) {
                at(target.node_radius(i))
            } else {
                0.0
            }
        })
        .collect();
    target.field(values)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MinimizeOptions {
    /// Stop when `‖g‖ ≤ tol_grad · ‖w‖`.
    pub tol_grad: f64,
    pub max_iter: usize,
    pub ls_shrink: f64,
    pub armijo: f64,
    pub initial_step: f64,
    pub max_shrinks: usize,
    pub proj_tol: f64,
    /// Reject trial points with `min ‖u±‖ < collapse_ratio · ‖u‖`.
    pub collapse_ratio: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            tol_grad: 1e-6,
            max_iter: 5000,
            ls_shrink: 0.5,
            armijo: 1e-4,
            initial_step: 1.0,
            max_shrinks: 40,
            proj_tol: DEFAULT_PROJECTION_TOL,
            collapse_ratio: 1e-3,
        }
    }
}

impl MinimizeOptions {
    fn validate(&self) -> Result<()> {
        let ok = self.tol_grad > 0.0
            && self.tol_grad < 1.0
            && self.max_iter > 0
            && self.ls_shrink > 0.0
            && self.ls_shrink < 1.0
            && self.armijo > 0.0
            && self.armijo < 1.0
            && self.initial_step > 0.0
            && self.proj_tol > 0.0
            && self.proj_tol < 1.0
            && self.collapse_ratio >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!(
                "invalid minimizer options {self:?}"
            )))
        }
    }
}

/// One accepted iterate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct IterationRecord {
    pub iter: usize,
    #[serde(rename = "J")]
    pub j: f64,
    pub grad_norm: f64,
    /// Scales that placed this iterate on the constraint set.
    pub t: f64,
    pub s: f64,
    pub norm_plus: f64,
    pub norm_minus: f64,
    pub nonlocal: f64,
    /// `∫φ_{w⁻}(w⁺)²`.
    pub cross: f64,
    pub lp_plus: f64,
    pub lp_minus: f64,
    pub step: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    MaxIter,
    /// The line search found no descent after the shrink budget.
    Stationary,
}

#[derive(Clone, Debug)]
pub struct MinimizerState {
    pub w: Field,
    pub c: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub iter: usize,
    pub history: Vec<IterationRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveKind {
    Nodal,
    Ground,
}

/// Energy bounds and the empirical floors along the run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EnergyBoundReport {
    #[serde(rename = "J")]
    pub j: f64,
    pub norm: f64,
    /// `J(w) − ‖w‖²/4`.
    pub gap: f64,
    /// `∫H(w)`.
    pub h_integral: f64,
    pub holds: bool,
    pub exponent: f64,
    pub norm_plus: f64,
    pub norm_minus: f64,
    pub lp_plus: f64,
    pub lp_minus: f64,
    pub min_norm_plus: f64,
    pub min_norm_minus: f64,
    pub min_lp_plus: f64,
    pub min_lp_minus: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveOutcome {
    pub kind: SolveKind,
    #[serde(skip)]
    pub w: Field,
    pub c0: f64,
    pub status: RunStatus,
    pub grad_norm: f64,
    pub norm: f64,
    pub iterations: usize,
    #[serde(skip)]
    pub history: Vec<IterationRecord>,
    pub monotone: bool,
    pub nodal: NodalReport,
    pub energy_bound: EnergyBoundReport,
    pub jacobian: Option<JacobianDiag>,
    pub dominance: Option<Dominance>,
    pub ground_energy: Option<f64>,
    /// More than two nodal domains: an excited state, not a candidate for `c₀`.
    pub excited: bool,
}

impl SolveOutcome {
    pub fn converged(&self) -> bool {
        self.status == RunStatus::Converged
    }

    pub fn state(&self) -> MinimizerState {
        MinimizerState {
            w: self.w.clone(),
            c: self.c0,
            grad_norm: self.grad_norm,
            step: self.history.last().map_or(0.0, |r| r.step),
            iter: self.iterations,
            history: self.history.clone(),
        }
    }
}

/// A point on the constraint set with everything the descent needs.
struct Point {
    w: Field,
    phi: Field,
    j: f64,
    norm_sq: f64,
    record: IterationRecord,
}

fn lp_exponent<R: Reaction + ?Sized>(nl: &R) -> f64 {
    nl.power_terms()
        .and_then(|t| t.first())
        .map_or(5.0, |t| t.exponent)
}

fn lp_norm(d: &GridDomain, u: &Field, p: f64) -> f64 {
    d.integrate_map(u, |x| x.abs().powf(p)).unwrap_or(f64::NAN)
}

fn nodal_point<R: Reaction + ?Sized>(
    p: &Problem<'_, R>,
    v: &Field,
    proj_tol: f64,
) -> Result<Point> {
    let (res, c) = project_nodal_detailed(p, v, proj_tol)?;
    let (t, s) = (res.t, res.s);
    let w = c.point(t, s);
    let wp = c.v_plus.scaled(t);
    let wm = c.v_minus.scaled(s);
    let e = lp_exponent(p.nl);
    Ok(Point {
        phi: c.potential_at(t, s),
        j: c.eval_h(p.nl, t, s),
        norm_sq: t * t * c.a_plus + s * s * c.a_minus + 2.0 * t * s * c.grad_cross,
        record: IterationRecord {
            iter: 0,
            j: c.eval_h(p.nl, t, s),
            grad_norm: f64::NAN,
            t,
            s,
            norm_plus: t * c.a_plus.sqrt(),
            norm_minus: s * c.a_minus.sqrt(),
            nonlocal: c.nonlocal_at(t, s),
            cross: t * t * s * s * c.d,
            lp_plus: lp_norm(p.domain, &wp, e),
            lp_minus: lp_norm(p.domain, &wm, e),
            step: 0.0,
        },
        w,
    })
}

fn ground_point<R: Reaction + ?Sized>(
    p: &Problem<'_, R>,
    v: &Field,
    proj_tol: f64,
) -> Result<Point> {
    let u = v.positive_part();
    let c = ScalarCoefficients::new(p, &u)?;
    let res = c.solve(p.nl, proj_tol)?;
    if !res.converged {
        return Err(Error::NotConverged {
            solver: "scalar projection",
            iterations: res.iterations,
            residual: res.residual / c.a,
        });
    }
    let t = res.t;
    let phi = p.poisson.solve_phi(&u)?.phi.scaled(t * t);
    let w = u.scaled(t);
    let j = c.energy(p.nl, t);
    Ok(Point {
        phi,
        j,
        norm_sq: t * t * c.a,
        record: IterationRecord {
            iter: 0,
            j,
            grad_norm: f64::NAN,
            t,
            s: 0.0,
            norm_plus: t * c.a.sqrt(),
            norm_minus: 0.0,
            nonlocal: t.powi(4) * c.b,
            cross: 0.0,
            lp_plus: lp_norm(p.domain, &w, lp_exponent(p.nl)),
            lp_minus: 0.0,
            step: 0.0,
        },
        w,
    })
}

/// `(g, ‖g‖_{H¹})` at a constraint point, reusing its potential.
fn gradient<R: Reaction + ?Sized>(p: &Problem<'_, R>, pt: &Point) -> Result<(Field, f64)> {
    let ku = p.domain.stiffness(pt.w.values());
    let r = covector_from_parts(p, &pt.w, &ku, pt.phi.values());
    let g = gradient_from_covector(p, &r)?;
    let norm = dot(&r, g.values()).max(0.0).sqrt();
    Ok((g, norm))
}

fn descend<R: Reaction + ?Sized>(
    p: &Problem<'_, R>,
    u0: &Field,
    opts: &MinimizeOptions,
    kind: SolveKind,
) -> Result<(Point, RunStatus, f64, Vec<IterationRecord>)> {
    opts.validate()?;
    let project = |v: &Field| match kind {
        SolveKind::Nodal => nodal_point(p, v, opts.proj_tol),
        SolveKind::Ground => ground_point(p, v, opts.proj_tol),
    };
    let mut pt = project(u0)?;
    let mut history = Vec::new();
    let mut iter = 0;
    loop {
        let (g, gnorm) = gradient(p, &pt)?;
        pt.record.iter = iter;
        pt.record.grad_norm = gnorm;
        history.push(pt.record);
        if gnorm <= opts.tol_grad * pt.norm_sq.sqrt() {
            return Ok((pt, RunStatus::Converged, gnorm, history));
        }
        if iter >= opts.max_iter {
            return Ok((pt, RunStatus::MaxIter, gnorm, history));
        }
        let mut alpha = opts.initial_step;
        let mut accepted = None;
        for _ in 0..opts.max_shrinks {
            let u = pt.w.lin_comb(1.0, &g, -alpha);
            if kind == SolveKind::Nodal && collapsed(p.domain, &u, opts.collapse_ratio) {
                alpha *= opts.ls_shrink;
                continue;
            }
            if let Ok(trial) = project(&u) {
                if trial.j < pt.j - opts.armijo * alpha * gnorm * gnorm {
                    accepted = Some(trial);
                    break;
                }
            }
            alpha *= opts.ls_shrink;
        }
        match accepted {
            Some(mut next) => {
                next.record.step = alpha;
                pt = next;
                iter += 1;
            }
            None => return Ok((pt, RunStatus::Stationary, gnorm, history)),
        }
    }
}

fn collapsed(d: &GridDomain, u: &Field, ratio: f64) -> bool {
    let norm = |v: &Field| d.norm_h1(v).unwrap_or(0.0);
    let total = norm(u);
    let (a, b) = (norm(&u.positive_part()), norm(&u.negative_part()));
    a.min(b) < ratio * total || !total.is_finite()
}

/// `J(w) ≥ ‖w‖²/4` (up to `1e-8 J`) and the empirical floors of `‖w±‖` and
/// `∫|w±|^p` over the run. Errors when the inequality fails.
pub fn energy_bound_diagnostics<R: Reaction + ?Sized>(
    p: &Problem<'_, R>,
    w: &Field,
    history: &[IterationRecord],
) -> Result<EnergyBoundReport> {
    let e = crate::energy::energy(p, w)?;
    let d = p.domain;
    let exponent = lp_exponent(p.nl);
    let gap = e.j - 0.25 * e.norm_sq;
    let holds = gap >= -1e-8 * e.j.abs();
    let (wp, wm) = (w.positive_part(), w.negative_part());
    let min = |f: fn(&IterationRecord) -> f64| history.iter().map(f).fold(f64::INFINITY, f64::min);
    let report = EnergyBoundReport {
        j: e.j,
        norm: e.norm_sq.sqrt(),
        gap,
        h_integral: d.integrate_map(w, |x| p.nl.h_function(x))?,
        holds,
        exponent,
        norm_plus: d.norm_h1(&wp)?,
        norm_minus: d.norm_h1(&wm)?,
        lp_plus: lp_norm(d, &wp, exponent),
        lp_minus: lp_norm(d, &wm, exponent),
        min_norm_plus: min(|r| r.norm_plus),
        min_norm_minus: min(|r| r.norm_minus),
        min_lp_plus: min(|r| r.lp_plus),
        min_lp_minus: min(|r| r.lp_minus),
    };
    if !holds {
        return Err(Error::InvalidArgument(format!(
            "J(w) = {} < ‖w‖²/4 = {}: the iterate is not on the Nehari set",
            e.j,
            0.25 * e.norm_sq
        )));
    }
    Ok(report)
}

fn is_monotone(history: &[IterationRecord]) -> bool {
    history.windows(2).all(|w| w[1].j < w[0].j)
}

/// Least-energy nodal solution from a sign-changing start.
pub fn minimize_nodal<R: Reaction + ?Sized>(
    p: &Problem<'_, R>,
    u0: &Field,
    opts: &MinimizeOptions,
) -> Result<SolveOutcome> {
    let (pt, status, grad_norm, history) = descend(p, u0, opts, SolveKind::Nodal)?;
    let nodal = nodal_domains(p.domain, &pt.w, default_threshold(&pt.w))?;
    let energy_bound = energy_bound_diagnostics(p, &pt.w, &history)?;
    let cw = coefficients(p, &pt.w)?;
    Ok(SolveOutcome {
        kind: SolveKind::Nodal,
        c0: pt.j,
        status,
        grad_norm,
        norm: pt.norm_sq.sqrt(),
        iterations: history.len() - 1,
        monotone: is_monotone(&history),
        excited: nodal.count > 2,
        nodal,
        energy_bound,
        jacobian: Some(JacobianDiag::from_coefficients(&cw, p.nl)),
        dominance: Some(sampled_dominance(&cw, p.nl)),
        ground_energy: None,
        history,
        w: pt.w,
    })
}

/// Ground state on `N` from a non-negative start; trial points are clipped to
/// their positive part before projection.
pub fn minimize_ground<R: Reaction + ?Sized>(
    p: &Problem<'_, R>,
    u0: &Field,
    opts: &MinimizeOptions,
) -> Result<SolveOutcome> {
    if u0.values().iter().any(|v| *v < 0.0) {
        return Err(Error::InvalidArgument(
            "the ground-state descent needs a non-negative start".into(),
        ));
    }
    let (pt, status, grad_norm, history) = descend(p, u0, opts, SolveKind::Ground)?;
    let nodal = nodal_domains(p.domain, &pt.w, default_threshold(&pt.w))?;
    let energy_bound = energy_bound_diagnostics(p, &pt.w, &history)?;
    Ok(SolveOutcome {
        kind: SolveKind::Ground,
        c0: pt.j,
        status,
        grad_norm,
        norm: pt.norm_sq.sqrt(),
        iterations: history.len() - 1,
        monotone: is_monotone(&history),
        excited: false,
        nodal,
        energy_bound,
        jacobian: None,
        dominance: None,
        ground_energy: Some(pt.j),
        history,
        w: pt.w,
    })
}

/// Non-negative start for the ground-state descent: `|dipole|`.
pub fn ground_guess(d: &GridDomain) -> Field {
    initial_guess(d, InitStyle::Dipole, 0).map(f64::abs)
}

#[derive(Clone, Debug)]
pub struct MultistartRun {
    pub style: InitStyle,
    pub outcome: std::result::Result<SolveOutcome, String>,
}

#[derive(Clone, Debug)]
pub struct MultistartReport {
    pub runs: Vec<MultistartRun>,
    /// Lowest-energy converged run with exactly two nodal domains.
    pub best: Option<usize>,
    /// All such runs agree on `c₀` within `1e-4` relative.
    pub agree: bool,
    pub warnings: Vec<String>,
}

impl MultistartReport {
    pub fn best_outcome(&self) -> Option<&SolveOutcome> {
        self.best.and_then(|i| self.runs[i].outcome.as_ref().ok())
    }
}

/// Independent descents from several starts, run on up to `threads` workers.
pub fn multistart<R: Reaction + ?Sized>(
    p: &Problem<'_, R>,
    styles: &[InitStyle],
    seed: u64,
    opts: &MinimizeOptions,
    threads: usize,
) -> MultistartReport {
    let outcomes = map_ordered(styles, threads, |style| {
        let u0 = initial_guess(p.domain, *style, seed);
        minimize_nodal(p, &u0, opts).map_err(|e| e.to_string())
    });
    let runs: Vec<MultistartRun> = styles
        .iter()
        .zip(outcomes)
        .map(|(style, outcome)| MultistartRun {
            style: *style,
            outcome,
        })
        .collect();
    let mut warnings = Vec::new();
    let mut candidates = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        match &run.outcome {
            Ok(o) if o.converged() && o.nodal.count == 2 => candidates.push((i, o.c0)),
            Ok(o) if o.excited => warnings.push(format!(
                "{} start reached an excited state with {} nodal domains (J = {})",
                run.style, o.nodal.count, o.c0
            )),
            Ok(o) => warnings.push(format!(
                "{} start ended {:?} with {} nodal domains",
                run.style, o.status, o.nodal.count
            )),
            Err(e) => warnings.push(format!("{} start failed: {e}", run.style)),
        }
    }
    let best = candidates
        .iter()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(i, _)| *i);
    let agree = match best {
        Some(b) => {
            let c = candidates
                .iter()
                .find(|(i, _)| *i == b)
                .map_or(0.0, |x| x.1);
            candidates
                .iter()
                .all(|(_, v)| (v - c).abs() <= 1e-4 * c.abs())
        }
        None => false,
    };
    if best.is_some() && !agree {
        warnings.push("starts disagree on c0 beyond 1e-4 relative; reporting the smallest".into());
    }
    MultistartReport {
        runs,
        best,
        agree,
        warnings,
    }
}
