//! The reaction term `f`, its primitive `F` and derivative `f'`.
//!
//! Built-in families are sums of odd power laws `c |s|^{e-2} s` with every
//! exponent in `(4, 6)`: subcritical and strictly super-quartic, so that
//! `f(s)/s³` is increasing and `H(s) = s f(s) - 4 F(s)` is positive. Other
//! reaction terms plug in through [`Reaction`]; [`check_hypotheses`] tests
//! the growth and monotonicity conditions on samples.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Extension point for reaction terms.
pub trait Reaction: Send + Sync + fmt::Debug {
    fn f(&self, s: f64) -> f64;

    /// `F(s) = ∫₀ˢ f`.
    fn primitive(&self, s: f64) -> f64;

    fn derivative(&self, s: f64) -> f64;

    /// Power-law decomposition, when available. Lets ray integrals such as
    /// `∫ f(t v) v` collapse to a handful of precomputed moments.
    fn power_terms(&self) -> Option<&[PowerTerm]> {
        None
    }

    fn describe(&self) -> String {
        format!("{self:?}")
    }

    /// `H(s) = s f(s) - 4 F(s)`.
    fn h_function(&self, s: f64) -> f64 {
        s * self.f(s) - 4.0 * self.primitive(s)
    }
}

/// `coef · |s|^{exponent-2} s`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerTerm {
    pub coef: f64,
    pub exponent: f64,
}

impl PowerTerm {
    #[inline]
    pub fn f(&self, s: f64) -> f64 {
        self.coef * s.abs().powf(self.exponent - 2.0) * s
    }

    #[inline]
    pub fn primitive(&self, s: f64) -> f64 {
        self.coef * s.abs().powf(self.exponent) / self.exponent
    }

    #[inline]
    pub fn derivative(&self, s: f64) -> f64 {
        self.coef * (self.exponent - 1.0) * s.abs().powf(self.exponent - 2.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Form {
    PurePower,
    TwoPower,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Nonlinearity {
    form: Form,
    terms: Vec<PowerTerm>,
}

fn check_exponent(name: &str, e: f64) -> Result<()> {
    if !(e > 4.0 && e < 6.0) {
        return Err(Error::InvalidNonlinearity(format!(
            "{name} = {e} must lie in the open interval (4, 6)"
        )));
    }
    Ok(())
}

impl Nonlinearity {
    /// `f(s) = λ |s|^{p-2} s`.
    pub fn pure_power(lambda: f64, p: f64) -> Result<Self> {
        check_exponent("p", p)?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidNonlinearity(format!(
                "lambda = {lambda} must be positive"
            )));
        }
        Ok(Self::pure_power_unchecked(lambda, p))
    }

    /// `f(s) = λ |s|^{p-2} s + μ |s|^{q-2} s`.
    pub fn two_power(lambda: f64, p: f64, mu: f64, q: f64) -> Result<Self> {
        check_exponent("p", p)?;
        check_exponent("q", q)?;
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidNonlinearity(format!(
                "lambda = {lambda} must be positive"
            )));
        }
        if !(mu >= 0.0 && mu.is_finite()) {
            return Err(Error::InvalidNonlinearity(format!(
                "mu = {mu} must be non-negative"
            )));
        }
        Ok(Nonlinearity {
            form: Form::TwoPower,
            terms: vec![
                PowerTerm {
                    coef: lambda,
                    exponent: p,
                },
                PowerTerm {
                    coef: mu,
                    exponent: q,
                },
            ],
        })
    }

    /// Skips the exponent range check. Only meant for exercising the
    /// hypothesis checks with deliberately bad exponents.
    pub fn pure_power_unchecked(lambda: f64, p: f64) -> Self {
        Nonlinearity {
            form: Form::PurePower,
            terms: vec![PowerTerm {
                coef: lambda,
                exponent: p,
            }],
        }
    }

    pub fn form(&self) -> Form {
        self.form
    }

    pub fn lambda(&self) -> f64 {
        self.terms[0].coef
    }

    pub fn p(&self) -> f64 {
        self.terms[0].exponent
    }

    pub fn mu(&self) -> Option<f64> {
        self.terms.get(1).map(|t| t.coef)
    }

    pub fn q(&self) -> Option<f64> {
        self.terms.get(1).map(|t| t.exponent)
    }

    pub fn terms(&self) -> &[PowerTerm] {
        &self.terms
    }
}

impl Reaction for Nonlinearity {
    fn f(&self, s: f64) -> f64 {
        self.terms.iter().map(|t| t.f(s)).sum()
    }

    fn primitive(&self, s: f64) -> f64 {
        self.terms.iter().map(|t| t.primitive(s)).sum()
    }

    fn derivative(&self, s: f64) -> f64 {
        self.terms.iter().map(|t| t.derivative(s)).sum()
    }

    fn power_terms(&self) -> Option<&[PowerTerm]> {
        Some(&self.terms)
    }

    fn describe(&self) -> String {
        match self.form {
            Form::PurePower => format!("pure_power lambda={} p={}", self.lambda(), self.p()),
            Form::TwoPower => format!(
                "two_power lambda={} p={} mu={} q={}",
                self.lambda(),
                self.p(),
                self.mu().unwrap_or(0.0),
                self.q().unwrap_or(0.0)
            ),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HypothesisReport {
    pub checks: Vec<HypothesisCheck>,
}

impl HypothesisReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&'static str> {
        self.checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name)
            .collect()
    }

    pub fn get(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// `±10^k` for `k` from -6 to 3 in steps of 0.1.
pub fn default_samples() -> Vec<f64> {
    let mut out = Vec::with_capacity(182);
    for i in 0..=90 {
        let s = 10f64.powf(-6.0 + i as f64 * 0.1);
        out.push(s);
        out.push(-s);
    }
    out
}

/// Checks `(f1)`–`(f4)` and the properties of `H` on the given samples.
/// Limits are judged by monotone approach along the samples.
pub fn check_hypotheses<R: Reaction + ?Sized>(nl: &R, samples: &[f64]) -> HypothesisReport {
    let mut mags: Vec<f64> = samples
        .iter()
        .map(|s| s.abs())
        .filter(|s| *s > 0.0)
        .collect();
    mags.sort_by(f64::total_cmp);
    mags.dedup();
    let mut checks = Vec::new();

    // (|s|, g(|s|), g(-|s|)) for every sampled magnitude in range.
    let both_signs =
        |g: &dyn Fn(f64) -> f64, range: &dyn Fn(f64) -> bool| -> Vec<(f64, f64, f64)> {
            mags.iter()
                .filter(|m| range(**m))
                .map(|&m| (m, g(m), g(-m)))
                .collect()
        };

    let f1 = both_signs(&|s| (nl.f(s) / s).abs(), &|m| m <= 1.0);
    checks.push(monotone(
        "f1",
        &f1,
        Direction::NonDecreasing,
        "f(s)/s does not decay as s -> 0",
        |vals| {
            let (first, last) = (vals.first(), vals.last());
            match (first, last) {
                (Some(a), Some(b)) => a.1.max(a.2) <= 1e-3 * b.1.max(b.2).max(f64::MIN_POSITIVE),
                _ => false,
            }
        },
    ));

    let f2 = both_signs(&|s| (nl.f(s) / s.powi(5)).abs(), &|m| m >= 1.0);
    checks.push(monotone(
        "f2",
        &f2,
        Direction::Increasing(false),
        "f(s)/s^5 does not decay as |s| -> inf",
        |v| !v.is_empty(),
    ));

    let f3 = both_signs(&|s| nl.primitive(s) / s.powi(4), &|m| m >= 1.0);
    checks.push(monotone(
        "f3",
        &f3,
        Direction::Increasing(true),
        "F(s)/s^4 does not grow as |s| -> inf",
        |v| !v.is_empty(),
    ));

    let f4 = both_signs(&|s| nl.f(s) / s.powi(3), &|_| true);
    checks.push(monotone(
        "f4",
        &f4,
        Direction::Increasing(true),
        "f(s)/s^3 is not increasing in |s|",
        |v| !v.is_empty(),
    ));

    let h = both_signs(&|s| nl.h_function(s), &|_| true);
    let neg = h.iter().find(|(_, a, b)| *a < 0.0 || *b < 0.0);
    checks.push(HypothesisCheck {
        name: "H_nonnegative",
        passed: neg.is_none(),
        detail: match neg {
            Some((m, a, b)) => format!("H(±{m:e}) = ({a:e}, {b:e}) < 0"),
            None => "ok".into(),
        },
    });
    checks.push(monotone(
        "H_increasing",
        &h,
        Direction::Increasing(true),
        "H is not increasing in |s|",
        |v| !v.is_empty(),
    ));

    let sh = both_signs(&|s| s * s * nl.derivative(s) - 3.0 * s * nl.f(s), &|_| true);
    let bad = sh.iter().find(|(_, a, b)| !(*a > 0.0 && *b > 0.0));
    checks.push(HypothesisCheck {
        name: "sH_prime_positive",
        passed: bad.is_none(),
        detail: match bad {
            Some((m, a, b)) => format!("s^2 f'(s) - 3 s f(s) at ±{m:e} = ({a:e}, {b:e})"),
            None => "ok".into(),
        },
    });

    HypothesisReport { checks }
}

#[derive(Clone, Copy)]
enum Direction {
    NonDecreasing,
    /// `true`: strictly increasing; `false`: strictly decreasing.
    Increasing(bool),
}

fn monotone(
    name: &'static str,
    vals: &[(f64, f64, f64)],
    dir: Direction,
    message: &str,
    extra: impl Fn(&[(f64, f64, f64)]) -> bool,
) -> HypothesisCheck {
    let ok = |a: f64, b: f64| match dir {
        Direction::NonDecreasing => b >= a,
        Direction::Increasing(true) => b > a,
        Direction::Increasing(false) => b < a,
    };
    for w in vals.windows(2) {
        let (m0, a0, b0) = w[0];
        let (m1, a1, b1) = w[1];
        if !(ok(a0, a1) && ok(b0, b1)) {
            return HypothesisCheck {
                name,
                passed: false,
                detail: format!("{message} between |s| = {m0:e} and {m1:e}"),
            };
        }
    }
    if !extra(vals) {
        return HypothesisCheck {
            name,
            passed: false,
            detail: message.to_string(),
        };
    }
    HypothesisCheck {
        name,
        passed: true,
        detail: "ok".into(),
    }
}
