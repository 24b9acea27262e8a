//! Existence of Stieltjes classes for `Y = a^X`.
//!
//! Four routes are available: closed-form rules for the Poisson and Heine
//! families, a finite-horizon growth test on
//! `w_j = ln p_j + (j(j-1)/2) ln a`, a threshold test driven by the growth
//! constant `beta = lim ln f(r) / ln^2 r` of the generating function, and
//! the trivial bounded-support case `0 < a < 1`.

use std::cmp::Ordering;

use serde::Serialize;

use crate::distributions::{ConcavityOutcome, DiscretePmf, Family, LogTransformSpec};
use crate::numeric::Scalar;
use crate::{Error, Result};

/// Default index horizon for the growth test.
pub const DEFAULT_HORIZON: usize = 500;

/// Bits used for diagnostic logarithms, which carry no certificate.
const DIAGNOSTIC_BITS: u32 = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Exists,
    NotExists,
    Boundary,
    Unknown,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Route {
    FamilyRule,
    ConditionW,
    DecayRule,
    BetaThreshold,
    BoundedSupport,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Evidence {
    pub name: String,
    pub value: Scalar,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Classification {
    pub verdict: Verdict,
    pub route: Route,
    pub evidence: Vec<Evidence>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Classification {
    fn new(verdict: Verdict, route: Route) -> Self {
        Classification { verdict, route, evidence: Vec::new(), notes: Vec::new() }
    }

    fn with(mut self, name: &str, value: Scalar) -> Self {
        self.evidence.push(Evidence { name: name.into(), value });
        self
    }

    fn note(mut self, text: impl Into<String>) -> Self {
        self.notes.push(text.into());
        self
    }

    pub fn evidence(&self, name: &str) -> Option<&Scalar> {
        self.evidence.iter().find(|e| e.name == name).map(|e| &e.value)
    }
}

/// Note attached to every `Boundary` verdict from the growth-constant route.
pub const BOUNDARY_NOTE: &str =
    "a sits at the growth threshold; the growth constant alone cannot settle existence here and more knowledge of the distribution is required";

/// Rejects `a <= 0` and `a = 1`; returns `Some` for the bounded-support case.
fn screen_base(a: &Scalar) -> Result<Option<Classification>> {
    match a.sign() {
        Some(Ordering::Greater) => {}
        _ => return Err(Error::Domain(format!("a must be positive, got {a}"))),
    }
    match a.cmp_certain(&Scalar::one()) {
        Some(Ordering::Greater) => Ok(None),
        Some(Ordering::Less) => Ok(Some(
            Classification::new(Verdict::NotExists, Route::BoundedSupport)
                .with("a", a.clone())
                .note("support lies in (0, 1], so the moment problem is determinate"),
        )),
        _ => Err(Error::Domain(format!("a = 1 is excluded, got {a}"))),
    }
}

/// Closed-form verdicts for the Poisson and Heine families.
pub fn classify_family(family: &Family, a: &Scalar) -> Result<Classification> {
    if let Some(c) = screen_base(a)? {
        return Ok(c);
    }
    match family {
        Family::Poisson { lambda } => {
            Ok(Classification::new(Verdict::Exists, Route::FamilyRule).with("a", a.clone()).with("lambda", lambda.clone()))
        }
        Family::Heine { lambda, q } => {
            let threshold = q.value().recip()?;
            let scaled = lambda * &(&Scalar::one() - q.value());
            let verdict = match a.cmp_certain(&threshold) {
                Some(Ordering::Greater) => Verdict::Exists,
                Some(Ordering::Less) => Verdict::NotExists,
                Some(Ordering::Equal) => match scaled.cmp_certain(&Scalar::one()) {
                    Some(Ordering::Less) => Verdict::NotExists,
                    Some(_) => Verdict::Exists,
                    None => Verdict::Unknown,
                },
                None => Verdict::Unknown,
            };
            let c = Classification::new(verdict, Route::FamilyRule)
                .with("a", a.clone())
                .with("threshold", threshold)
                .with("lambda_times_one_minus_q", scaled);
            Ok(if verdict == Verdict::Unknown { c.note("a cannot be separated from 1/q at this precision") } else { c })
        }
        Family::Table(_) => Err(Error::Domain("no closed-form rule for table distributions".into())),
    }
}

/// Finite-horizon growth test.
///
/// With `e_j = (p_{j+1} / p_j) a^j` (exact for rational parameters),
/// `w_{j+1} - w_j = ln e_j`. Over the last fifth of the horizon: all
/// `e_j >= 1` gives `Exists`; all `e_j < 1` and non-increasing gives
/// `NotExists` (w falls at least linearly); anything else is `Unknown`.
pub fn test_condition_w(d: &DiscretePmf, t: &LogTransformSpec, horizon: usize) -> Result<Classification> {
    if horizon < 5 {
        return Err(Error::Domain("horizon must be at least 5".into()));
    }
    let a = t.a();
    let one = Scalar::one();
    let window_start = horizon - horizon / 5;
    let mut w = d.log_pmf(0)?.approximate(DIAGNOSTIC_BITS);
    let mut w_min = w.clone();
    let mut w_min_index = 0;
    let mut all_at_least_one = true;
    let mut all_below_one = true;
    let mut non_increasing = true;
    let mut prev_e: Option<Scalar> = None;
    let mut tail_low: Option<Scalar> = None;
    let mut tail_high: Option<Scalar> = None;
    let mut a_pow = one.clone();
    for j in 0..horizon {
        if d.weight(j + 1)?.is_zero() {
            return Err(Error::Support { index: j + 1 });
        }
        let e = &d.ratio(j)? * &a_pow;
        a_pow = &a_pow * a;
        let ln_e = e.ln(DIAGNOSTIC_BITS)?;
        w = &w + &ln_e;
        if w.to_f64() < w_min.to_f64() {
            w_min = w.clone();
            w_min_index = j + 1;
        }
        if j < window_start {
            continue;
        }
        all_at_least_one &= matches!(e.cmp_certain(&one), Some(Ordering::Greater | Ordering::Equal));
        all_below_one &= e.certainly_lt(&one);
        if let Some(p) = &prev_e {
            non_increasing &= e.certainly_le(p);
        }
        let lo = tail_low.take().map_or(ln_e.clone(), |v| if ln_e.to_f64() < v.to_f64() { ln_e.clone() } else { v });
        let hi = tail_high.take().map_or(ln_e.clone(), |v| if ln_e.to_f64() > v.to_f64() { ln_e.clone() } else { v });
        tail_low = Some(lo);
        tail_high = Some(hi);
        prev_e = Some(e);
    }
    let (verdict, route) = if all_at_least_one {
        (Verdict::Exists, Route::ConditionW)
    } else if all_below_one && non_increasing {
        (Verdict::NotExists, Route::DecayRule)
    } else {
        (Verdict::Unknown, Route::ConditionW)
    };
    let mut c = Classification::new(verdict, route)
        .with("a", a.clone())
        .with("horizon", Scalar::from_int(horizon as i64))
        .with("w_min", w_min)
        .with("w_min_index", Scalar::from_int(w_min_index as i64))
        .with("w_horizon", w)
        .with("tail_log_step_min", tail_low.expect("window is nonempty"))
        .with("tail_log_step_max", tail_high.expect("window is nonempty"));
    if verdict == Verdict::Unknown {
        c = c.note("tail window is ambiguous; a finite horizon cannot decide the limit");
    }
    Ok(c)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BetaEstimate {
    /// `ln f(r) / ln^2 r` at each grid point.
    pub samples: Vec<Scalar>,
    /// Successive differences of the samples.
    pub differences: Vec<f64>,
    /// Last sample, or `None` when the samples do not settle.
    pub beta: Option<Scalar>,
}

impl BetaEstimate {
    pub fn last_difference(&self) -> f64 {
        *self.differences.last().expect("grid has at least four points")
    }
}

/// `2^10, 2^20, ..., 2^60`.
pub fn default_grid() -> Vec<Scalar> {
    (1..=6).map(|i| Scalar::from_int(2).powi(10 * i).expect("positive base")).collect()
}

/// Samples `ln f(r) / ln^2 r` on a grid. The samples are reported as
/// settling when the last difference is smaller in size than the one
/// before it; no error bound on the limit is claimed.
pub fn estimate_beta(d: &DiscretePmf, grid: &[Scalar]) -> Result<BetaEstimate> {
    if grid.len() < 4 {
        return Err(Error::Domain("beta grid needs at least four points".into()));
    }
    let one = Scalar::one();
    for pair in grid.windows(2) {
        if !one.certainly_lt(&pair[0]) || !pair[0].certainly_lt(&pair[1]) {
            return Err(Error::Domain("beta grid must be increasing and above 1".into()));
        }
    }
    let mut samples = Vec::with_capacity(grid.len());
    for r in grid {
        let ln_f = d.ln_pgf(r, DIAGNOSTIC_BITS)?;
        let ln_r = r.ln(DIAGNOSTIC_BITS)?;
        samples.push(ln_f.checked_div(&(&ln_r * &ln_r))?);
    }
    let differences: Vec<f64> = samples.windows(2).map(|s| s[1].to_f64() - s[0].to_f64()).collect();
    let n = differences.len();
    let settles = differences[n - 1].abs() < differences[n - 2].abs();
    let beta = settles.then(|| samples.last().expect("nonempty").clone());
    Ok(BetaEstimate { samples, differences, beta })
}

/// Growth-constant route: `Exists` above `exp(1/(2 beta))`, `NotExists`
/// below, `Boundary` at it. For the Heine family the threshold is `1/q`
/// exactly; otherwise it comes from the estimate, with a band of half the
/// last sample difference in `ln a`.
pub fn classify_by_beta(d: &DiscretePmf, t: &LogTransformSpec, horizon: usize, grid: &[Scalar]) -> Result<Classification> {
    let a = t.a();
    let concavity = d.check_log_concavity(horizon)?;
    match concavity.outcome {
        ConcavityOutcome::Pass => {}
        ConcavityOutcome::Fail { index } => {
            return Err(Error::Hypothesis(format!("pmf is not log-concave at index {index}")));
        }
        ConcavityOutcome::Inconclusive { index } => {
            return Err(Error::Hypothesis(format!("log-concavity could not be decided at index {index}")));
        }
    }
    let est = estimate_beta(d, grid)?;
    let Some(beta) = est.beta.clone() else {
        return Ok(Classification::new(Verdict::Unknown, Route::BetaThreshold)
            .with("a", a.clone())
            .with("last_sample", est.samples.last().expect("nonempty").clone())
            .note("samples of ln f(r) / ln^2 r do not settle on this grid"));
    };
    let last_diff = est.last_difference();
    let numeric_threshold = Scalar::one().checked_div(&(&beta * &Scalar::from_int(2)))?.exp(DIAGNOSTIC_BITS);
    let mut c = Classification::new(Verdict::Unknown, Route::BetaThreshold)
        .with("a", a.clone())
        .with("beta", beta)
        .with("beta_last_difference", Scalar::from_f64(last_diff)?)
        .with("numeric_threshold", numeric_threshold.clone());
    let ordering = if let Family::Heine { q, .. } = d.family() {
        let threshold = q.value().recip()?;
        c = c.with("threshold", threshold.clone());
        a.cmp_certain(&threshold)
    } else {
        let gap = (a.ln(DIAGNOSTIC_BITS)?.to_f64() - numeric_threshold.ln(DIAGNOSTIC_BITS)?.to_f64()).abs();
        if gap <= last_diff.abs() / 2.0 {
            Some(Ordering::Equal)
        } else {
            a.cmp_certain(&numeric_threshold)
        }
    };
    c.verdict = match ordering {
        Some(Ordering::Greater) => Verdict::Exists,
        Some(Ordering::Less) => Verdict::NotExists,
        Some(Ordering::Equal) => Verdict::Boundary,
        None => Verdict::Unknown,
    };
    if c.verdict == Verdict::Boundary {
        c = c.note(BOUNDARY_NOTE);
    }
    Ok(c.note("the threshold assumes ln f(r) / ln^2 r has a limit, not only an upper limit"))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimitDiagnostic {
    pub indices: Vec<usize>,
    /// `ln p_j / j^2` at each index.
    pub values: Vec<Scalar>,
    pub differences: Vec<f64>,
}

impl LimitDiagnostic {
    pub fn last(&self) -> &Scalar {
        self.values.last().expect("nonempty")
    }
}

/// `ln p_j / j^2` at `horizon / 8, horizon / 4, horizon / 2, horizon`.
pub fn limit_diagnostic(d: &DiscretePmf, horizon: usize) -> Result<LimitDiagnostic> {
    if horizon < 8 {
        return Err(Error::Domain("limit diagnostic horizon must be at least 8".into()));
    }
    let indices: Vec<usize> = [8, 4, 2, 1].iter().map(|s| horizon / s).collect();
    let mut values = Vec::with_capacity(indices.len());
    for &j in &indices {
        let sq = Scalar::from_int((j * j) as i64);
        values.push(d.log_pmf(j)?.approximate(DIAGNOSTIC_BITS).checked_div(&sq)?);
    }
    let differences = values.windows(2).map(|v| v[1].to_f64() - v[0].to_f64()).collect();
    Ok(LimitDiagnostic { indices, values, differences })
}
