//! Discrete distributions on the nonnegative integers.
//!
//! Every distribution is stored as unnormalized weights `w_j` with `w_0 = 1`
//! and a normalizer `p_0`, so `p_j = p_0 w_j`. The successive weight ratio
//! `w_{j+1} / w_j` is available in closed form for every family and is
//! exact whenever the parameters are. The normalizer is computed once.

use std::borrow::Cow;
use std::cmp::Ordering;
use std::sync::{Mutex, OnceLock};

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::numeric::{
    escalate, format_rational, parse_rational, sum_with_tail, Dyadic, PrecisionPolicy, Scalar, DEFAULT_INDEX_CAP,
    DEFAULT_PREC,
};
use crate::qseries::{self, BaseParam, QParam};
use crate::{Error, Result};

/// Extra bits carried by cached weights above the instance precision.
const GUARD_BITS: u32 = 16;

/// Geometric continuation of an explicit table: past the listed values,
/// `p_{j+1} = ratio * p_j`, and the listed values already satisfy
/// `p_{j+1} <= ratio * p_j` from index `from` on.
#[derive(Clone, Debug, PartialEq)]
pub struct GeometricTail {
    pub ratio: BigRational,
    pub from: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Table {
    /// Listed masses, normalized on construction. Without a tail the support
    /// is finite.
    Explicit { values: Vec<BigRational>, tail: Option<GeometricTail> },
    /// `p_j` proportional to `rho^j theta^(j(j-1)/2)` with `0 < theta <= 1`.
    QuadraticLog { rho: Scalar, theta: Scalar },
}

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    Poisson { lambda: Scalar },
    Heine { lambda: Scalar, q: QParam },
    Table(Table),
}

impl Family {
    pub fn poisson(lambda: Scalar) -> Result<Self> {
        require_positive(&lambda, "lambda")?;
        Ok(Family::Poisson { lambda })
    }

    pub fn heine(lambda: Scalar, q: Scalar) -> Result<Self> {
        require_positive(&lambda, "lambda")?;
        Ok(Family::Heine { lambda, q: QParam::new(q)? })
    }

    /// Explicit masses; they are rescaled to sum to one (including the
    /// geometric continuation when `tail` is given).
    pub fn explicit(values: Vec<BigRational>, tail: Option<GeometricTail>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Domain("table needs at least one value".into()));
        }
        if values.iter().any(|v| v.is_negative()) {
            return Err(Error::Domain("table masses must be nonnegative".into()));
        }
        let last = values.last().expect("nonempty").clone();
        let mut total: BigRational = values.iter().sum();
        if let Some(t) = &tail {
            if !(t.ratio.is_positive() && t.ratio < BigRational::one()) {
                return Err(Error::Domain("geometric tail ratio must lie in (0, 1)".into()));
            }
            if last.is_zero() {
                return Err(Error::Domain("geometric tail needs a positive last listed value".into()));
            }
            for j in t.from..values.len() - 1 {
                if values[j + 1] > &values[j] * &t.ratio {
                    return Err(Error::Domain(format!(
                        "listed values violate the geometric tail certificate at index {j}"
                    )));
                }
            }
            total += &last * &t.ratio / (BigRational::one() - &t.ratio);
        }
        if total.is_zero() {
            return Err(Error::Domain("table has zero total mass".into()));
        }
        let values = values.into_iter().map(|v| v / &total).collect();
        Ok(Family::Table(Table::Explicit { values, tail }))
    }

    pub fn quadratic_log(rho: Scalar, theta: Scalar) -> Result<Self> {
        require_positive(&rho, "rho")?;
        require_positive(&theta, "theta")?;
        if !theta.certainly_le(&Scalar::one()) {
            return Err(Error::Domain("theta must not exceed 1".into()));
        }
        if theta == Scalar::one() && !rho.certainly_lt(&Scalar::one()) {
            return Err(Error::Domain("theta = 1 needs rho < 1 for summability".into()));
        }
        Ok(Family::Table(Table::QuadraticLog { rho, theta }))
    }

    /// Index past which every mass is zero, if the support is finite.
    pub fn support_end(&self) -> Option<usize> {
        match self {
            Family::Table(Table::Explicit { values, tail: None }) => Some(values.len() - 1),
            _ => None,
        }
    }

    fn is_exact_table(&self) -> bool {
        matches!(self, Family::Table(Table::Explicit { .. }))
    }
}

fn require_positive(x: &Scalar, name: &str) -> Result<()> {
    if x.sign() == Some(Ordering::Greater) {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be positive, got {x}")))
    }
}

/// A distribution instance with its working precision and caches.
///
/// Instances behave as immutable values: the normalizer cache is filled
/// once and the weight cache only memoizes a pure function of the index.
#[derive(Debug)]
pub struct DiscretePmf {
    family: Family,
    prec: u32,
    normalizer: OnceLock<Result<Scalar>>,
    weights: Mutex<Vec<Scalar>>,
}

impl Clone for DiscretePmf {
    fn clone(&self) -> Self {
        DiscretePmf::with_precision(self.family.clone(), self.prec)
    }
}

impl PartialEq for DiscretePmf {
    fn eq(&self, other: &Self) -> bool {
        self.family == other.family && self.prec == other.prec
    }
}

impl DiscretePmf {
    pub fn new(family: Family) -> Self {
        DiscretePmf::with_precision(family, DEFAULT_PREC)
    }

    pub fn with_precision(family: Family, prec: u32) -> Self {
        DiscretePmf { family, prec, normalizer: OnceLock::new(), weights: Mutex::new(Vec::new()) }
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn precision(&self) -> u32 {
        self.prec
    }

    pub(crate) fn at_precision(&self, bits: u32) -> Cow<'_, DiscretePmf> {
        if bits <= self.prec {
            Cow::Borrowed(self)
        } else {
            Cow::Owned(DiscretePmf::with_precision(self.family.clone(), bits))
        }
    }

    /// `w_{j+1} / w_j`, which equals `p_{j+1} / p_j` whenever `p_j > 0`.
    pub fn ratio(&self, j: usize) -> Result<Scalar> {
        let one = Scalar::one();
        match &self.family {
            Family::Poisson { lambda } => lambda.checked_div(&Scalar::from_int(j as i64 + 1)),
            Family::Heine { lambda, q } => {
                let qv = q.value();
                let num = &(&qv.powi(j as i64)? * lambda) * &(&one - qv);
                num.checked_div(&(&one - &qv.powi(j as i64 + 1)?))
            }
            Family::Table(Table::QuadraticLog { rho, theta }) => Ok(rho * &theta.powi(j as i64)?),
            Family::Table(Table::Explicit { values, tail }) => {
                let len = values.len();
                if j + 1 < len {
                    if values[j].is_zero() {
                        return Err(Error::Support { index: j });
                    }
                    Ok(Scalar::Exact(&values[j + 1] / &values[j]))
                } else {
                    match tail {
                        Some(t) => Ok(Scalar::Exact(t.ratio.clone())),
                        None if values[j.min(len - 1)].is_zero() => Err(Error::Support { index: j }),
                        None => Ok(Scalar::zero()),
                    }
                }
            }
        }
    }

    /// Unnormalized weight `w_j = p_j / p_0`.
    pub fn weight(&self, j: usize) -> Result<Scalar> {
        if let Family::Table(Table::Explicit { values, tail }) = &self.family {
            let len = values.len();
            if j < len {
                return Ok(Scalar::Exact(values[j].clone()));
            }
            return Ok(match tail {
                Some(t) => Scalar::Exact(&values[len - 1] * num_traits::Pow::pow(&t.ratio, (j - len + 1) as u32)),
                None => Scalar::zero(),
            });
        }
        let mut cache = self.weights.lock().expect("weight cache poisoned");
        if cache.is_empty() {
            cache.push(Scalar::one());
        }
        while cache.len() <= j {
            let i = cache.len() - 1;
            let next = (&cache[i] * &self.ratio(i)?).approximate(self.prec + GUARD_BITS);
            cache.push(next);
        }
        Ok(cache[j].clone())
    }

    /// `p_0`, cached on first use.
    pub fn normalizer(&self) -> Result<Scalar> {
        self.normalizer.get_or_init(|| self.compute_normalizer()).clone()
    }

    fn compute_normalizer(&self) -> Result<Scalar> {
        let bits = self.prec + GUARD_BITS;
        match &self.family {
            Family::Table(Table::Explicit { values, .. }) => Ok(Scalar::Exact(values[0].clone())),
            Family::Poisson { lambda } => Ok((-lambda).exp(bits)),
            Family::Heine { lambda, q } => {
                relative_accuracy(bits, |target| qseries::q_exponential(q, &-lambda, target))
            }
            Family::Table(Table::QuadraticLog { rho, theta }) => {
                // Ball-valued parameters cap the attainable accuracy.
                let param_bits = [rho, theta].iter().filter_map(|s| s.precision()).min();
                let bits = param_bits.map_or(bits, |p| bits.min(p.saturating_sub(24)));
                let target = Dyadic::pow2(-(bits as i64));
                let total = escalate(&PrecisionPolicy::with_target(target.mul_pow2(1)), |wp| {
                    let me = self.at_precision(wp.saturating_sub(GUARD_BITS));
                    let s = sum_with_tail(|j| me.weight(j), |n, w| me.weighted_tail(n, &Scalar::one(), w), &target)?;
                    Ok(s.enclosure(wp))
                })?;
                total.recip()
            }
        }
    }

    /// `p_j` at the instance precision.
    pub fn mass(&self, j: usize) -> Result<Scalar> {
        let w = self.weight(j)?;
        if self.family.is_exact_table() {
            return Ok(w);
        }
        Ok(&self.normalizer()? * &w)
    }

    /// `p_j` with absolute error at most `target`.
    pub fn pmf(&self, j: usize, target: &Dyadic) -> Result<Scalar> {
        let policy = PrecisionPolicy { initial_bits: self.prec, ..PrecisionPolicy::with_target(target.clone()) };
        escalate(&policy, |bits| self.at_precision(bits).mass(j))
    }

    /// `ln p_j`.
    pub fn log_pmf(&self, j: usize) -> Result<Scalar> {
        let m = self.mass(j)?;
        if m.is_zero() {
            return Err(Error::Support { index: j });
        }
        m.ln(self.prec)
    }

    /// Bound on `sum_{j > n} p_j z^j` given `term_n = p_n z^n`, valid once the
    /// ratio bound `z p_{j+1} / p_j` is below one and non-increasing from `n` on.
    pub fn weighted_tail(&self, n: usize, z: &Scalar, term_n: &Scalar) -> Option<Dyadic> {
        if let Some(end) = self.family.support_end() {
            return (n >= end).then(Dyadic::zero);
        }
        if let Family::Table(Table::Explicit { values, .. }) = &self.family {
            if n + 1 < values.len() {
                return None;
            }
        }
        let rho = (&self.ratio(n).ok()? * z).abs_upper();
        if rho >= Dyadic::one() {
            return None;
        }
        let gap = Dyadic::one().sub(&rho);
        Some(term_n.abs_upper().mul_up(&rho).div_up(&gap))
    }

    /// Certified `sum_{j > n} p_j`.
    pub fn tail_mass_bound(&self, n: usize) -> Result<Option<Dyadic>> {
        Ok(self.weighted_tail(n, &Scalar::one(), &self.mass(n)?))
    }

    /// Probability generating function `f(z) = sum p_j z^j`, enclosed with
    /// radius at most `target`.
    pub fn pgf(&self, z: &Scalar, target: &Dyadic) -> Result<Scalar> {
        if z.sign() == Some(Ordering::Less) {
            return Err(Error::Domain("pgf is evaluated on z >= 0 only".into()));
        }
        let half = target.mul_pow2(-1);
        let policy = PrecisionPolicy { initial_bits: self.prec, ..PrecisionPolicy::with_target(target.clone()) };
        escalate(&policy, |bits| {
            let me = self.at_precision(bits);
            let mut zpow = Scalar::one();
            let s = sum_with_tail(
                |j| {
                    let t = &me.mass(j)? * &zpow;
                    zpow = (&zpow * z).compact(bits + 64);
                    Ok(t)
                },
                |n, t| me.weighted_tail(n, z, t),
                &half,
            )?;
            Ok(s.enclosure(bits))
        })
    }

    /// Closed-form pgf where one exists: `e^(lambda (z-1))` for Poisson and
    /// `e_q(-lambda) prod_j (1 + lambda (1-q) q^j z)` for Heine.
    pub fn pgf_closed_form(&self, z: &Scalar, target: &Dyadic) -> Result<Option<Scalar>> {
        match &self.family {
            Family::Poisson { lambda } => {
                let bits = crate::numeric::bits_for_target(target);
                let x = lambda * &(z - &Scalar::one());
                let policy = PrecisionPolicy { initial_bits: bits, ..PrecisionPolicy::with_target(target.clone()) };
                escalate(&policy, |b| Ok(x.exp(b))).map(Some)
            }
            Family::Heine { lambda, q } => {
                let x0 = &(lambda * &(&Scalar::one() - q.value())) * z;
                let norm = relative_accuracy(crate::numeric::bits_for_target(target), |t| {
                    qseries::q_exponential(q, &-lambda, t)
                })?;
                let target_prod = target.mul_pow2(-2);
                let prod = qseries::shifted_product(q, &x0, &target_prod)?;
                Ok(Some(&norm * &prod))
            }
            Family::Table(_) => Ok(None),
        }
    }

    /// `ln f(r)` with relative accuracy of roughly `2^-bits`, for large `r`.
    pub fn ln_pgf(&self, r: &Scalar, bits: u32) -> Result<Scalar> {
        match &self.family {
            Family::Poisson { lambda } => Ok(lambda * &(r - &Scalar::one())),
            Family::Heine { lambda, q } => {
                let x0 = &(lambda * &(&Scalar::one() - q.value())) * r;
                let target = Dyadic::pow2(-(bits as i64));
                let ln_norm = self.normalizer()?.ln(bits)?;
                Ok(&ln_norm + &qseries::ln_shifted_product(q, &x0, &target)?)
            }
            Family::Table(_) => {
                let me = self.at_precision(bits + GUARD_BITS);
                let mut sum = Scalar::zero();
                let mut rpow = Scalar::one();
                for n in 0..DEFAULT_INDEX_CAP {
                    let term = &me.mass(n)? * &rpow;
                    rpow = &rpow * r;
                    sum = &sum + &term;
                    if let Some(tail) = me.weighted_tail(n, r, &term) {
                        let scale = sum.abs_lower().mul_pow2(-(bits as i64));
                        if tail <= scale && sum.radius() <= scale {
                            return sum.inflate(&tail, bits).ln(bits);
                        }
                    }
                }
                Err(Error::NonConvergent { cap: DEFAULT_INDEX_CAP })
            }
        }
    }

    /// `E[Y^k]` for `Y = a^X`, which is `f(a^k)`.
    pub fn moment_of_y(&self, base: &BaseParam, k: usize, target: &Dyadic) -> Result<Scalar> {
        if k == 0 {
            return Ok(Scalar::one());
        }
        self.pgf(&base.value().powi(k as i64)?, target)
    }

    /// Checks `p_j^2 >= p_{j-1} p_{j+1}` for `1 <= j <= horizon`.
    pub fn check_log_concavity(&self, horizon: usize) -> Result<LogConcavityReport> {
        if horizon == 0 {
            return Err(Error::Domain("log-concavity horizon must be at least 1".into()));
        }
        let mut prev = self.mass(0)?;
        let mut cur = self.mass(1)?;
        let mut first_inconclusive = None;
        for j in 1..=horizon {
            let next = self.mass(j + 1)?;
            let lhs = &cur * &cur;
            let rhs = &prev * &next;
            match lhs.cmp_certain(&rhs) {
                Some(Ordering::Less) => {
                    return Ok(LogConcavityReport { horizon, outcome: ConcavityOutcome::Fail { index: j } });
                }
                None if first_inconclusive.is_none() => first_inconclusive = Some(j),
                _ => {}
            }
            prev = cur;
            cur = next;
        }
        let outcome = match first_inconclusive {
            Some(index) => ConcavityOutcome::Inconclusive { index },
            None => ConcavityOutcome::Pass,
        };
        Ok(LogConcavityReport { horizon, outcome })
    }

    pub fn from_spec(spec: &DistributionSpec, prec: u32) -> Result<Self> {
        Ok(DiscretePmf::with_precision(spec.to_family()?, prec))
    }
}

/// Evaluates `f(target)` with shrinking absolute targets until the result
/// carries about `bits` correct leading bits.
fn relative_accuracy<F>(bits: u32, f: F) -> Result<Scalar>
where
    F: Fn(&Dyadic) -> Result<Scalar>,
{
    let mut target = Dyadic::pow2(-64);
    for _ in 0..16 {
        let v = f(&target)?;
        let low = v.abs_lower();
        if !low.is_zero() {
            let want = Dyadic::pow2(low.magnitude() - bits as i64);
            if v.radius() <= want {
                return Ok(v);
            }
            target = want;
        } else {
            target = target.mul(&target);
        }
    }
    Err(Error::PrecisionExhausted { bits })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "result")]
pub enum ConcavityOutcome {
    Pass,
    /// First index with certified `p_j^2 < p_{j-1} p_{j+1}`.
    Fail { index: usize },
    /// First index whose comparison could not be decided.
    Inconclusive { index: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LogConcavityReport {
    pub horizon: usize,
    #[serde(flatten)]
    pub outcome: ConcavityOutcome,
}

impl LogConcavityReport {
    pub fn passed(&self) -> bool {
        self.outcome == ConcavityOutcome::Pass
    }
}

/// The support of `Y = a^X`: `a^0 < a^1 < ...`.
#[derive(Clone, Debug, PartialEq)]
pub struct LogTransformSpec {
    pub base: BaseParam,
}

impl LogTransformSpec {
    pub fn new(a: Scalar) -> Result<Self> {
        Ok(LogTransformSpec { base: BaseParam::new(a)? })
    }

    pub fn a(&self) -> &Scalar {
        self.base.value()
    }

    /// The atom `a^j`.
    pub fn atom(&self, j: usize) -> Result<Scalar> {
        self.a().powi(j as i64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpecKind {
    Heine,
    Poisson,
    Table,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TailSpec {
    #[serde(rename = "type")]
    pub kind: String,
    pub ratio: String,
    pub from: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RuleSpec {
    #[serde(rename = "type")]
    pub kind: String,
    pub rho: String,
    pub theta: String,
}

/// JSON description of a distribution. Rationals are `"num/den"` strings
/// (decimals are also accepted and read exactly).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionSpec {
    pub kind: SpecKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tail: Option<TailSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<RuleSpec>,
}

impl DistributionSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("distribution spec: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("spec serializes")
    }

    pub fn heine(lambda: &str, q: &str) -> Self {
        DistributionSpec {
            kind: SpecKind::Heine,
            lambda: Some(lambda.into()),
            q: Some(q.into()),
            values: None,
            tail: None,
            rule: None,
        }
    }

    pub fn poisson(lambda: &str) -> Self {
        DistributionSpec { kind: SpecKind::Poisson, lambda: Some(lambda.into()), q: None, values: None, tail: None, rule: None }
    }

    pub fn to_family(&self) -> Result<Family> {
        let field = |v: &Option<String>, name: &str| -> Result<Scalar> {
            let s = v.as_ref().ok_or_else(|| Error::Parse(format!("{:?} spec needs \"{name}\"", self.kind)))?;
            Ok(Scalar::Exact(parse_rational(s)?))
        };
        match self.kind {
            SpecKind::Poisson => Family::poisson(field(&self.lambda, "lambda")?),
            SpecKind::Heine => Family::heine(field(&self.lambda, "lambda")?, field(&self.q, "q")?),
            SpecKind::Table => match (&self.values, &self.rule) {
                (Some(values), None) => {
                    let values = values.iter().map(|v| parse_rational(v)).collect::<Result<Vec<_>>>()?;
                    let tail = match &self.tail {
                        None => None,
                        Some(t) if t.kind == "geometric" => {
                            Some(GeometricTail { ratio: parse_rational(&t.ratio)?, from: t.from })
                        }
                        Some(t) => return Err(Error::Parse(format!("unknown tail type {:?}", t.kind))),
                    };
                    Family::explicit(values, tail)
                }
                (None, Some(rule)) if rule.kind == "quadratic-log" => {
                    Family::quadratic_log(Scalar::Exact(parse_rational(&rule.rho)?), Scalar::Exact(parse_rational(&rule.theta)?))
                }
                (None, Some(rule)) => Err(Error::Parse(format!("unknown table rule {:?}", rule.kind))),
                _ => Err(Error::Parse("table spec needs exactly one of \"values\" or \"rule\"".into())),
            },
        }
    }

    /// Spec for an exactly parameterized family; `None` if any parameter is
    /// a ball.
    pub fn from_family(family: &Family) -> Option<Self> {
        let r = |s: &Scalar| s.as_rational().map(format_rational);
        Some(match family {
            Family::Poisson { lambda } => DistributionSpec::poisson(&r(lambda)?),
            Family::Heine { lambda, q } => DistributionSpec::heine(&r(lambda)?, &r(q.value())?),
            Family::Table(Table::Explicit { values, tail }) => DistributionSpec {
                kind: SpecKind::Table,
                lambda: None,
                q: None,
                values: Some(values.iter().map(format_rational).collect()),
                tail: tail.as_ref().map(|t| TailSpec {
                    kind: "geometric".into(),
                    ratio: format_rational(&t.ratio),
                    from: t.from,
                }),
                rule: None,
            },
            Family::Table(Table::QuadraticLog { rho, theta }) => DistributionSpec {
                kind: SpecKind::Table,
                lambda: None,
                q: None,
                values: None,
                tail: None,
                rule: Some(RuleSpec { kind: "quadratic-log".into(), rho: r(rho)?, theta: r(theta)? }),
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::tolerance;

    fn heine(lambda: i64, qn: i64, qd: i64) -> DiscretePmf {
        DiscretePmf::new(Family::heine(Scalar::from_int(lambda), Scalar::ratio(qn, qd)).unwrap())
    }

    fn poisson(lambda: i64) -> DiscretePmf {
        DiscretePmf::new(Family::poisson(Scalar::from_int(lambda)).unwrap())
    }

    fn table(values: &[(i64, i64)]) -> DiscretePmf {
        let v = values.iter().map(|&(n, d)| BigRational::new(n.into(), d.into())).collect();
        DiscretePmf::new(Family::explicit(v, None).unwrap())
    }

    #[test]
    fn first_masses_are_normalizers() {
        let target = tolerance(1e-20).unwrap();
        let h = heine(1, 1, 2);
        let p0 = h.pmf(0, &target).unwrap();
        let eq = qseries::q_exponential(&QParam::new(Scalar::ratio(1, 2)).unwrap(), &Scalar::from_int(-1), &target)
            .unwrap();
        assert!((&p0 - &eq).abs_lower().is_zero());
        let p = poisson(1);
        assert!((p.pmf(0, &target).unwrap().to_f64() - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn heine_masses_sum_to_one() {
        let h = heine(1, 1, 2);
        let mut total = Scalar::zero();
        for j in 0..=60 {
            total = &total + &h.mass(j).unwrap();
        }
        assert!((&total - &Scalar::one()).abs_upper() < tolerance(1e-12).unwrap());
    }

    #[test]
    fn heine_log_pmf_reference() {
        // 200-bit reference for ln p_10 with q = 1/2, lambda = 1
        let v = heine(1, 1, 2).log_pmf(10).unwrap();
        assert!((v.to_f64() + 37.750_886_210_133_22).abs() < 1e-10);
    }

    #[test]
    fn poisson_log_pmf_at_zero() {
        let v = poisson(1).log_pmf(0).unwrap();
        assert!(v.to_ball(128).contains(&Dyadic::from_int(-1)));
    }

    #[test]
    fn exp_of_log_pmf_is_pmf() {
        for d in [heine(2, 1, 3), poisson(3)] {
            for j in 0..=50 {
                let m = d.mass(j).unwrap();
                let back = d.log_pmf(j).unwrap().exp(128);
                let dev = (&back - &m).abs_lower();
                assert!(dev <= m.abs_upper().mul_pow2(-100));
            }
        }
    }

    #[test]
    fn log_pmf_of_zero_mass_is_support_error() {
        let t = table(&[(1, 2), (0, 1), (1, 2)]);
        assert_eq!(t.log_pmf(1).unwrap_err(), Error::Support { index: 1 });
        assert_eq!(t.log_pmf(7).unwrap_err(), Error::Support { index: 7 });
    }

    #[test]
    fn pgf_at_one_is_one() {
        let target = tolerance(1e-15).unwrap();
        for d in [heine(2, 1, 2), poisson(4), table(&[(1, 3), (1, 3), (1, 3)])] {
            let f = d.pgf(&Scalar::one(), &target).unwrap();
            assert!(f.to_ball(128).contains(&Dyadic::one()) || (&f - &Scalar::one()).abs_upper() <= target);
        }
        let exact = table(&[(1, 3), (1, 3), (1, 3)]).pgf(&Scalar::one(), &target).unwrap();
        assert_eq!(exact, Scalar::one());
    }

    #[test]
    fn poisson_pgf_closed_form() {
        let target = tolerance(1e-15).unwrap();
        let f = poisson(1).pgf(&Scalar::from_int(2), &target).unwrap();
        assert!((f.to_f64() - std::f64::consts::E).abs() < 1e-14);
        let c = poisson(1).pgf_closed_form(&Scalar::from_int(2), &target).unwrap().unwrap();
        assert!((&f - &c).abs_lower().is_zero());
    }

    #[test]
    fn heine_pgf_series_matches_product() {
        let target = tolerance(1e-12).unwrap();
        let h = heine(1, 1, 2);
        let z = Scalar::from_int(4);
        let series = h.pgf(&z, &target).unwrap();
        let product = h.pgf_closed_form(&z, &target).unwrap().unwrap();
        assert!((&series - &product).abs_upper() <= target.mul_pow2(1));
        // the product telescopes to exactly 6 at these parameters
        assert!((series.to_f64() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn moments_of_y() {
        let target = tolerance(1e-10).unwrap();
        let a = BaseParam::new(Scalar::from_int(2)).unwrap();
        assert_eq!(poisson(1).moment_of_y(&a, 0, &target).unwrap(), Scalar::one());
        let m = poisson(1).moment_of_y(&a, 1, &target).unwrap();
        assert!((m.to_f64() - std::f64::consts::E).abs() < 1e-10);
        let h = heine(1, 1, 2);
        let series = h.moment_of_y(&a, 3, &target).unwrap();
        let product = h.pgf_closed_form(&Scalar::from_int(8), &target).unwrap().unwrap();
        assert!((&series - &product).abs_upper() <= target.mul_pow2(1));
    }

    #[test]
    fn log_concavity_cases() {
        assert!(poisson(3).check_log_concavity(200).unwrap().passed());
        assert!(heine(2, 1, 2).check_log_concavity(200).unwrap().passed());
        let bad = table(&[(1, 2), (1, 8), (1, 4), (1, 8)]).check_log_concavity(10).unwrap();
        assert_eq!(bad.outcome, ConcavityOutcome::Fail { index: 1 });
    }

    #[test]
    fn log_concavity_reports_inconclusive() {
        // a geometric sequence has equality p_j^2 = p_{j-1} p_{j+1}; balls cannot certify it
        let d = DiscretePmf::new(Family::quadratic_log(Scalar::ratio(1, 2), Scalar::one()).unwrap());
        let r = d.check_log_concavity(5).unwrap();
        assert!(matches!(r.outcome, ConcavityOutcome::Inconclusive { .. }));
        // the exact table version decides equality
        let t = DiscretePmf::new(
            Family::explicit(vec![BigRational::one()], Some(GeometricTail { ratio: BigRational::new(1.into(), 2.into()), from: 0 }))
                .unwrap(),
        );
        assert!(t.check_log_concavity(5).unwrap().passed());
    }

    #[test]
    fn tail_mass_certificate_brackets_one() {
        for d in [heine(2, 1, 2), poisson(5)] {
            let mut partial = Scalar::zero();
            for n in 0..40 {
                partial = &partial + &d.mass(n).unwrap();
                if let Some(tail) = d.tail_mass_bound(n).unwrap() {
                    let dev = (&partial - &Scalar::one()).abs_lower();
                    assert!(dev <= tail.add_up(&partial.radius()), "n = {n}");
                }
            }
        }
    }

    #[test]
    fn explicit_table_validation() {
        let r = |n: i64, d: i64| BigRational::new(n.into(), d.into());
        assert!(Family::explicit(vec![], None).is_err());
        assert!(Family::explicit(vec![r(-1, 2), r(3, 2)], None).is_err());
        assert!(Family::explicit(vec![r(1, 2), r(1, 2)], Some(GeometricTail { ratio: r(1, 2), from: 0 })).is_err());
        let f = Family::explicit(vec![r(2, 1), r(2, 1)], None).unwrap();
        let d = DiscretePmf::new(f);
        assert_eq!(d.mass(0).unwrap(), Scalar::ratio(1, 2));
    }

    #[test]
    fn quadratic_log_normalization() {
        let d = DiscretePmf::new(Family::quadratic_log(Scalar::one(), Scalar::ratio(1, 2)).unwrap());
        let mut total = Scalar::zero();
        for j in 0..30 {
            total = &total + &d.mass(j).unwrap();
        }
        assert!((&total - &Scalar::one()).abs_upper() < tolerance(1e-30).unwrap());
    }

    #[test]
    fn spec_roundtrip_and_errors() {
        let text = r#"{"kind":"table","values":["1/2","1/8","1/4","1/8"]}"#;
        let spec = DistributionSpec::from_json(text).unwrap();
        let fam = spec.to_family().unwrap();
        let back = DistributionSpec::from_family(&fam).unwrap();
        assert_eq!(back.to_family().unwrap(), fam);
        let h = DistributionSpec::from_json(r#"{"kind":"heine","lambda":"2","q":"0.5"}"#).unwrap();
        assert_eq!(h.to_family().unwrap(), Family::heine(Scalar::from_int(2), Scalar::ratio(1, 2)).unwrap());
        assert!(DistributionSpec::from_json(r#"{"kind":"heine","lambda":"2"}"#).unwrap().to_family().is_err());
        assert!(DistributionSpec::from_json(r#"{"kind":"heine","lambda":"2","q":"3/2"}"#).unwrap().to_family().is_err());
        assert!(DistributionSpec::from_json(r#"{"kind":"weird"}"#).is_err());
        let tail = r#"{"kind":"table","values":["4","2"],"tail":{"type":"geometric","ratio":"1/2","from":0}}"#;
        let d = DiscretePmf::from_spec(&DistributionSpec::from_json(tail).unwrap(), 128).unwrap();
        assert_eq!(d.mass(0).unwrap(), Scalar::ratio(1, 2));
        assert_eq!(d.mass(3).unwrap(), Scalar::ratio(1, 16));
    }
}
