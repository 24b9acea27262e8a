//! Perturbations, Stieltjes-class members and their certificates.
//!
//! The perturbation is `h~_j = (-1)^j a^(-j(j-1)/2) / ((1/a;1/a)_j p_j)`.
//! Its magnitude is tracked through `R_j = p_0 |h~_j|`, built from the
//! exact step ratio
//!
//! ```text
//! r_j = R_{j+1} / R_j = a^(-j) / ((1 - a^(-(j+1))) (p_{j+1} / p_j))
//! ```
//!
//! so `h_j = (-1)^j R_j / max R` never touches tiny masses or huge
//! reciprocals. It stays exact for rational parameters until the rational
//! outgrows `EXACT_BITS`, after which it continues as a ball.

use std::cell::RefCell;
use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::Serialize;

use crate::distributions::{DiscretePmf, Family, LogTransformSpec, Table};
use crate::numeric::{escalate, Ball, Dyadic, PrecisionPolicy, Scalar, DEFAULT_INDEX_CAP};
use crate::numeric::sum_with_tail;
use crate::{Error, Result};

/// Size limit, in bits of numerator plus denominator, for exact magnitudes.
const EXACT_BITS: u64 = 4096;

/// Mass indices checked for nonnegativity by default.
pub const DEFAULT_MASS_HORIZON: usize = 200;

/// Default scan horizon when moments up to `max_k` are of interest.
pub fn default_scan_horizon(max_k: usize) -> usize {
    10 * (max_k + 10)
}

/// Where the perturbation lives.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "type", content = "last_index")]
pub enum Support {
    /// Every index, normalized by a certified supremum.
    Full,
    /// Indices `0..=n` only; `h_j = 0` beyond. Such a sequence is bounded for
    /// any base, but its moment sums are finite partial sums.
    Truncated(usize),
}

/// `R_j` cache: a prefix at base precision (exact when possible), then one
/// ball continuation per requested precision.
#[derive(Debug)]
struct Magnitudes {
    prefix: Vec<Scalar>,
    scaled: Vec<Scalar>,
    closed: bool,
    tails: BTreeMap<u32, Vec<Scalar>>,
}

#[derive(Debug)]
pub struct Perturbation {
    base: DiscretePmf,
    transform: LogTransformSpec,
    support: Support,
    magnitudes: Mutex<Magnitudes>,
    peak: Scalar,
    argmax: usize,
    decay_index: Option<usize>,
    p0: Scalar,
}

/// Builds the perturbation over the full support.
///
/// The scan stops at the first `j` with `r_j <= 1` and a family bound
/// `sup_{i >= j} (p_{i+1}/p_i) / (p_{i+2}/p_{i+1}) <= a`. Together these
/// make `r_i` non-increasing and at most one from `j` on, so the supremum
/// of `R` is attained among the indices already scanned.
pub fn build_perturbation(d: &DiscretePmf, t: &LogTransformSpec, scan_horizon: usize) -> Result<Perturbation> {
    if scan_horizon == 0 {
        return Err(Error::Domain("scan horizon must be at least 1".into()));
    }
    let a = t.a();
    let mut mags = vec![Scalar::one()];
    for j in 0..scan_horizon {
        require_mass(d, j)?;
        let r = step_ratio(d, a, j)?;
        if r.certainly_le(&Scalar::one()) && growth_bound(d, j)?.is_some_and(|g| g.certainly_le(a)) {
            let (peak, argmax) = certified_max(&mags);
            return Perturbation::assemble(d, t, Support::Full, mags, peak, argmax, Some(j));
        }
        let next = &mags[j] * &r;
        mags.push(next);
    }
    Err(Error::NoDecayCertificate { horizon: scan_horizon })
}

/// Attaches the sequence on `0..=last` only and normalizes by its maximum
/// there. Works for any base with positive masses up to `last`.
pub fn attach_truncated(d: &DiscretePmf, t: &LogTransformSpec, last: usize) -> Result<Perturbation> {
    let a = t.a();
    let mut mags = vec![Scalar::one()];
    require_mass(d, 0)?;
    for j in 0..last {
        require_mass(d, j + 1)?;
        let next = &mags[j] * &step_ratio(d, a, j)?;
        mags.push(next);
    }
    let (peak, argmax) = certified_max(&mags);
    Perturbation::assemble(d, t, Support::Truncated(last), mags, peak, argmax, None)
}

fn require_mass(d: &DiscretePmf, j: usize) -> Result<()> {
    if d.weight(j)?.is_zero() {
        return Err(Error::Support { index: j });
    }
    Ok(())
}

/// `r_j = a^(-j) / ((1 - a^(-(j+1))) w_{j+1}/w_j)`.
fn step_ratio(d: &DiscretePmf, a: &Scalar, j: usize) -> Result<Scalar> {
    step_ratio_from(a, &d.ratio(j)?, j)
}

fn step_ratio_from(a: &Scalar, ratio: &Scalar, j: usize) -> Result<Scalar> {
    if ratio.is_zero() {
        return Err(Error::Support { index: j + 1 });
    }
    let inv_pow = a.powi(-(j as i64))?;
    let gap = &Scalar::one() - &a.powi(-(j as i64 + 1))?;
    inv_pow.checked_div(&(&gap * ratio))
}

/// Upper bound on `sup_{i >= j} ratio(i) / ratio(i + 1)`, or `None` when the
/// family offers none.
fn growth_bound(d: &DiscretePmf, j: usize) -> Result<Option<Scalar>> {
    Ok(match d.family() {
        Family::Poisson { .. } => Some(Scalar::ratio(j as i64 + 2, j as i64 + 1)),
        Family::Heine { q, .. } => Some(q.value().recip()?),
        Family::Table(Table::QuadraticLog { theta, .. }) => Some(theta.recip()?),
        Family::Table(Table::Explicit { tail: None, .. }) => None,
        Family::Table(Table::Explicit { values, tail: Some(_) }) => {
            // Past the listed values the ratio is constant.
            let mut g = Scalar::one();
            for i in j..values.len() {
                let next = d.ratio(i + 1)?;
                if next.is_zero() {
                    return Ok(None);
                }
                let step = d.ratio(i)?.checked_div(&next)?;
                if step.cmp_certain(&g) != Some(Ordering::Less) {
                    g = step;
                }
            }
            Some(g)
        }
    })
}

/// Largest value and its first index. For balls the value is the hull of all
/// candidates that might be the maximum.
fn certified_max(values: &[Scalar]) -> (Scalar, usize) {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        let better = match v.cmp_certain(&values[best]) {
            Some(o) => o == Ordering::Greater,
            None => v.to_f64() > values[best].to_f64(),
        };
        if better {
            best = i;
        }
    }
    if values.iter().all(Scalar::is_exact) {
        return (values[best].clone(), best);
    }
    let prec = values.iter().filter_map(Scalar::precision).max().unwrap_or(crate::numeric::DEFAULT_PREC);
    let balls: Vec<Ball> = values.iter().map(|v| v.to_ball(prec)).collect();
    let lo = balls.iter().map(Ball::lower).max().expect("nonempty");
    let hi = balls.iter().map(Ball::upper).max().expect("nonempty");
    let mid = lo.add(&hi).mul_pow2(-1);
    let rad = hi.sub(&lo).mul_pow2(-1);
    (Scalar::Approx(Ball::new(mid, rad, prec)), best)
}

impl Perturbation {
    fn assemble(
        d: &DiscretePmf,
        t: &LogTransformSpec,
        support: Support,
        mags: Vec<Scalar>,
        peak: Scalar,
        argmax: usize,
        decay_index: Option<usize>,
    ) -> Result<Self> {
        Ok(Perturbation {
            base: d.clone(),
            transform: t.clone(),
            support,
            magnitudes: Mutex::new(Magnitudes { prefix: mags, scaled: Vec::new(), closed: false, tails: BTreeMap::new() }),
            peak,
            argmax,
            decay_index,
            p0: d.normalizer()?,
        })
    }

    pub fn base(&self) -> &DiscretePmf {
        &self.base
    }

    pub fn transform(&self) -> &LogTransformSpec {
        &self.transform
    }

    pub fn support(&self) -> Support {
        self.support
    }

    /// Index at which the decay certificate was issued (full support only).
    pub fn decay_index(&self) -> Option<usize> {
        self.decay_index
    }

    pub fn argmax(&self) -> usize {
        self.argmax
    }

    /// `M = sup_j |h~_j|`.
    pub fn normalizer(&self) -> Result<Scalar> {
        self.peak.checked_div(&self.p0)
    }

    fn in_support(&self, j: usize) -> bool {
        match self.support {
            Support::Full => true,
            Support::Truncated(n) => j <= n,
        }
    }

    /// `R_j = p_0 |h~_j|`.
    fn magnitude(&self, j: usize) -> Result<Scalar> {
        self.magnitude_at(j, self.base.precision() + 64)
    }

    fn magnitude_at(&self, j: usize, bits: u32) -> Result<Scalar> {
        if j < self.exact_len(j)? {
            let cache = self.magnitudes.lock().expect("magnitude cache poisoned");
            return Ok(cache.prefix[j].clone());
        }
        Ok(&self.scaled_tail(j, bits)? * &self.peak)
    }

    /// Extends the prefix towards `j` and returns its length.
    fn exact_len(&self, j: usize) -> Result<usize> {
        let a = self.transform.a();
        let mut cache = self.magnitudes.lock().expect("magnitude cache poisoned");
        let m = &mut *cache;
        while !m.closed && m.prefix.len() <= j {
            let i = m.prefix.len() - 1;
            let next = &m.prefix[i] * &step_ratio(&self.base, a, i)?;
            if next.as_rational().is_some_and(|r| r.numer().bits() + r.denom().bits() > EXACT_BITS) {
                m.closed = true;
            } else {
                m.prefix.push(next);
            }
        }
        Ok(m.prefix.len())
    }

    /// `R_j / max R` past the prefix, as a ball at `bits`.
    fn scaled_tail(&self, j: usize, bits: u32) -> Result<Scalar> {
        let a = self.transform.a().approximate(bits);
        let mut cache = self.magnitudes.lock().expect("magnitude cache poisoned");
        let m = &mut *cache;
        let start = m.prefix.len() - 1;
        let peak = &self.peak;
        let tail = match m.tails.entry(bits) {
            std::collections::btree_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(vec![m.prefix[start].approximate(bits).checked_div(peak)?])
            }
        };
        while start + tail.len() <= j {
            let i = start + tail.len() - 1;
            let ratio = self.base.ratio(i)?.approximate(bits);
            let next = &tail[tail.len() - 1] * &step_ratio_from(&a, &ratio, i)?;
            tail.push(next);
        }
        Ok(tail[j - start].clone())
    }

    /// `R_j / max R` for `j` in the prefix, cached.
    fn scaled_prefix(&self, j: usize) -> Result<Scalar> {
        let mut cache = self.magnitudes.lock().expect("magnitude cache poisoned");
        let m = &mut *cache;
        while m.scaled.len() <= j {
            let next = m.prefix[m.scaled.len()].checked_div(&self.peak)?;
            m.scaled.push(next);
        }
        Ok(m.scaled[j].clone())
    }

    fn sign(j: usize) -> Scalar {
        if j.is_multiple_of(2) {
            Scalar::one()
        } else {
            Scalar::from_int(-1)
        }
    }

    /// `h~_j`.
    pub fn unnormalized(&self, j: usize) -> Result<Scalar> {
        if !self.in_support(j) {
            return Ok(Scalar::zero());
        }
        Ok(&Self::sign(j) * &self.magnitude(j)?.checked_div(&self.p0)?)
    }

    /// `h_j = h~_j / M`, with `sup |h_j| = 1`.
    pub fn normalized(&self, j: usize) -> Result<Scalar> {
        self.normalized_at(j, self.base.precision() + 64)
    }

    fn normalized_at(&self, j: usize, bits: u32) -> Result<Scalar> {
        if !self.in_support(j) {
            return Ok(Scalar::zero());
        }
        let scaled = if j < self.exact_len(j)? { self.scaled_prefix(j)? } else { self.scaled_tail(j, bits)? };
        Ok(&Self::sign(j) * &scaled)
    }

    /// `p_j h_j`, from the cancelled form `(-1)^j a^(-j(j-1)/2) / ((1/a;1/a)_j M)`.
    pub fn weighted(&self, j: usize) -> Result<Scalar> {
        if !self.in_support(j) {
            return Ok(Scalar::zero());
        }
        let a = self.transform.a();
        let mut c = Scalar::one();
        for i in 0..j {
            let step = a.powi(-(i as i64))?.checked_div(&(&Scalar::one() - &a.powi(-(i as i64 + 1))?))?;
            c = -&(&c * &step);
        }
        c.checked_div(&self.normalizer()?)
    }

    /// Certificate for `S_k = sum_j a^(kj) p_j h~_j` over this support.
    pub fn moment_sum(&self, k: usize, target: &Dyadic) -> Result<MomentSumCertificate> {
        let last = match self.support {
            Support::Full => None,
            Support::Truncated(n) => Some(n),
        };
        moment_sum(self.transform.a(), k, target, last)
    }

    pub fn member(&self, epsilon: Scalar) -> Result<StieltjesMember<'_>> {
        if !epsilon.abs().certainly_le(&Scalar::one()) {
            return Err(Error::Range(epsilon.to_string()));
        }
        Ok(StieltjesMember { perturbation: self, epsilon })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", content = "bound")]
pub enum MomentVerdict {
    VanishesWithin(Dyadic),
    Violated,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentSumCertificate {
    pub k: usize,
    pub truncation_index: usize,
    pub partial_sum: Scalar,
    pub tail_bound: Dyadic,
    pub verdict: MomentVerdict,
}

impl MomentSumCertificate {
    pub fn vanishes(&self) -> bool {
        matches!(self.verdict, MomentVerdict::VanishesWithin(_))
    }
}

/// Terms `t_j = a^(kj) (-1)^j a^(-j(j-1)/2) / (1/a;1/a)_j`, generated by
/// `t_{j+1} = -t_j rho_j` with `rho_j = a^(k-j) / (1 - a^(-(j+1)))`.
struct CancelledTerms<'a> {
    a: &'a Scalar,
    k: i64,
    j: usize,
    term: Scalar,
}

impl<'a> CancelledTerms<'a> {
    fn new(a: &'a Scalar, k: usize) -> Self {
        CancelledTerms { a, k: k as i64, j: 0, term: Scalar::one() }
    }

    fn rho(&self) -> Result<Scalar> {
        let j = self.j as i64;
        self.a.powi(self.k - j)?.checked_div(&(&Scalar::one() - &self.a.powi(-(j + 1))?))
    }

    fn advance(&mut self) -> Result<()> {
        self.term = -&(&self.term * &self.rho()?);
        self.j += 1;
        Ok(())
    }
}

/// Partial sums of `S_k` through index `last`.
pub fn moment_partial_sums(a: &Scalar, k: usize, last: usize) -> Result<Vec<Scalar>> {
    let mut terms = CancelledTerms::new(a, k);
    let mut sum = Scalar::zero();
    let mut out = Vec::with_capacity(last + 1);
    for _ in 0..=last {
        sum = &sum + &terms.term;
        out.push(sum.clone());
        terms.advance()?;
    }
    Ok(out)
}

/// Certifies `S_k`. With `last = Some(n)` the sum stops at `n` and is
/// `Violated` whenever the finite sum is certainly nonzero. Otherwise the
/// sum runs until the geometric tail bound (valid once `rho_j < 1`, since
/// `rho_j` decreases in `j`) is within `target`.
pub fn moment_sum(a: &Scalar, k: usize, target: &Dyadic, last: Option<usize>) -> Result<MomentSumCertificate> {
    if target.signum() <= 0 {
        return Err(Error::Domain("target must be positive".into()));
    }
    let one = Scalar::one();
    let mut terms = CancelledTerms::new(a, k);
    let mut sum = Scalar::zero();
    for n in 0..=DEFAULT_INDEX_CAP {
        sum = &sum + &terms.term;
        if sum.radius() > *target {
            return Err(Error::PrecisionExhausted { bits: sum.precision().unwrap_or(0) });
        }
        if last == Some(n) {
            let nonzero = !sum.abs_lower().is_zero() || (sum.is_exact() && !sum.is_zero());
            let verdict = if nonzero {
                MomentVerdict::Violated
            } else if sum.abs_upper() <= *target {
                MomentVerdict::VanishesWithin(target.clone())
            } else {
                return Err(Error::PrecisionExhausted { bits: sum.precision().unwrap_or(0) });
            };
            return Ok(MomentSumCertificate {
                k,
                truncation_index: n,
                partial_sum: sum,
                tail_bound: Dyadic::zero(),
                verdict,
            });
        }
        let rho = terms.rho()?;
        if last.is_none() && rho.certainly_lt(&one) {
            let tail = (&terms.term.abs() * &rho).checked_div(&(&one - &rho))?.abs_upper();
            if tail <= *target {
                let verdict = if sum.abs_upper() <= *target {
                    Some(MomentVerdict::VanishesWithin(target.clone()))
                } else if sum.abs_lower() > tail {
                    Some(MomentVerdict::Violated)
                } else {
                    None
                };
                if let Some(verdict) = verdict {
                    return Ok(MomentSumCertificate { k, truncation_index: n, partial_sum: sum, tail_bound: tail, verdict });
                }
            }
        }
        terms.advance()?;
    }
    Err(Error::NonConvergent { cap: DEFAULT_INDEX_CAP })
}

/// `g_j = p_j (1 + epsilon h_j)`.
#[derive(Debug)]
pub struct StieltjesMember<'p> {
    perturbation: &'p Perturbation,
    epsilon: Scalar,
}

impl<'p> StieltjesMember<'p> {
    pub fn epsilon(&self) -> &Scalar {
        &self.epsilon
    }

    pub fn perturbation(&self) -> &'p Perturbation {
        self.perturbation
    }

    /// `1 + epsilon h_j`.
    pub fn factor(&self, j: usize) -> Result<Scalar> {
        if self.epsilon.is_zero() {
            return Ok(Scalar::one());
        }
        Ok(&Scalar::one() + &(&self.epsilon * &self.perturbation.normalized(j)?))
    }

    /// The factor as a ball at `bits`.
    fn factor_at(&self, j: usize, bits: u32) -> Result<Scalar> {
        if self.epsilon.is_zero() {
            return Ok(Scalar::one());
        }
        let h = self.perturbation.normalized_at(j, bits)?.approximate(bits);
        Ok(&Scalar::one() + &(&self.epsilon.approximate(bits) * &h))
    }

    pub fn mass(&self, j: usize) -> Result<Scalar> {
        Ok(&self.perturbation.base.mass(j)? * &self.factor(j)?)
    }

    /// `E_g[Y^k] = sum_j a^(kj) g_j`, enclosed within `target`. The tail is
    /// bounded by twice the base tail since `0 <= g_j <= 2 p_j`.
    pub fn moment(&self, k: usize, target: &Dyadic) -> Result<Scalar> {
        let z = self.perturbation.transform.a().powi(k as i64)?;
        let base = &self.perturbation.base;
        let half = target.mul_pow2(-1);
        let policy = PrecisionPolicy { initial_bits: base.precision(), ..PrecisionPolicy::with_target(target.clone()) };
        escalate(&policy, |bits| {
            let b = base.at_precision(bits);
            let last_base_term = RefCell::new(Scalar::zero());
            let mut zpow = Scalar::one();
            let s = sum_with_tail(
                |j| {
                    let pt = &b.mass(j)? * &zpow;
                    zpow = (&zpow * &z).compact(bits + 64);
                    let g = &pt * &self.factor_at(j, bits + 64)?;
                    *last_base_term.borrow_mut() = pt;
                    Ok(g)
                },
                |n, _| b.weighted_tail(n, &z, &last_base_term.borrow()).map(|t| t.mul_pow2(1)),
                &half,
            )?;
            Ok(s.enclosure(bits))
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NonnegativityCheck {
    pub checked_through: usize,
    pub zero_masses: usize,
    pub first_negative: Option<usize>,
    pub first_uncertain: Option<usize>,
}

impl NonnegativityCheck {
    pub fn passed(&self) -> bool {
        self.first_negative.is_none() && self.first_uncertain.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TotalMassCheck {
    pub total: Scalar,
    pub deviation_bound: Dyadic,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentCheck {
    pub k: usize,
    /// `epsilon S_k / M` from the cancelled-form certificate.
    pub via_identity: Scalar,
    /// `E_g[Y^k] - E_p[Y^k]` from two independent sums.
    pub direct: Scalar,
    pub bound: Dyadic,
    pub consistent: bool,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MemberReport {
    pub epsilon: Scalar,
    pub target: Dyadic,
    pub nonnegativity: NonnegativityCheck,
    pub total_mass: TotalMassCheck,
    pub certificates: Vec<MomentSumCertificate>,
    pub moments: Vec<MomentCheck>,
}

impl MemberReport {
    pub fn passed(&self) -> bool {
        self.nonnegativity.passed()
            && self.total_mass.passed
            && self.certificates.iter().all(MomentSumCertificate::vanishes)
            && self.moments.iter().all(|m| m.passed)
    }
}

/// Checks nonnegativity of `g_j` for `j <= mass_horizon`, the total mass, and
/// `|E_g[Y^k] - E_p[Y^k]| <= target` for `k <= max_k` by two routes.
pub fn verify_member(m: &StieltjesMember<'_>, max_k: usize, target: &Dyadic, mass_horizon: usize) -> Result<MemberReport> {
    let p = m.perturbation;
    let mut nonneg = NonnegativityCheck { checked_through: mass_horizon, zero_masses: 0, first_negative: None, first_uncertain: None };
    for j in 0..=mass_horizon {
        // p_j > 0, so the sign of g_j is the sign of the factor.
        match m.factor(j)?.sign() {
            Some(Ordering::Greater) => {}
            Some(Ordering::Equal) => nonneg.zero_masses += 1,
            Some(Ordering::Less) => {
                nonneg.first_negative.get_or_insert(j);
            }
            None => {
                nonneg.first_uncertain.get_or_insert(j);
            }
        }
    }

    let total = m.moment(0, &target.mul_pow2(-1))?;
    let deviation_bound = (&total - &Scalar::one()).abs_upper();
    let total_mass = TotalMassCheck { passed: deviation_bound <= *target, total, deviation_bound };

    let scale = p.p0.checked_div(&p.peak)?;
    let quarter = target.mul_pow2(-2);
    let mut certificates = Vec::with_capacity(max_k + 1);
    let mut moments = Vec::with_capacity(max_k + 1);
    for k in 0..=max_k {
        let cert = p.moment_sum(k, &target.mul_pow2(-1))?;
        let s_k = cert.partial_sum.inflate(&cert.tail_bound, p.base.precision());
        let via_identity = if m.epsilon.is_zero() { Scalar::zero() } else { &(&m.epsilon * &s_k) * &scale };
        let e_p = p.base.moment_of_y(&p.transform.base, k, &quarter)?;
        let e_g = m.moment(k, &quarter)?;
        let direct = &e_g - &e_p;
        let bound = via_identity.abs_upper().max(direct.abs_upper());
        let consistent = (&via_identity - &direct).abs_lower().is_zero();
        moments.push(MomentCheck { k, passed: bound <= *target && consistent, via_identity, direct, bound, consistent });
        certificates.push(cert);
    }
    Ok(MemberReport { epsilon: m.epsilon.clone(), target: target.clone(), nonnegativity: nonneg, total_mass, certificates, moments })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::tolerance;
    use num_rational::BigRational;

    fn heine(lambda: i64) -> DiscretePmf {
        DiscretePmf::new(Family::heine(Scalar::from_int(lambda), Scalar::ratio(1, 2)).unwrap())
    }

    fn base(n: i64, d: i64) -> LogTransformSpec {
        LogTransformSpec::new(Scalar::ratio(n, d)).unwrap()
    }

    #[test]
    fn first_two_unnormalized_values() {
        let d = heine(2);
        let p = build_perturbation(&d, &base(2, 1), 50).unwrap();
        let h0 = p.unnormalized(0).unwrap();
        let want0 = d.mass(0).unwrap().recip().unwrap();
        assert!((&h0 - &want0).abs_lower().is_zero());
        let h1 = p.unnormalized(1).unwrap();
        let want1 = -&Scalar::from_int(2).checked_div(&d.mass(1).unwrap()).unwrap();
        assert!((&h1 - &want1).abs_lower().is_zero());
        assert_eq!(h1.sign(), Some(Ordering::Less));
    }

    #[test]
    fn boundary_heine_has_flat_magnitudes() {
        let p = build_perturbation(&heine(2), &base(2, 1), 50).unwrap();
        assert_eq!(p.argmax(), 0);
        assert_eq!(p.decay_index(), Some(0));
        for j in 0..40 {
            let h = p.normalized(j).unwrap();
            assert_eq!(h, if j % 2 == 0 { Scalar::one() } else { Scalar::from_int(-1) });
        }
    }

    #[test]
    fn decay_certificate_fails_without_condition() {
        // lambda (1 - q) = 1/2 < 1 at a = 1/q: magnitudes grow geometrically
        assert_eq!(build_perturbation(&heine(1), &base(2, 1), 100).unwrap_err(), Error::NoDecayCertificate { horizon: 100 });
        assert!(matches!(build_perturbation(&heine(2), &base(3, 2), 100), Err(Error::NoDecayCertificate { .. })));
    }

    #[test]
    fn poisson_perturbation_is_normalized() {
        let d = DiscretePmf::new(Family::poisson(Scalar::from_int(7)).unwrap());
        let p = build_perturbation(&d, &base(3, 2), 100).unwrap();
        let am = p.argmax();
        assert_eq!(p.normalized(am).unwrap().abs(), Scalar::one());
        for j in 0..120 {
            let h = p.normalized(j).unwrap();
            assert!(h.abs().certainly_le(&Scalar::one()), "j = {j}");
            let next = p.normalized(j + 1).unwrap();
            assert_eq!((&h * &next).sign(), Some(Ordering::Less));
        }
    }

    #[test]
    fn ball_tail_encloses_exact_magnitudes() {
        let d = DiscretePmf::new(Family::poisson(Scalar::from_int(3)).unwrap());
        let p = build_perturbation(&d, &base(2, 1), 100).unwrap();
        let mut exact = Scalar::one();
        for j in 0..120 {
            if j > 0 {
                exact = &exact * &step_ratio(&d, &Scalar::from_int(2), j - 1).unwrap();
            }
            let want = &exact.checked_div(&p.peak).unwrap() * &Perturbation::sign(j);
            for bits in [128, 512] {
                let got = p.normalized_at(j, bits).unwrap();
                assert!((&got - &want).abs_lower().is_zero(), "j = {j}, bits = {bits}");
            }
        }
        assert!(p.magnitudes.lock().unwrap().closed);
    }

    #[test]
    fn finite_support_is_rejected() {
        let v = vec![BigRational::new(1.into(), 2.into()), BigRational::new(1.into(), 2.into())];
        let d = DiscretePmf::new(Family::explicit(v, None).unwrap());
        assert_eq!(build_perturbation(&d, &base(2, 1), 10).unwrap_err(), Error::Support { index: 2 });
    }

    #[test]
    fn cancelled_partial_sums_at_base_two() {
        let sums = moment_partial_sums(&Scalar::from_int(2), 0, 4).unwrap();
        let want = [Scalar::one(), Scalar::from_int(-1), Scalar::ratio(1, 3), Scalar::ratio(-1, 21), Scalar::ratio(1, 315)];
        assert_eq!(sums, want);
    }

    #[test]
    fn moment_sum_vanishes_exactly() {
        let cert = moment_sum(&Scalar::from_int(2), 5, &tolerance(1e-20).unwrap(), None).unwrap();
        assert!(cert.vanishes());
        assert!(cert.partial_sum.is_exact());
        assert!(cert.tail_bound <= tolerance(1e-20).unwrap());
    }

    #[test]
    fn truncated_sum_is_violated() {
        let cert = moment_sum(&Scalar::from_int(2), 3, &tolerance(1e-20).unwrap(), Some(12)).unwrap();
        assert_eq!(cert.verdict, MomentVerdict::Violated);
        assert_eq!(cert.tail_bound, Dyadic::zero());
    }

    #[test]
    fn approximate_base_gives_explicit_bound() {
        let a = Scalar::from_int(2).ln(128).unwrap().exp(128);
        let a = &a + &Scalar::one();
        let cert = moment_sum(&a, 2, &tolerance(1e-20).unwrap(), None).unwrap();
        assert!(!cert.partial_sum.is_exact());
        assert!(cert.vanishes());
    }

    #[test]
    fn weighted_matches_mass_times_h() {
        let d = heine(2);
        let p = build_perturbation(&d, &base(3, 1), 60).unwrap();
        for j in 0..30 {
            let lhs = p.weighted(j).unwrap();
            let rhs = &d.mass(j).unwrap() * &p.normalized(j).unwrap();
            assert!((&lhs - &rhs).abs_lower().is_zero(), "j = {j}");
        }
    }

    #[test]
    fn epsilon_range_is_enforced() {
        let p = build_perturbation(&heine(2), &base(2, 1), 10).unwrap();
        assert!(matches!(p.member(Scalar::ratio(3, 2)), Err(Error::Range(_))));
        assert!(p.member(Scalar::from_int(-1)).is_ok());
    }

    #[test]
    fn zero_epsilon_reproduces_base() {
        let d = heine(2);
        let p = build_perturbation(&d, &base(2, 1), 10).unwrap();
        let m = p.member(Scalar::zero()).unwrap();
        for j in 0..20 {
            assert_eq!(m.mass(j).unwrap(), d.mass(j).unwrap());
        }
        let report = verify_member(&m, 3, &tolerance(1e-12).unwrap(), 50).unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn boundary_member_has_exact_zero_masses() {
        let p = build_perturbation(&heine(2), &base(2, 1), 10).unwrap();
        let m = p.member(Scalar::one()).unwrap();
        assert!(m.mass(1).unwrap().is_zero());
        assert_eq!(m.mass(0).unwrap().sign(), Some(Ordering::Greater));
    }

    #[test]
    fn half_member_verifies() {
        let p = build_perturbation(&heine(2), &base(2, 1), 10).unwrap();
        let m = p.member(Scalar::ratio(1, 2)).unwrap();
        let report = verify_member(&m, 4, &tolerance(1e-12).unwrap(), 100).unwrap();
        assert!(report.passed(), "{report:?}");
        assert_eq!(report.certificates.len(), 5);
    }
}
