//! Certified series summation and precision escalation.

use super::dyadic::Dyadic;
use super::scalar::Scalar;
use crate::error::{Error, Result};

/// Default cap on the number of terms a series may consume.
pub const DEFAULT_INDEX_CAP: usize = 200_000;

/// How [`escalate`] raises working precision.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrecisionPolicy {
    pub initial_bits: u32,
    pub max_bits: u32,
    /// Escalation factor as `numerator / denominator`, strictly above one.
    pub escalation_factor: (u32, u32),
    /// Accept a result once its error radius is at most this.
    pub target_width: Dyadic,
}

impl PrecisionPolicy {
    pub fn new(
        initial_bits: u32,
        max_bits: u32,
        escalation_factor: (u32, u32),
        target_width: Dyadic,
    ) -> Result<Self> {
        let (num, den) = escalation_factor;
        if initial_bits == 0 || initial_bits > max_bits {
            return Err(Error::Domain(format!(
                "precision policy needs 0 < initial_bits <= max_bits, got {initial_bits} and {max_bits}"
            )));
        }
        if den == 0 || num <= den {
            return Err(Error::Domain("escalation factor must exceed 1".into()));
        }
        if target_width.signum() <= 0 {
            return Err(Error::Domain("target width must be positive".into()));
        }
        Ok(PrecisionPolicy { initial_bits, max_bits, escalation_factor, target_width })
    }

    /// 128 initial bits, 8192 max, doubling.
    pub fn with_target(target_width: Dyadic) -> Self {
        PrecisionPolicy { initial_bits: 128, max_bits: 8192, escalation_factor: (2, 1), target_width }
    }

    fn next_bits(&self, bits: u32) -> u32 {
        let (num, den) = self.escalation_factor;
        let grown = (bits as u64 * num as u64).div_ceil(den as u64);
        grown.max(bits as u64 + 1).min(u32::MAX as u64) as u32
    }
}

impl Default for PrecisionPolicy {
    fn default() -> Self {
        PrecisionPolicy::with_target(Dyadic::pow2(-100))
    }
}

/// A truncated series together with the certificate for it.
#[derive(Clone, Debug)]
pub struct SeriesSum {
    /// Partial sum through `last_index`. In exact mode this is the exact
    /// finite sum; otherwise its radius covers accumulated rounding only.
    pub value: Scalar,
    pub last_index: usize,
    /// Bound on the omitted tail `|sum_{j > last_index} term_j|`.
    pub tail_bound: Dyadic,
    /// Accumulated rounding (the radius of `value`).
    pub rounding_error: Dyadic,
    /// `tail_bound + rounding_error`: the distance to the infinite sum.
    pub certified_bound: Dyadic,
}

impl SeriesSum {
    /// The partial sum widened by its tail: an enclosure of the infinite sum.
    pub fn enclosure(&self, prec: u32) -> Scalar {
        self.value.inflate(&self.tail_bound, prec)
    }
}

/// Sums `terms(0), terms(1), ...` until the caller-supplied tail bound plus
/// accumulated rounding error drops to `target`.
///
/// `tail_bound(n, term_n)` must return a proven bound on
/// `|sum_{j > n} term_j|`, or `None` while no such bound is available yet.
pub fn sum_with_tail<T, B>(terms: T, tail_bound: B, target: &Dyadic) -> Result<SeriesSum>
where
    T: FnMut(usize) -> Result<Scalar>,
    B: FnMut(usize, &Scalar) -> Option<Dyadic>,
{
    sum_with_tail_capped(terms, tail_bound, target, DEFAULT_INDEX_CAP)
}

pub fn sum_with_tail_capped<T, B>(
    mut terms: T,
    mut tail_bound: B,
    target: &Dyadic,
    index_cap: usize,
) -> Result<SeriesSum>
where
    T: FnMut(usize) -> Result<Scalar>,
    B: FnMut(usize, &Scalar) -> Option<Dyadic>,
{
    if target.signum() <= 0 {
        return Err(Error::Domain("summation target must be positive".into()));
    }
    let mut sum = Scalar::zero();
    for n in 0..=index_cap {
        let term = terms(n)?;
        sum = &sum + &term;
        let rounding = sum.radius();
        if &rounding > target {
            return Err(Error::PrecisionExhausted { bits: sum.precision().unwrap_or(0) });
        }
        if let Some(tail) = tail_bound(n, &term) {
            let total = tail.add_up(&rounding);
            if &total <= target {
                return Ok(SeriesSum {
                    value: sum,
                    last_index: n,
                    tail_bound: tail,
                    rounding_error: rounding,
                    certified_bound: total,
                });
            }
        }
    }
    Err(Error::NonConvergent { cap: index_cap })
}

/// Re-runs `compute` at increasing precision until its error radius is
/// within `policy.target_width`. A `PrecisionExhausted` error from `compute`
/// also triggers a retry.
pub fn escalate<F>(policy: &PrecisionPolicy, mut compute: F) -> Result<Scalar>
where
    F: FnMut(u32) -> Result<Scalar>,
{
    let mut bits = policy.initial_bits;
    loop {
        // Radii scale like 2^-bits, so a too-wide result says how far to jump.
        let mut wanted = 0u64;
        match compute(bits) {
            Ok(v) if v.radius() <= policy.target_width => return Ok(v),
            Ok(v) if !policy.target_width.is_zero() => {
                let short = v.radius().magnitude() - policy.target_width.magnitude();
                wanted = (bits as i64 + short.max(0) + 32).clamp(0, u32::MAX as i64) as u64;
            }
            Ok(_) | Err(Error::PrecisionExhausted { .. }) => {}
            Err(e) => return Err(e),
        }
        if bits >= policy.max_bits {
            return Err(Error::PrecisionExhausted { bits: policy.max_bits });
        }
        bits = (policy.next_bits(bits) as u64).max(wanted).min(policy.max_bits as u64) as u32;
    }
}

/// Bits of working precision that comfortably resolve an absolute `target`
/// for quantities of order one.
pub fn bits_for_target(target: &Dyadic) -> u32 {
    let need = if target.is_zero() { 0 } else { (-target.magnitude()).max(0) as u32 };
    (need + 64).max(128)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn geometric_series() {
        let target = Dyadic::from_f64(1e-6).unwrap();
        let s = sum_with_tail(
            |j| Scalar::ratio(1, 2).powi(j as i64),
            |n, _| Some(Dyadic::pow2(-(n as i64))),
            &target,
        )
        .unwrap();
        let err = (s.value.to_f64() - 2.0).abs();
        assert!(err <= 1e-6);
        assert!(s.value.is_exact());
        assert_eq!(s.rounding_error, Dyadic::zero());
        assert_eq!(s.last_index, 20);
    }

    #[test]
    fn zero_generator() {
        let s = sum_with_tail(|_| Ok(Scalar::zero()), |_, _| Some(Dyadic::zero()), &Dyadic::pow2(-50)).unwrap();
        assert_eq!(s.value, Scalar::zero());
        assert_eq!(s.certified_bound, Dyadic::zero());
    }

    #[test]
    fn missing_tail_bound_is_non_convergent() {
        let r = sum_with_tail_capped(|_| Ok(Scalar::one()), |_, _| None, &Dyadic::one(), 50);
        assert_eq!(r.unwrap_err(), Error::NonConvergent { cap: 50 });
    }

    #[test]
    fn coarse_terms_exhaust_precision() {
        let coarse = Scalar::ratio(1, 3).approximate(8);
        let r = sum_with_tail(|_| Ok(coarse.clone()), |_, _| Some(Dyadic::zero()), &Dyadic::pow2(-40));
        assert!(matches!(r, Err(Error::PrecisionExhausted { .. })));
    }

    #[test]
    fn escalate_keeps_exact_values() {
        let policy = PrecisionPolicy::default();
        let mut calls = Vec::new();
        let v = escalate(&policy, |bits| {
            calls.push(bits);
            Ok(Scalar::ratio(5, 7))
        })
        .unwrap();
        assert_eq!(v, Scalar::ratio(5, 7));
        assert_eq!(calls, vec![128]);
    }

    #[test]
    fn escalate_jumps_by_observed_radius() {
        let policy = PrecisionPolicy::with_target(Dyadic::pow2(-300));
        let mut calls = Vec::new();
        let v = escalate(&policy, |bits| {
            calls.push(bits);
            Ok(Scalar::ratio(1, 3).approximate(bits))
        })
        .unwrap();
        assert_eq!(calls.len(), 2);
        assert!(calls[1] > 300 && calls[1] < 400);
        assert!(v.radius() <= Dyadic::pow2(-300));
    }

    #[test]
    fn escalate_doubles_after_exhaustion() {
        let policy = PrecisionPolicy::with_target(Dyadic::pow2(-300));
        let mut calls = Vec::new();
        let v = escalate(&policy, |bits| {
            calls.push(bits);
            if bits < 512 {
                return Err(Error::PrecisionExhausted { bits });
            }
            Ok(Scalar::ratio(1, 3).approximate(bits))
        })
        .unwrap();
        assert_eq!(calls, vec![128, 256, 512]);
        assert!(v.radius() <= Dyadic::pow2(-300));
    }

    #[test]
    fn escalate_gives_up_at_max_bits() {
        let policy = PrecisionPolicy::new(64, 256, (2, 1), Dyadic::pow2(-1000)).unwrap();
        let r = escalate(&policy, |bits| Ok(Scalar::ratio(1, 3).approximate(bits)));
        assert_eq!(r.unwrap_err(), Error::PrecisionExhausted { bits: 256 });
    }

    #[test]
    fn policy_validation() {
        assert!(PrecisionPolicy::new(256, 128, (2, 1), Dyadic::one()).is_err());
        assert!(PrecisionPolicy::new(64, 128, (1, 1), Dyadic::one()).is_err());
        assert!(PrecisionPolicy::new(64, 128, (3, 2), Dyadic::zero()).is_err());
    }
}
