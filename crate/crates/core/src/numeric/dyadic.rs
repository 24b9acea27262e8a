//! Exact binary fractions `mantissa * 2^exponent`.
//!
//! Dyadics serve two roles: midpoints of [`Ball`](super::Ball)s and
//! nonnegative upper bounds on errors. Every rounding helper states its
//! direction explicitly so that bound arithmetic can always round up.

use std::cmp::Ordering;
use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

/// Bits kept in error bounds. Bounds are rounded up to this many bits.
pub const BOUND_BITS: u64 = 32;

/// Rounding direction for lossy operations.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Round {
    /// Toward negative infinity.
    Floor,
    /// Toward positive infinity.
    Ceil,
    /// Toward zero.
    Trunc,
}

/// The exact value `man * 2^exp`, normalized so that `man` is odd (or zero
/// with `exp == 0`). Normalization makes structural equality numeric equality.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dyadic {
    man: BigInt,
    exp: i64,
}

impl Dyadic {
    pub fn zero() -> Self {
        Dyadic { man: BigInt::zero(), exp: 0 }
    }

    pub fn one() -> Self {
        Dyadic { man: BigInt::one(), exp: 0 }
    }

    pub fn new(man: BigInt, exp: i64) -> Self {
        let mut d = Dyadic { man, exp };
        d.normalize();
        d
    }

    pub fn from_int(v: i64) -> Self {
        Dyadic::new(BigInt::from(v), 0)
    }

    /// `2^exp`.
    pub fn pow2(exp: i64) -> Self {
        Dyadic { man: BigInt::one(), exp }
    }

    /// Exact conversion; `None` for NaN or infinities.
    pub fn from_f64(v: f64) -> Option<Self> {
        if !v.is_finite() {
            return None;
        }
        if v == 0.0 {
            return Some(Dyadic::zero());
        }
        let bits = v.to_bits();
        let sign = if bits >> 63 == 0 { 1i64 } else { -1 };
        let exp_bits = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & 0x000f_ffff_ffff_ffff;
        let (man, exp) = if exp_bits == 0 {
            (frac as i64, -1074)
        } else {
            ((frac | (1u64 << 52)) as i64, exp_bits - 1075)
        };
        Some(Dyadic::new(BigInt::from(sign * man), exp))
    }

    fn normalize(&mut self) {
        if self.man.is_zero() {
            self.exp = 0;
            return;
        }
        let tz = self.man.trailing_zeros().unwrap_or(0);
        if tz > 0 {
            self.man >>= tz as usize;
            self.exp += tz as i64;
        }
    }

    pub fn mantissa(&self) -> &BigInt {
        &self.man
    }

    pub fn exponent(&self) -> i64 {
        self.exp
    }

    pub fn is_zero(&self) -> bool {
        self.man.is_zero()
    }

    pub fn is_negative(&self) -> bool {
        self.man.is_negative()
    }

    pub fn signum(&self) -> i32 {
        match self.man.sign() {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }

    /// Number of significant bits in the mantissa.
    pub fn bits(&self) -> u64 {
        self.man.bits()
    }

    /// Exponent of the leading bit: `|self|` lies in `[2^m, 2^(m+1))`.
    /// Undefined (returns `i64::MIN`) for zero.
    pub fn magnitude(&self) -> i64 {
        if self.is_zero() {
            i64::MIN
        } else {
            self.exp + self.bits() as i64 - 1
        }
    }

    pub fn abs(&self) -> Self {
        Dyadic { man: self.man.abs(), exp: self.exp }
    }

    pub fn neg(&self) -> Self {
        Dyadic { man: -&self.man, exp: self.exp }
    }

    pub fn mul_pow2(&self, k: i64) -> Self {
        if self.is_zero() {
            return Dyadic::zero();
        }
        Dyadic { man: self.man.clone(), exp: self.exp + k }
    }

    pub fn add(&self, other: &Dyadic) -> Dyadic {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        let e = self.exp.min(other.exp);
        let a = &self.man << ((self.exp - e) as usize);
        let b = &other.man << ((other.exp - e) as usize);
        Dyadic::new(a + b, e)
    }

    pub fn sub(&self, other: &Dyadic) -> Dyadic {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Dyadic) -> Dyadic {
        if self.is_zero() || other.is_zero() {
            return Dyadic::zero();
        }
        Dyadic { man: &self.man * &other.man, exp: self.exp + other.exp }
    }

    /// Round to at most `prec` significant bits. Returns the rounded value
    /// and whether it differs from `self`.
    pub fn round(&self, prec: u64, mode: Round) -> (Dyadic, bool) {
        let bits = self.bits();
        if bits <= prec || self.is_zero() {
            return (self.clone(), false);
        }
        let shift = bits - prec;
        let (q, r) = shift_with_rem(&self.man, shift, mode);
        (Dyadic::new(q, self.exp + shift as i64), r)
    }

    /// Round so that no bit below `2^min_exp` remains.
    pub fn round_to_exp(&self, min_exp: i64, mode: Round) -> (Dyadic, bool) {
        if self.is_zero() || self.exp >= min_exp {
            return (self.clone(), false);
        }
        let shift = (min_exp - self.exp) as u64;
        let (q, r) = shift_with_rem(&self.man, shift, mode);
        (Dyadic::new(q, min_exp), r)
    }

    /// Upper bound on `|self|` with at most [`BOUND_BITS`] bits.
    pub fn abs_upper(&self) -> Dyadic {
        self.abs().round(BOUND_BITS, Round::Ceil).0
    }

    /// `self + other` rounded up to a short bound. Both are expected nonnegative.
    pub fn add_up(&self, other: &Dyadic) -> Dyadic {
        if !self.is_negative() && !other.is_negative() && !self.is_zero() && !other.is_zero() {
            let (big, small) = if self.magnitude() >= other.magnitude() { (self, other) } else { (other, self) };
            let top = big.magnitude() - BOUND_BITS as i64;
            if small.magnitude() < top {
                // small < 2^top, far below the kept bits of big
                return big.add(&Dyadic::pow2(top)).round(BOUND_BITS, Round::Ceil).0;
            }
        }
        self.add(other).round(BOUND_BITS, Round::Ceil).0
    }

    /// `self * other` rounded up to a short bound.
    pub fn mul_up(&self, other: &Dyadic) -> Dyadic {
        self.mul(other).round(BOUND_BITS, Round::Ceil).0
    }

    /// Quotient rounded in direction `mode` with `prec` significant bits.
    /// Panics on division by zero.
    pub fn div_round(&self, other: &Dyadic, prec: u64, mode: Round) -> (Dyadic, bool) {
        assert!(!other.is_zero(), "dyadic division by zero");
        if self.is_zero() {
            return (Dyadic::zero(), false);
        }
        // Scale the numerator so the integer quotient carries `prec + 1` bits.
        let want = prec as i64 + 1 + other.bits() as i64 - self.bits() as i64;
        let shift = want.max(0);
        let num = &self.man << (shift as usize);
        let (q, r) = div_rem_round(&num, &other.man, mode);
        let out = Dyadic::new(q, self.exp - other.exp - shift);
        let (rounded, lossy) = out.round(prec, mode);
        (rounded, lossy || r)
    }

    /// Upper bound on `self / other` for nonnegative operands.
    pub fn div_up(&self, other: &Dyadic) -> Dyadic {
        self.div_round(other, BOUND_BITS, Round::Ceil).0
    }

    pub fn to_rational(&self) -> BigRational {
        if self.exp >= 0 {
            BigRational::from_integer(&self.man << (self.exp as usize))
        } else {
            BigRational::new(self.man.clone(), BigInt::one() << ((-self.exp) as usize))
        }
    }

    /// Round a rational to `prec` bits in direction `mode`. Returns the
    /// rounded value and whether rounding was lossy.
    pub fn from_rational(r: &BigRational, prec: u64, mode: Round) -> (Dyadic, bool) {
        let num = Dyadic::new(r.numer().clone(), 0);
        let den = Dyadic::new(r.denom().clone(), 0);
        num.div_round(&den, prec, mode)
    }

    /// Nearest `f64` (not correctly rounded in all cases; display use only).
    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let (r, _) = self.round(60, Round::Trunc);
        let m = r.man.to_f64().unwrap_or(0.0);
        if r.exp > 1100 {
            return m.signum() * f64::INFINITY;
        }
        if r.exp < -1200 {
            return 0.0 * m.signum();
        }
        let mut v = m;
        let mut e = r.exp;
        while e != 0 {
            let step = e.clamp(-1000, 1000);
            v *= 2f64.powi(step as i32);
            e -= step;
        }
        v
    }

    /// `floor(log2 |self|)` as used for precision planning.
    pub fn log2_floor(&self) -> i64 {
        self.magnitude()
    }

    /// Scientific-notation decimal string with `digits` significant digits.
    /// `mode` controls the rounding of the last digit.
    pub fn to_sci_string(&self, digits: usize, mode: Round) -> String {
        let digits = digits.max(1);
        if self.is_zero() {
            return "0".to_string();
        }
        let neg = self.is_negative();
        // Sign-aware rounding of the magnitude.
        let mag_mode = match (mode, neg) {
            (Round::Trunc, _) => Round::Trunc,
            (Round::Ceil, false) | (Round::Floor, true) => Round::Ceil,
            _ => Round::Floor,
        };
        let abs = self.abs();
        // Estimated decimal exponent of the leading digit.
        let mut e10 = ((abs.magnitude() as f64) * std::f64::consts::LOG10_2).floor() as i64;
        let mut scaled;
        loop {
            scaled = scaled_decimal(&abs, digits as i64 - 1 - e10, mag_mode);
            let len = scaled.to_string().len();
            if len > digits {
                // Rounding can carry into an extra digit; re-scale.
                if len == digits + 1 && scaled == BigUint::from(10u32).pow(digits as u32) {
                    scaled = BigUint::from(10u32).pow(digits as u32 - 1);
                    e10 += 1;
                    break;
                }
                e10 += 1;
            } else if len < digits {
                e10 -= 1;
            } else {
                break;
            }
        }
        let s = scaled.to_string();
        let (head, tail) = s.split_at(1);
        let tail = tail.trim_end_matches('0');
        let sign = if neg { "-" } else { "" };
        let body = if tail.is_empty() { head.to_string() } else { format!("{head}.{tail}") };
        if e10 == 0 {
            format!("{sign}{body}")
        } else {
            format!("{sign}{body}e{e10}")
        }
    }
}

/// `round(|v| * 10^p)` as an integer for nonnegative `v`, rounded per `mode`.
fn scaled_decimal(v: &Dyadic, p: i64, mode: Round) -> BigUint {
    let mut num = v.man.magnitude().clone();
    let mut den = BigUint::one();
    if p >= 0 {
        num *= BigUint::from(10u32).pow(p as u32);
    } else {
        den *= BigUint::from(10u32).pow((-p) as u32);
    }
    if v.exp >= 0 {
        num <<= v.exp as usize;
    } else {
        den <<= (-v.exp) as usize;
    }
    let (q, r) = num.div_rem(&den);
    if mode == Round::Ceil && !r.is_zero() {
        q + 1u32
    } else {
        q
    }
}

fn shift_with_rem(man: &BigInt, shift: u64, mode: Round) -> (BigInt, bool) {
    let inexact = man.magnitude().trailing_zeros().is_some_and(|tz| tz < shift);
    // `>>` on BigInt rounds toward -inf.
    let q = man >> shift as usize;
    let bump = inexact
        && match mode {
            Round::Floor => false,
            Round::Ceil => true,
            Round::Trunc => man.is_negative(),
        };
    (if bump { q + 1 } else { q }, inexact)
}

fn div_rem_round(num: &BigInt, den: &BigInt, mode: Round) -> (BigInt, bool) {
    let (q, r) = num.div_mod_floor(den);
    let inexact = !r.is_zero();
    let q = match mode {
        Round::Floor => q,
        Round::Ceil => {
            if inexact {
                q + 1
            } else {
                q
            }
        }
        Round::Trunc => {
            // div_mod_floor rounds toward -inf; fix up for negative quotients.
            if inexact && (num.is_negative() != den.is_negative()) {
                q + 1
            } else {
                q
            }
        }
    };
    (q, inexact)
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let d = self.sub(other);
        d.man.sign().cmp(&Sign::NoSign)
    }
}

impl fmt::Debug for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*2^{}", self.man, self.exp)
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_sci_string(17, Round::Trunc))
    }
}

/// Serialized as a 6-digit decimal rounded up, matching its use as an
/// error bound.
impl serde::Serialize for Dyadic {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_sci_string(6, Round::Ceil))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shifted_rounding_matches_division() {
        for v in [-1025i64, -1024, -7, -1, 1, 7, 1023, 1025] {
            let man = BigInt::from(v);
            for shift in [0u64, 1, 3, 10, 12] {
                for mode in [Round::Floor, Round::Ceil, Round::Trunc] {
                    let want = div_rem_round(&man, &(BigInt::one() << shift as usize), mode);
                    assert_eq!(shift_with_rem(&man, shift, mode), want, "{v} >> {shift} {mode:?}");
                }
            }
        }
    }

    #[test]
    fn add_up_bounds_far_apart_terms() {
        let big = Dyadic::from_int(3);
        let tiny = Dyadic::pow2(-10_000);
        let s = big.add_up(&tiny);
        assert!(s > big);
        assert!(s <= big.add(&Dyadic::pow2(-(BOUND_BITS as i64) + 4)));
    }

    #[test]
    fn normalization_strips_trailing_zeros() {
        let d = Dyadic::new(BigInt::from(12), 0);
        assert_eq!(d.mantissa(), &BigInt::from(3));
        assert_eq!(d.exponent(), 2);
        assert_eq!(d, Dyadic::from_int(12));
    }

    #[test]
    fn f64_roundtrip_is_exact() {
        for v in [0.1, -3.75, 1e-300, 5e-324, 1e300] {
            let d = Dyadic::from_f64(v).unwrap();
            assert_eq!(d.to_f64(), v);
        }
    }

    #[test]
    fn rounding_directions() {
        let third = BigRational::new(1.into(), 3.into());
        let (lo, l1) = Dyadic::from_rational(&third, 20, Round::Floor);
        let (hi, l2) = Dyadic::from_rational(&third, 20, Round::Ceil);
        assert!(l1 && l2);
        assert!(lo.to_rational() < third && third < hi.to_rational());
        assert_eq!(hi.sub(&lo), Dyadic::pow2(-21));
    }

    #[test]
    fn truncation_of_negatives_moves_toward_zero() {
        let v = Dyadic::new(BigInt::from(-7), -1); // -3.5
        let (t, _) = v.round_to_exp(0, Round::Trunc);
        assert_eq!(t, Dyadic::from_int(-3));
        let (f, _) = v.round_to_exp(0, Round::Floor);
        assert_eq!(f, Dyadic::from_int(-4));
    }

    #[test]
    fn decimal_formatting() {
        assert_eq!(Dyadic::from_int(1024).to_sci_string(4, Round::Trunc), "1.024e3");
        assert_eq!(Dyadic::pow2(-1).to_sci_string(5, Round::Trunc), "5e-1");
        assert_eq!(Dyadic::from_int(-3).to_sci_string(3, Round::Trunc), "-3");
        let third = Dyadic::from_rational(&BigRational::new(1.into(), 3.into()), 80, Round::Floor).0;
        assert_eq!(third.to_sci_string(5, Round::Ceil), "3.3334e-1");
        assert_eq!(third.to_sci_string(5, Round::Floor), "3.3333e-1");
        // carry into a new leading digit
        let near_one = Dyadic::one().sub(&Dyadic::pow2(-60));
        assert_eq!(near_one.to_sci_string(3, Round::Ceil), "1");
    }
}
