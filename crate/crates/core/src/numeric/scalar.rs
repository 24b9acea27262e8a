//! The two-mode scalar: exact rationals or certified balls.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::ser::SerializeMap;
use serde::{Serialize, Serializer};

use super::ball::Ball;
use super::dyadic::{Dyadic, Round};
use super::parse::{format_rational, parse_rational};
use crate::error::{Error, Result};

/// Working precision used when an exact operand has to be turned into a
/// ball and nothing else fixes the precision.
pub const DEFAULT_PREC: u32 = 128;

/// A real number held either exactly (reduced rational) or as a ball whose
/// radius bounds the absolute error of its midpoint.
#[derive(Clone, PartialEq, Eq)]
pub enum Scalar {
    Exact(BigRational),
    Approx(Ball),
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar::Exact(BigRational::zero())
    }

    pub fn one() -> Self {
        Scalar::Exact(BigRational::one())
    }

    pub fn from_int(v: i64) -> Self {
        Scalar::Exact(BigRational::from_integer(BigInt::from(v)))
    }

    /// Panics if `den == 0`.
    pub fn ratio(num: i64, den: i64) -> Self {
        Scalar::Exact(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn from_rational(r: BigRational) -> Self {
        Scalar::Exact(r)
    }

    /// Exact value of a finite `f64`.
    pub fn from_f64(v: f64) -> Result<Self> {
        Dyadic::from_f64(v)
            .map(|d| Scalar::Exact(d.to_rational()))
            .ok_or_else(|| Error::Parse(format!("non-finite float {v}")))
    }

    pub fn is_exact(&self) -> bool {
        matches!(self, Scalar::Exact(_))
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            Scalar::Exact(r) => Some(r),
            Scalar::Approx(_) => None,
        }
    }

    /// Precision of an approximate value; `None` for exact values.
    pub fn precision(&self) -> Option<u32> {
        match self {
            Scalar::Exact(_) => None,
            Scalar::Approx(b) => Some(b.prec()),
        }
    }

    pub fn to_ball(&self, prec: u32) -> Ball {
        match self {
            Scalar::Exact(r) => Ball::from_rational(r, prec),
            Scalar::Approx(b) => b.clone(),
        }
    }

    /// Absolute error bound of the stored value; zero when exact.
    pub fn radius(&self) -> Dyadic {
        match self {
            Scalar::Exact(_) => Dyadic::zero(),
            Scalar::Approx(b) => b.rad().clone(),
        }
    }

    /// Upper bound on `|x|`.
    pub fn abs_upper(&self) -> Dyadic {
        match self {
            Scalar::Exact(r) => Dyadic::from_rational(&r.abs(), super::dyadic::BOUND_BITS, Round::Ceil).0,
            Scalar::Approx(b) => b.abs_upper(),
        }
    }

    /// Lower bound on `|x|` (zero when the value may vanish).
    pub fn abs_lower(&self) -> Dyadic {
        match self {
            Scalar::Exact(r) => Dyadic::from_rational(&r.abs(), super::dyadic::BOUND_BITS, Round::Floor).0,
            Scalar::Approx(b) => b.abs_lower(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Scalar::Exact(r) => r.is_zero(),
            Scalar::Approx(b) => b.mid().is_zero() && b.rad().is_zero(),
        }
    }

    /// Certain sign of the value, `None` when a ball straddles zero.
    pub fn sign(&self) -> Option<Ordering> {
        match self {
            Scalar::Exact(r) => Some(r.cmp(&BigRational::zero())),
            Scalar::Approx(b) => b.sign(),
        }
    }

    /// Certain ordering against `other`, `None` if undecidable from the
    /// enclosures.
    pub fn cmp_certain(&self, other: &Scalar) -> Option<Ordering> {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => Some(a.cmp(b)),
            _ => (self - other).sign(),
        }
    }

    pub fn certainly_lt(&self, other: &Scalar) -> bool {
        self.cmp_certain(other) == Some(Ordering::Less)
    }

    pub fn certainly_le(&self, other: &Scalar) -> bool {
        matches!(self.cmp_certain(other), Some(Ordering::Less | Ordering::Equal))
    }

    pub fn abs(&self) -> Scalar {
        match self {
            Scalar::Exact(r) => Scalar::Exact(r.abs()),
            Scalar::Approx(b) => Scalar::Approx(b.abs()),
        }
    }

    pub fn checked_div(&self, other: &Scalar) -> Result<Scalar> {
        match (self, other) {
            (Scalar::Exact(a), Scalar::Exact(b)) => {
                if b.is_zero() {
                    Err(Error::DivisionByZero)
                } else {
                    Ok(Scalar::Exact(a / b))
                }
            }
            _ => {
                let prec = joint_prec(self, other);
                self.to_ball(prec)
                    .div(&other.to_ball(prec))
                    .map(Scalar::Approx)
                    .ok_or(Error::DivisionByZero)
            }
        }
    }

    pub fn recip(&self) -> Result<Scalar> {
        Scalar::one().checked_div(self)
    }

    pub fn powi(&self, n: i64) -> Result<Scalar> {
        match self {
            Scalar::Exact(r) => {
                if n < 0 && r.is_zero() {
                    return Err(Error::DivisionByZero);
                }
                let e = i32::try_from(n).map_err(|_| Error::Domain("exponent out of range".into()))?;
                Ok(Scalar::Exact(num_traits::Pow::pow(r, e)))
            }
            Scalar::Approx(b) => b.powi(n).map(Scalar::Approx).ok_or(Error::DivisionByZero),
        }
    }

    /// `e^x`. Exact only for `x == 0`.
    pub fn exp(&self, prec: u32) -> Scalar {
        if self.is_zero() && self.is_exact() {
            return Scalar::one();
        }
        let p = self.precision().unwrap_or(prec).max(prec);
        Scalar::Approx(self.to_ball(p + 8).exp().with_prec(p))
    }

    /// Natural logarithm. Exact only for `x == 1`.
    pub fn ln(&self, prec: u32) -> Result<Scalar> {
        if let Scalar::Exact(r) = self {
            if r.is_one() {
                return Ok(Scalar::zero());
            }
        }
        let p = self.precision().unwrap_or(prec).max(prec);
        self.to_ball(p + 8)
            .ln()
            .map(|b| Scalar::Approx(b.with_prec(p)))
            .ok_or_else(|| Error::Domain("logarithm of a value not certified positive".into()))
    }

    /// Round an exact value to a ball; approximate values are re-rounded.
    pub fn approximate(&self, prec: u32) -> Scalar {
        match self {
            Scalar::Exact(r) => Scalar::Approx(Ball::from_rational(r, prec)),
            Scalar::Approx(b) => Scalar::Approx(b.with_prec(prec)),
        }
    }

    /// Rounds an exact value to a ball once its numerator and denominator
    /// together need more than `4 * prec` bits; otherwise unchanged.
    pub fn compact(&self, prec: u32) -> Scalar {
        match self {
            Scalar::Exact(r) if r.numer().bits() + r.denom().bits() > 4 * prec as u64 => self.approximate(prec),
            _ => self.clone(),
        }
    }

    /// Widen by an extra absolute error. Exact values become balls.
    pub fn inflate(&self, extra: &Dyadic, prec: u32) -> Scalar {
        if extra.is_zero() {
            return self.clone();
        }
        let p = self.precision().unwrap_or(prec);
        Scalar::Approx(self.to_ball(p).inflate(extra))
    }

    pub fn to_f64(&self) -> f64 {
        match self {
            Scalar::Exact(r) => Dyadic::from_rational(r, 64, Round::Trunc).0.to_f64(),
            Scalar::Approx(b) => b.to_f64(),
        }
    }

    /// Midpoint rendered in scientific notation plus a radius that also
    /// covers the decimal rounding of the midpoint.
    pub fn to_decimal_enclosure(&self, digits: usize) -> (String, Dyadic) {
        let (mid, rad) = match self {
            Scalar::Exact(r) => {
                (Dyadic::from_rational(r, (digits as f64 * 3.33) as u64 + 16, Round::Trunc).0, Dyadic::zero())
            }
            Scalar::Approx(b) => (b.mid().clone(), b.rad().clone()),
        };
        let text = mid.to_sci_string(digits, Round::Trunc);
        let shown = parse_rational(&text).expect("own decimal output parses");
        let exact = match self {
            Scalar::Exact(r) => r.clone(),
            Scalar::Approx(_) => mid.to_rational(),
        };
        let conv = Dyadic::from_rational(&(exact - shown).abs(), super::dyadic::BOUND_BITS, Round::Ceil).0;
        (text, rad.add_up(&conv))
    }
}

fn joint_prec(a: &Scalar, b: &Scalar) -> u32 {
    match (a.precision(), b.precision()) {
        (Some(x), Some(y)) => x.max(y),
        (Some(x), None) | (None, Some(x)) => x,
        (None, None) => DEFAULT_PREC,
    }
}

macro_rules! binop {
    ($trait:ident, $method:ident, $exact:expr, $ball:ident) => {
        impl<'a> $trait<&'a Scalar> for &'a Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &'a Scalar) -> Scalar {
                match (self, rhs) {
                    (Scalar::Exact(a), Scalar::Exact(b)) => Scalar::Exact($exact(a, b)),
                    _ => {
                        let prec = joint_prec(self, rhs);
                        Scalar::Approx(self.to_ball(prec).$ball(&rhs.to_ball(prec)))
                    }
                }
            }
        }
        impl $trait<Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                (&self).$method(&rhs)
            }
        }
        impl<'a> $trait<&'a Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &'a Scalar) -> Scalar {
                (&self).$method(rhs)
            }
        }
    };
}

binop!(Add, add, |a: &BigRational, b: &BigRational| a + b, add);
binop!(Sub, sub, |a: &BigRational, b: &BigRational| a - b, sub);
binop!(Mul, mul, |a: &BigRational, b: &BigRational| a * b, mul);

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        match self {
            Scalar::Exact(r) => Scalar::Exact(-r),
            Scalar::Approx(b) => Scalar::Approx(b.neg()),
        }
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        -&self
    }
}

impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar::from_int(v)
    }
}

impl From<BigRational> for Scalar {
    fn from(r: BigRational) -> Self {
        Scalar::Exact(r)
    }
}

impl From<Ball> for Scalar {
    fn from(b: Ball) -> Self {
        Scalar::Approx(b)
    }
}

impl FromStr for Scalar {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_rational(s).map(Scalar::Exact)
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Exact(r) => write!(f, "{}", format_rational(r)),
            Scalar::Approx(b) => write!(f, "{b:?}"),
        }
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Exact values serialize as `"num/den"` strings; balls as an object with a
/// decimal midpoint and a radius that encloses the true value.
impl Serialize for Scalar {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Scalar::Exact(r) => serializer.serialize_str(&format_rational(r)),
            Scalar::Approx(_) => {
                let (mid, rad) = self.to_decimal_enclosure(30);
                let mut map = serializer.serialize_map(Some(2))?;
                map.serialize_entry("approx", &mid)?;
                map.serialize_entry("radius", &rad.to_sci_string(3, Round::Ceil))?;
                map.end()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compact_rounds_only_large_rationals() {
        let small = Scalar::ratio(5, 2).powi(10).unwrap();
        assert_eq!(small.compact(64), small);
        let large = Scalar::ratio(5, 2).powi(400).unwrap();
        let c = large.compact(64);
        assert!(!c.is_exact());
        assert!((&c - &large).abs_lower().is_zero());
    }

    #[test]
    fn exact_arithmetic_stays_exact() {
        let a = Scalar::ratio(1, 3);
        let b = Scalar::ratio(1, 6);
        assert_eq!(&a + &b, Scalar::ratio(1, 2));
        assert_eq!(&a * &b, Scalar::ratio(1, 18));
        assert_eq!(a.checked_div(&b).unwrap(), Scalar::from_int(2));
        assert_eq!(Scalar::ratio(2, 3).powi(-2).unwrap(), Scalar::ratio(9, 4));
    }

    #[test]
    fn mixed_arithmetic_promotes_to_ball() {
        let a = Scalar::ratio(1, 3);
        let e = Scalar::one().exp(128);
        let s = &a + &e;
        assert!(!s.is_exact());
        assert!((s.to_f64() - (1.0 / 3.0 + std::f64::consts::E)).abs() < 1e-15);
    }

    #[test]
    fn division_by_zero_is_an_error() {
        assert_eq!(Scalar::one().checked_div(&Scalar::zero()), Err(Error::DivisionByZero));
        assert_eq!(Scalar::zero().powi(-1), Err(Error::DivisionByZero));
    }

    #[test]
    fn ln_of_one_is_exact_zero() {
        assert_eq!(Scalar::one().ln(64).unwrap(), Scalar::zero());
        assert!(Scalar::zero().ln(64).is_err());
        assert!(Scalar::from_int(-2).ln(64).is_err());
    }

    #[test]
    fn certain_comparisons() {
        let third = Scalar::ratio(1, 3).approximate(64);
        assert!(third.certainly_lt(&Scalar::ratio(1, 2)));
        assert_eq!(third.cmp_certain(&Scalar::ratio(1, 3)), None);
        assert!(Scalar::ratio(1, 3).certainly_le(&Scalar::ratio(1, 3)));
    }

    #[test]
    fn decimal_enclosure_contains_value() {
        let x = Scalar::ratio(2, 7).approximate(128);
        let (text, rad) = x.to_decimal_enclosure(10);
        let shown = parse_rational(&text).unwrap();
        let err = (shown - BigRational::new(2.into(), 7.into())).abs();
        assert!(err <= rad.to_rational());
    }

    #[test]
    fn serializes_exact_as_fraction() {
        let v = serde_json::to_value(Scalar::ratio(-3, 12)).unwrap();
        assert_eq!(v, serde_json::json!("-1/4"));
        let v = serde_json::to_value(Scalar::ratio(1, 3).approximate(64)).unwrap();
        assert!(v.get("approx").is_some() && v.get("radius").is_some());
    }
}
