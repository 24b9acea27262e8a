//! Rational literals: `"p/q"`, integers, and decimals with optional exponent.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Pow, Zero};

use crate::error::{Error, Result};

/// Parses `"3"`, `"-7/4"`, `"0.125"`, `"1e-12"` or `"2.5E3"` into an exact
/// rational. Decimals are exact, so no information is lost.
pub fn parse_rational(text: &str) -> Result<BigRational> {
    let s = text.trim();
    let err = || Error::Parse(format!("invalid rational literal {text:?}"));
    if s.is_empty() {
        return Err(err());
    }
    if let Some((n, d)) = s.split_once('/') {
        let num = parse_decimal(n.trim()).ok_or_else(err)?;
        let den = parse_decimal(d.trim()).ok_or_else(err)?;
        if den.is_zero() {
            return Err(Error::Parse(format!("zero denominator in {text:?}")));
        }
        return Ok(num / den);
    }
    parse_decimal(s).ok_or_else(err)
}

fn parse_decimal(s: &str) -> Option<BigRational> {
    let (neg, body) = match s.as_bytes().first()? {
        b'-' => (true, &s[1..]),
        b'+' => (false, &s[1..]),
        _ => (false, s),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], body[i + 1..].parse::<i32>().ok()?),
        None => (body, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    let all_digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    if !all_digits(int_part) || !all_digits(frac_part) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mut value = BigRational::from_integer(digits.parse::<BigInt>().ok()?);
    let scale = exponent.checked_sub(frac_part.len() as i32)?;
    let ten = BigRational::from_integer(BigInt::from(10));
    value *= Pow::pow(&ten, scale);
    Some(if neg { -value } else { value })
}

/// `"p/q"` in lowest terms, or `"p"` for integers.
pub fn format_rational(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}
