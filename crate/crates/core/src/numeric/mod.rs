//! Scalar tower and certified summation.
//!
//! [`Scalar`] is either an exact [`BigRational`](num_rational::BigRational)
//! or a [`Ball`]: a dyadic midpoint with a radius bounding its absolute
//! error. Exact operands stay exact; mixing in a ball promotes the result.

mod ball;
mod dyadic;
mod parse;
mod scalar;
mod summation;

pub use ball::Ball;
pub use dyadic::{Dyadic, Round, BOUND_BITS};
pub use parse::{format_rational, parse_rational};
pub use scalar::{Scalar, DEFAULT_PREC};
pub use summation::{
    bits_for_target, escalate, sum_with_tail, sum_with_tail_capped, PrecisionPolicy, SeriesSum,
    DEFAULT_INDEX_CAP,
};

/// Converts a positive `f64` tolerance into an exact dyadic bound.
pub fn tolerance(value: f64) -> crate::Result<Dyadic> {
    match Dyadic::from_f64(value) {
        Some(d) if d.signum() > 0 => Ok(d),
        _ => Err(crate::Error::Domain(format!("tolerance must be positive and finite, got {value}"))),
    }
}
