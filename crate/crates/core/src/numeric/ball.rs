//! Midpoint-radius balls over [`Dyadic`] midpoints.
//!
//! A ball `(mid, rad)` at working precision `prec` encloses one real value:
//! `|x - mid| <= rad`. Every operation rounds its midpoint to `prec` bits and
//! folds the rounding error, plus the propagated input radii, into the
//! output radius. Radii are rounded up to [`BOUND_BITS`](super::dyadic::BOUND_BITS).

use std::cmp::Ordering;
use std::fmt;

use num_rational::BigRational;

use super::dyadic::{Dyadic, Round};

#[derive(Clone, PartialEq, Eq)]
pub struct Ball {
    mid: Dyadic,
    rad: Dyadic,
    prec: u32,
}

/// Rounds `exact` to `prec` bits, returning the rounded value and an
/// upper bound on the rounding error.
fn round_mid(exact: Dyadic, prec: u32) -> (Dyadic, Dyadic) {
    let (r, lossy) = exact.round(prec as u64, Round::Trunc);
    if !lossy {
        return (r, Dyadic::zero());
    }
    let err = exact.sub(&r).abs_upper();
    (r, err)
}

impl Ball {
    pub fn new(mid: Dyadic, rad: Dyadic, prec: u32) -> Self {
        debug_assert!(!rad.is_negative());
        let (mid, err) = round_mid(mid, prec);
        Ball { mid, rad: rad.add_up(&err), prec }
    }

    /// An exact point. The midpoint keeps all of its bits.
    pub fn exact(mid: Dyadic, prec: u32) -> Self {
        Ball { mid, rad: Dyadic::zero(), prec }
    }

    pub fn from_int(v: i64, prec: u32) -> Self {
        Ball::exact(Dyadic::from_int(v), prec)
    }

    pub fn from_rational(r: &BigRational, prec: u32) -> Self {
        let (lo, lossy) = Dyadic::from_rational(r, prec as u64, Round::Floor);
        if !lossy {
            return Ball::exact(lo, prec);
        }
        let (hi, _) = Dyadic::from_rational(r, prec as u64, Round::Ceil);
        Ball { rad: hi.sub(&lo).abs_upper(), mid: lo, prec }
    }

    pub fn mid(&self) -> &Dyadic {
        &self.mid
    }

    pub fn rad(&self) -> &Dyadic {
        &self.rad
    }

    pub fn prec(&self) -> u32 {
        self.prec
    }

    pub fn with_prec(&self, prec: u32) -> Ball {
        Ball::new(self.mid.clone(), self.rad.clone(), prec)
    }

    /// Widen the radius by `extra`.
    pub fn inflate(&self, extra: &Dyadic) -> Ball {
        Ball { mid: self.mid.clone(), rad: self.rad.add_up(&extra.abs()), prec: self.prec }
    }

    pub fn is_exact(&self) -> bool {
        self.rad.is_zero()
    }

    pub fn lower(&self) -> Dyadic {
        self.mid.sub(&self.rad)
    }

    pub fn upper(&self) -> Dyadic {
        self.mid.add(&self.rad)
    }

    /// Upper bound on `|x|` for every `x` in the ball.
    pub fn abs_upper(&self) -> Dyadic {
        self.mid.abs().add(&self.rad).round(super::dyadic::BOUND_BITS, Round::Ceil).0
    }

    /// Lower bound on `|x|`; zero if the ball contains zero.
    pub fn abs_lower(&self) -> Dyadic {
        let d = self.mid.abs().sub(&self.rad);
        if d.is_negative() {
            Dyadic::zero()
        } else {
            d.round(super::dyadic::BOUND_BITS, Round::Floor).0
        }
    }

    pub fn contains_zero(&self) -> bool {
        self.mid.abs() <= self.rad
    }

    /// Certain sign, or `None` if the ball straddles or touches zero
    /// without being exactly zero.
    pub fn sign(&self) -> Option<Ordering> {
        if self.mid.is_zero() && self.rad.is_zero() {
            return Some(Ordering::Equal);
        }
        if self.lower().signum() > 0 {
            Some(Ordering::Greater)
        } else if self.upper().signum() < 0 {
            Some(Ordering::Less)
        } else {
            None
        }
    }

    pub fn contains(&self, x: &Dyadic) -> bool {
        self.mid.sub(x).abs() <= self.rad
    }

    pub fn neg(&self) -> Ball {
        Ball { mid: self.mid.neg(), rad: self.rad.clone(), prec: self.prec }
    }

    pub fn abs(&self) -> Ball {
        if self.mid.is_negative() {
            self.neg()
        } else {
            self.clone()
        }
    }

    pub fn add(&self, other: &Ball) -> Ball {
        let prec = self.prec.max(other.prec);
        if !self.mid.is_zero() && !other.mid.is_zero() {
            let (big, small) = if self.mid.magnitude() >= other.mid.magnitude() { (self, other) } else { (other, self) };
            if small.mid.magnitude() + (prec as i64) + 2 < big.mid.magnitude() {
                // Fold the negligible midpoint into the radius.
                let (mid, err) = round_mid(big.mid.clone(), prec);
                let rad = self.rad.add_up(&other.rad).add_up(&small.mid.abs_upper()).add_up(&err);
                return Ball { mid, rad, prec };
            }
        }
        let (mid, err) = round_mid(self.mid.add(&other.mid), prec);
        let rad = self.rad.add_up(&other.rad).add_up(&err);
        Ball { mid, rad, prec }
    }

    pub fn sub(&self, other: &Ball) -> Ball {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Ball) -> Ball {
        let prec = self.prec.max(other.prec);
        let (mid, err) = round_mid(self.mid.mul(&other.mid), prec);
        let rad = self
            .mid
            .abs()
            .mul_up(&other.rad)
            .add_up(&other.mid.abs().mul_up(&self.rad))
            .add_up(&self.rad.mul_up(&other.rad))
            .add_up(&err);
        Ball { mid, rad, prec }
    }

    pub fn mul_pow2(&self, k: i64) -> Ball {
        Ball { mid: self.mid.mul_pow2(k), rad: self.rad.mul_pow2(k), prec: self.prec }
    }

    /// `None` if `other` may be zero.
    pub fn div(&self, other: &Ball) -> Option<Ball> {
        if other.contains_zero() {
            return None;
        }
        let prec = self.prec.max(other.prec);
        let (q, lossy) = self.mid.div_round(&other.mid, prec as u64, Round::Trunc);
        // Two truncation steps inside div_round: at most two units in the last place.
        let round_err = if lossy {
            Dyadic::pow2(q.magnitude() - prec as i64 + 2)
        } else {
            Dyadic::zero()
        };
        let mut rad = round_err.clone();
        if !self.rad.is_zero() || !other.rad.is_zero() {
            // |a/b - am/bm| <= (ar + |am/bm| br) / (|bm| - br)
            let q_abs = q.abs().add_up(&round_err);
            let num = self.rad.add_up(&q_abs.mul_up(&other.rad));
            let den = other.mid.abs().sub(&other.rad).round(super::dyadic::BOUND_BITS, Round::Floor).0;
            rad = rad.add_up(&num.div_up(&den));
        }
        Some(Ball { mid: q, rad, prec })
    }

    pub fn recip(&self) -> Option<Ball> {
        Ball::from_int(1, self.prec).div(self)
    }

    pub fn sqr(&self) -> Ball {
        self.mul(self)
    }

    pub fn powi(&self, n: i64) -> Option<Ball> {
        if n < 0 {
            return self.powi(-n)?.recip();
        }
        let mut result = Ball::from_int(1, self.prec);
        let mut base = self.clone();
        let mut e = n as u64;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.sqr();
            }
        }
        Some(result)
    }

    /// Exponential function.
    pub fn exp(&self) -> Ball {
        let prec = self.prec;
        let core = exp_point(&self.mid, prec);
        if self.rad.is_zero() {
            return core;
        }
        // |e^(m+d) - e^m| <= e^m (e^r - 1) for |d| <= r
        let growth = if self.rad <= Dyadic::pow2(-1) {
            self.rad.mul_pow2(1)
        } else {
            exp_point(&self.rad, 64).upper().sub(&Dyadic::one()).abs_upper()
        };
        core.inflate(&core.abs_upper().mul_up(&growth))
    }

    /// Natural logarithm; `None` unless the ball is certainly positive.
    pub fn ln(&self) -> Option<Ball> {
        if self.lower().signum() <= 0 {
            return None;
        }
        let core = ln_point(&self.mid, self.prec);
        if self.rad.is_zero() {
            return Some(core);
        }
        // |ln(m+d) - ln m| <= r / (m - r)
        let low = self.lower().round(super::dyadic::BOUND_BITS, Round::Floor).0;
        Some(core.inflate(&self.rad.div_up(&low)))
    }

    pub fn to_f64(&self) -> f64 {
        self.mid.to_f64()
    }
}

/// `e^x` for an exact dyadic `x`, returned at precision `prec`.
fn exp_point(x: &Dyadic, prec: u32) -> Ball {
    if x.is_zero() {
        return Ball::from_int(1, prec);
    }
    // Reduce to |y| < 2^-10 and square back up.
    let mag = x.magnitude();
    let squarings = if mag >= -10 { (mag + 11) as u32 } else { 0 };
    let wp = prec + squarings + 24;
    let y = Ball::exact(x.mul_pow2(-(squarings as i64)), wp);
    let y_abs = y.abs_upper();
    let mut sum = Ball::from_int(1, wp);
    let mut term = Ball::from_int(1, wp);
    let stop = Dyadic::pow2(-(wp as i64) - 2);
    let mut n = 1i64;
    loop {
        term = term.mul(&y).div(&Ball::from_int(n, wp)).expect("n > 0");
        sum = sum.add(&term);
        if term.abs_upper() < stop {
            break;
        }
        n += 1;
    }
    // Remaining terms: |y|^(n+1)/(n+1)! * 1/(1-|y|) <= 2 |term| |y|.
    let tail = term.abs_upper().mul_up(&y_abs).mul_pow2(1);
    let mut out = sum.inflate(&tail);
    for _ in 0..squarings {
        out = out.sqr();
    }
    out.with_prec(prec)
}

/// `2 atanh(z) = ln((1+z)/(1-z))` for an exact |z| <= 1/3.
fn atanh2_point(z: &Ball, wp: u32) -> Ball {
    let z2 = z.sqr();
    let mut power = z.clone();
    let mut sum = z.clone();
    let stop = Dyadic::pow2(-(wp as i64) - 2);
    let mut k = 1i64;
    loop {
        power = power.mul(&z2);
        let term = power.div(&Ball::from_int(2 * k + 1, wp)).expect("odd > 0");
        sum = sum.add(&term);
        if term.abs_upper() < stop {
            break;
        }
        k += 1;
    }
    // Remaining terms are bounded by |power| |z|^2 / (1 - z^2) <= 2 |power| z^2.
    let tail = power.abs_upper().mul_up(&z2.abs_upper()).mul_pow2(1);
    sum.inflate(&tail).mul_pow2(1)
}

pub fn ln2(prec: u32) -> Ball {
    let wp = prec + 16;
    let third = Ball::from_int(1, wp).div(&Ball::from_int(3, wp)).expect("nonzero");
    atanh2_point(&third, wp).with_prec(prec)
}

/// `ln x` for an exact positive dyadic `x`.
fn ln_point(x: &Dyadic, prec: u32) -> Ball {
    debug_assert!(x.signum() > 0);
    // x = u * 2^t with u in [3/4, 3/2)
    let mut t = x.magnitude();
    let mut u = x.mul_pow2(-t);
    if u > Dyadic::new(3.into(), -1) {
        u = u.mul_pow2(-1);
        t += 1;
    }
    let t_bits = 64 - (t.unsigned_abs()).leading_zeros();
    let wp = prec + 24 + t_bits;
    let ub = Ball::exact(u, wp);
    let one = Ball::from_int(1, wp);
    let z = ub.sub(&one).div(&ub.add(&one)).expect("u + 1 > 0");
    let mut out = atanh2_point(&z, wp);
    if t != 0 {
        out = out.add(&ln2(wp).mul(&Ball::from_int(t, wp)));
    }
    out.with_prec(prec)
}

impl fmt::Debug for Ball {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{} +/- {}]", self.mid, self.rad.to_sci_string(3, Round::Ceil))
    }
}

impl fmt::Display for Ball {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}
