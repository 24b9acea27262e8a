//! q-analogue special functions.
//!
//! Finite products are evaluated left to right in the mode of their inputs,
//! so exact `q` gives exact results. Infinite products are truncated with a
//! proven tail bound folded into the returned ball.

use serde::Serialize;

use crate::numeric::{
    bits_for_target, escalate, sum_with_tail, Ball, Dyadic, PrecisionPolicy, Scalar, DEFAULT_INDEX_CAP,
};
use crate::{Error, Result};

/// `1 - q` below this is accepted but flagged as ill-conditioned.
const CONDITIONING_GAP_LOG2: i64 = -16;

/// The nome `q`, certified to lie in `(0, 1)`.
#[derive(Clone, Debug, PartialEq)]
pub struct QParam {
    q: Scalar,
}

impl QParam {
    pub fn new(q: Scalar) -> Result<Self> {
        if q.sign() == Some(std::cmp::Ordering::Greater) && q.certainly_lt(&Scalar::one()) {
            Ok(QParam { q })
        } else {
            Err(Error::Domain(format!("q must lie strictly between 0 and 1, got {q}")))
        }
    }

    pub fn value(&self) -> &Scalar {
        &self.q
    }

    /// `true` when `1 - q < 2^-16`; truncation depth of the infinite products
    /// then grows like `1 / (1 - q)`.
    pub fn is_ill_conditioned(&self) -> bool {
        let gap = &Scalar::one() - &self.q;
        gap.abs_upper() < Dyadic::pow2(CONDITIONING_GAP_LOG2)
    }

    pub fn conditioning_warning(&self) -> Option<String> {
        self.is_ill_conditioned().then(|| {
            format!("q = {} is within 2^-16 of 1; infinite products need about 1/(1-q) factors", self.q)
        })
    }
}

/// The base `a` of the transform `Y = a^X`, certified `> 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct BaseParam {
    a: Scalar,
}

impl BaseParam {
    pub fn new(a: Scalar) -> Result<Self> {
        if Scalar::one().certainly_lt(&a) {
            Ok(BaseParam { a })
        } else {
            Err(Error::Domain(format!("base a must exceed 1, got {a}")))
        }
    }

    pub fn value(&self) -> &Scalar {
        &self.a
    }

    /// `1/a`, the nome of the `(1/a; 1/a)_j` products.
    pub fn inverse(&self) -> QParam {
        QParam { q: self.a.recip().expect("a > 1 is nonzero") }
    }
}

/// `(q;q)_j = prod_{s=1}^{j} (1 - q^s)`, with `(q;q)_0 = 1`.
pub fn q_pochhammer(q: &QParam, j: usize) -> Scalar {
    let one = Scalar::one();
    let mut power = one.clone();
    let mut acc = one.clone();
    for _ in 0..j {
        power = &power * q.value();
        acc = &acc * &(&one - &power);
    }
    acc
}

/// `[j]_q! = (q;q)_j / (1-q)^j`.
pub fn q_factorial(q: &QParam, j: usize) -> Scalar {
    // (1 - q^s)/(1 - q) = 1 + q + ... + q^(s-1)
    let one = Scalar::one();
    let mut bracket = Scalar::zero();
    let mut power = one.clone();
    let mut acc = one;
    for _ in 0..j {
        bracket = &bracket + &power;
        power = &power * q.value();
        acc = &acc * &bracket;
    }
    acc
}

/// Encloses `prod_{j>=0} (1 + x0 q^j)` and maps it through `finish`, stopping
/// once the mapped ball is narrower than `target`. Requires `x0 > -1`.
fn infinite_product<F>(x0: &Scalar, q: &QParam, target: &Dyadic, finish: F) -> Result<Scalar>
where
    F: Fn(&Ball) -> Option<Ball>,
{
    if !Scalar::from_int(-1).certainly_lt(x0) {
        return Err(Error::Domain(format!("product factor base {x0} must exceed -1")));
    }
    let policy = PrecisionPolicy::with_target(target.clone());
    let policy = PrecisionPolicy { initial_bits: bits_for_target(target), ..policy };
    escalate(&policy, |bits| {
        let qb = q.value().to_ball(bits);
        let x0b = x0.to_ball(bits);
        let x0_abs = x0b.abs_upper();
        let gap = Ball::from_int(1, bits).sub(&qb);
        let one = Ball::from_int(1, bits);
        let half = Dyadic::pow2(-1);
        let mut power = one.clone();
        let mut prod = one.clone();
        for _ in 0..DEFAULT_INDEX_CAP {
            prod = prod.mul(&one.add(&x0b.mul(&power)));
            power = power.mul(&qb);
            let bare = finish(&prod).ok_or(Error::DivisionByZero)?;
            if bare.rad() > target {
                return Err(Error::PrecisionExhausted { bits });
            }
            // Remaining factors: sum |x0| q^i over i > j is u = |x0| q^(j+1) / (1-q),
            // and the tail product lies in [1 - u, e^u], so |tail - 1| <= u / (1 - u).
            let u = Ball::exact(x0_abs.clone(), bits).mul(&power).div(&gap).ok_or(Error::DivisionByZero)?;
            let u = u.abs_upper();
            if u < half {
                let one_minus_u = Dyadic::one().sub(&u);
                let rel = u.div_up(&one_minus_u);
                let enclosure = prod.inflate(&prod.abs_upper().mul_up(&rel));
                let out = finish(&enclosure).ok_or(Error::DivisionByZero)?;
                if out.rad() <= target {
                    return Ok(Scalar::Approx(out));
                }
            }
        }
        Err(Error::NonConvergent { cap: DEFAULT_INDEX_CAP })
    })
}

/// `(q;q)_inf` enclosed in a ball of radius at most `target`.
pub fn q_pochhammer_inf(q: &QParam, target: &Dyadic) -> Result<Scalar> {
    // prod_{s>=1} (1 - q^s) = prod_{j>=0} (1 + (-q) q^j)
    infinite_product(&-q.value(), q, target, |b| Some(b.clone()))
}

/// `e_q(t) = prod_{j>=0} (1 - t (1-q) q^j)^{-1}` for `t < 1/(1-q)`.
pub fn q_exponential(q: &QParam, t: &Scalar, target: &Dyadic) -> Result<Scalar> {
    if t.is_zero() {
        return Ok(Scalar::one());
    }
    let x0 = -&(t * &(&Scalar::one() - q.value()));
    if !Scalar::from_int(-1).certainly_lt(&x0) {
        return Err(Error::Domain(format!("e_q(t) needs t < 1/(1-q), got t = {t}")));
    }
    infinite_product(&x0, q, target, |b| b.recip())
}

/// `prod_{j>=0} (1 + x0 q^j)` for `x0 > -1`, radius at most `target`.
pub fn shifted_product(q: &QParam, x0: &Scalar, target: &Dyadic) -> Result<Scalar> {
    infinite_product(x0, q, target, |b| Some(b.clone()))
}

/// `ln prod_{j>=0} (1 + x0 q^j)` for `x0 >= 0`, summed in the log domain so
/// that huge products keep an absolute error target.
pub fn ln_shifted_product(q: &QParam, x0: &Scalar, target: &Dyadic) -> Result<Scalar> {
    if x0.sign() == Some(std::cmp::Ordering::Less) || x0.sign().is_none() {
        return Err(Error::Domain(format!("log-product needs x0 >= 0, got {x0}")));
    }
    let half = target.mul_pow2(-1);
    let policy = PrecisionPolicy { initial_bits: bits_for_target(target), ..PrecisionPolicy::with_target(target.clone()) };
    escalate(&policy, |bits| {
        let qb = q.value().to_ball(bits);
        let x0b = x0.to_ball(bits);
        let gap = Ball::from_int(1, bits).sub(&qb);
        let mut power = Ball::from_int(1, bits);
        let sum = sum_with_tail(
            |_| {
                let x = x0b.mul(&power);
                power = power.mul(&qb);
                Ball::from_int(1, bits).add(&x).ln().map(Scalar::Approx).ok_or(Error::DivisionByZero)
            },
            // ln(1 + x) <= x, so the tail is at most x0 q^(n+1) / (1 - q)
            |n, _| {
                let next = qb.powi(n as i64 + 1)?;
                Some(x0b.mul(&next).div(&gap)?.abs_upper())
            },
            &half,
        )?;
        Ok(sum.enclosure(bits))
    })
}

/// `prod_{s=0}^{terms-1} (1 - t / a^s)`, the truncation of the product
/// that vanishes at every `t = a^k`.
pub fn euler_product(a: &BaseParam, t: &Scalar, terms: usize) -> Result<Scalar> {
    if terms == 0 {
        return Err(Error::Domain("euler_product needs at least one factor".into()));
    }
    let inv = a.inverse();
    let one = Scalar::one();
    let mut scale = one.clone();
    let mut acc = one.clone();
    for _ in 0..terms {
        acc = &acc * &(&one - &(t * &scale));
        scale = &scale * inv.value();
    }
    Ok(acc)
}

/// Gaussian binomial `[n choose j]_q = (q;q)_n / ((q;q)_j (q;q)_{n-j})`.
pub fn gaussian_binomial(q: &QParam, n: usize, j: usize) -> Result<Scalar> {
    if j > n {
        return Err(Error::Index(format!("gaussian binomial needs j <= n, got j = {j}, n = {n}")));
    }
    // prod_{i=1}^{k} (1 - q^(n-k+i)) / (1 - q^i) with k = min(j, n-j)
    let k = j.min(n - j);
    let one = Scalar::one();
    let mut num = one.clone();
    let mut den = one.clone();
    for i in 1..=k {
        num = &num * &(&one - &q.value().powi((n - k + i) as i64)?);
        den = &den * &(&one - &q.value().powi(i as i64)?);
    }
    num.checked_div(&den)
}

/// Both sides of the finite q-binomial theorem
/// `prod_{s<n} (1 + q^s t) = sum_{j<=n} q^(j(j-1)/2) [n choose j]_q t^j`.
#[derive(Clone, Debug, Serialize)]
pub struct EulerIdentityReport {
    pub n: usize,
    pub product_side: Scalar,
    pub series_side: Scalar,
    pub equal: bool,
}

pub fn verify_euler_identity(q: &QParam, t: &Scalar, n: usize) -> Result<EulerIdentityReport> {
    if !q.value().is_exact() || !t.is_exact() {
        return Err(Error::Mode("the finite Euler identity is checked in exact arithmetic only".into()));
    }
    if n == 0 {
        return Err(Error::Domain("identity order n must be positive".into()));
    }
    let one = Scalar::one();
    let mut product_side = one.clone();
    let mut qs = one.clone();
    for _ in 0..n {
        product_side = &product_side * &(&one + &(&qs * t));
        qs = &qs * q.value();
    }
    let mut series_side = Scalar::zero();
    let mut t_pow = one.clone();
    for j in 0..=n {
        let tri = (j * j.saturating_sub(1) / 2) as i64;
        let term = &(&q.value().powi(tri)? * &gaussian_binomial(q, n, j)?) * &t_pow;
        series_side = &series_side + &term;
        t_pow = &t_pow * t;
    }
    let equal = product_side == series_side;
    Ok(EulerIdentityReport { n, product_side, series_side, equal })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::tolerance;

    fn q(n: i64, d: i64) -> QParam {
        QParam::new(Scalar::ratio(n, d)).unwrap()
    }

    #[test]
    fn pochhammer_small_values() {
        assert_eq!(q_pochhammer(&q(1, 2), 0), Scalar::one());
        assert_eq!(q_pochhammer(&q(2, 7), 0), Scalar::one());
        assert_eq!(q_pochhammer(&q(1, 2), 1), Scalar::ratio(1, 2));
        assert_eq!(q_pochhammer(&q(1, 2), 2), Scalar::ratio(3, 8));
    }

    #[test]
    fn pochhammer_recurrence() {
        let qq = q(3, 5);
        for j in 0..30 {
            let next = &q_pochhammer(&qq, j) * &(&Scalar::one() - &qq.value().powi(j as i64 + 1).unwrap());
            assert_eq!(q_pochhammer(&qq, j + 1), next);
        }
    }

    #[test]
    fn q_factorial_values() {
        assert_eq!(q_factorial(&q(1, 2), 0), Scalar::one());
        assert_eq!(q_factorial(&q(1, 2), 2), Scalar::ratio(3, 2));
        assert_eq!(q_factorial(&q(1, 2), 3), Scalar::ratio(21, 8));
        let qq = q(2, 9);
        for j in 0..12 {
            let direct = q_pochhammer(&qq, j)
                .checked_div(&(&Scalar::one() - qq.value()).powi(j as i64).unwrap())
                .unwrap();
            assert_eq!(q_factorial(&qq, j), direct);
        }
    }

    #[test]
    fn pochhammer_infinity_value() {
        let target = tolerance(1e-20).unwrap();
        let v = q_pochhammer_inf(&q(1, 2), &target).unwrap();
        // 200-bit reference
        assert!((v.to_f64() - 0.288_788_095_086_602_4).abs() < 1e-15);
        assert!(v.radius() <= target);
        assert!(v.certainly_lt(&q_pochhammer(&q(1, 2), 40)));
    }

    #[test]
    fn pochhammer_infinity_tiny_q() {
        let target = tolerance(1e-12).unwrap();
        let v = q_pochhammer_inf(&q(1, 1_000_000_000_000_000), &target).unwrap();
        assert!((v.to_f64() - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn sandwich_of_finite_and_infinite() {
        let qq = q(1, 3);
        let inf = q_pochhammer_inf(&qq, &tolerance(1e-30).unwrap()).unwrap();
        for j in 1..40 {
            let fin = q_pochhammer(&qq, j);
            assert!(inf.certainly_lt(&fin), "j = {j}");
            assert!(fin.certainly_lt(&Scalar::one()));
        }
    }

    #[test]
    fn q_exponential_values() {
        let target = tolerance(1e-25).unwrap();
        assert_eq!(q_exponential(&q(1, 2), &Scalar::zero(), &target).unwrap(), Scalar::one());
        // 1 / prod_{j>=0} (1 + 2^-(j+1)), 200-bit reference
        let v = q_exponential(&q(1, 2), &Scalar::from_int(-1), &target).unwrap();
        assert!((v.to_f64() - 0.419_422_441_795_107_6).abs() < 1e-15);
        assert!(v.radius() <= target);
        let v = q_exponential(&q(3, 10), &Scalar::from_int(-1), &target).unwrap();
        assert!((v.to_f64() - 0.445_236_480_111_645_3).abs() < 1e-15);
    }

    #[test]
    fn q_exponential_reciprocal_relation() {
        let qq = q(1, 3);
        let lam = Scalar::ratio(5, 2);
        let target = tolerance(1e-30).unwrap();
        let e = q_exponential(&qq, &-&lam, &target).unwrap();
        let x0 = &lam * &(&Scalar::one() - qq.value());
        let p = shifted_product(&qq, &x0, &target).unwrap();
        let one = (&e * &p).to_ball(128);
        assert!(one.contains(&Dyadic::one()));
        assert!(one.rad() < &Dyadic::pow2(-90));
    }

    #[test]
    fn q_exponential_domain() {
        let target = tolerance(1e-10).unwrap();
        // 1/(1-q) = 2
        assert!(matches!(q_exponential(&q(1, 2), &Scalar::from_int(2), &target), Err(Error::Domain(_))));
        let v = q_exponential(&q(1, 2), &Scalar::from_int(1), &target).unwrap();
        assert!(v.to_f64() > 1.0);
    }

    #[test]
    fn euler_product_values() {
        let a = BaseParam::new(Scalar::from_int(2)).unwrap();
        assert_eq!(euler_product(&a, &Scalar::from_int(3), 2).unwrap(), Scalar::one());
        assert_eq!(euler_product(&a, &Scalar::zero(), 7).unwrap(), Scalar::one());
        for k in 0..6 {
            let t = Scalar::from_int(2).powi(k).unwrap();
            assert_eq!(euler_product(&a, &t, k as usize + 1).unwrap(), Scalar::zero());
            assert_eq!(euler_product(&a, &t, k as usize + 9).unwrap(), Scalar::zero());
        }
        assert!(euler_product(&a, &Scalar::one(), 0).is_err());
    }

    #[test]
    fn gaussian_binomial_values() {
        let h = q(1, 2);
        assert_eq!(gaussian_binomial(&h, 5, 0).unwrap(), Scalar::one());
        assert_eq!(gaussian_binomial(&h, 2, 1).unwrap(), Scalar::ratio(3, 2));
        assert!(matches!(gaussian_binomial(&h, 2, 3), Err(Error::Index(_))));
        let g = q(2, 5);
        for n in 0..=20 {
            for j in 0..=n {
                assert_eq!(gaussian_binomial(&g, n, j).unwrap(), gaussian_binomial(&g, n, n - j).unwrap());
            }
        }
    }

    #[test]
    fn euler_identity_examples() {
        let r = verify_euler_identity(&q(1, 2), &Scalar::ratio(7, 3), 1).unwrap();
        assert_eq!(r.product_side, Scalar::ratio(10, 3));
        assert!(r.equal);
        assert!(verify_euler_identity(&q(1, 2), &Scalar::from_int(3), 4).unwrap().equal);
        assert!(verify_euler_identity(&q(1, 3), &Scalar::from_int(-2), 6).unwrap().equal);
        let approx_t = Scalar::ratio(1, 3).approximate(64);
        assert!(matches!(verify_euler_identity(&q(1, 2), &approx_t, 3), Err(Error::Mode(_))));
    }

    #[test]
    fn log_product_matches_product() {
        let qq = q(1, 2);
        let x0 = Scalar::from_int(2);
        let target = tolerance(1e-25).unwrap();
        let lp = ln_shifted_product(&qq, &x0, &target).unwrap();
        let p = shifted_product(&qq, &x0, &target).unwrap();
        // prod (1 + 2^(1-j)) = 3 * 2 * prod_{j>=2} ... ; compare through ln
        let lp2 = p.ln(128).unwrap();
        assert!((&lp - &lp2).abs_upper() <= lp.radius().add_up(&lp2.radius()).add_up(&Dyadic::pow2(-80)));
        assert!(lp.radius() <= target);
    }

    #[test]
    fn parameter_validation() {
        assert!(QParam::new(Scalar::zero()).is_err());
        assert!(QParam::new(Scalar::one()).is_err());
        assert!(BaseParam::new(Scalar::one()).is_err());
        assert!(BaseParam::new(Scalar::ratio(1, 2)).is_err());
        let near = QParam::new(Scalar::ratio(99_999, 100_000)).unwrap();
        assert!(near.is_ill_conditioned());
        assert!(!q(1, 2).is_ill_conditioned());
    }
}
