//! Fast invariant checks bundled with the binary.

use num_rational::BigRational;
use serde_json::{json, Value};
use stieltjes_core::classifier::{classify_family, Verdict};
use stieltjes_core::distributions::{DiscretePmf, Family, GeometricTail, LogTransformSpec};
use stieltjes_core::numeric::tolerance;
use stieltjes_core::qseries::{verify_euler_identity, QParam};
use stieltjes_core::stieltjes::{build_perturbation, moment_partial_sums, moment_sum, verify_member};
use stieltjes_core::{Error, Result, Scalar};

use crate::output::{Report, Status, Table};
use crate::{CliError, SelftestArgs};

type Check = fn() -> Result<bool>;

fn partial_sum_prefix() -> Result<bool> {
    let got = moment_partial_sums(&Scalar::from_int(2), 0, 4)?;
    let want = [Scalar::one(), Scalar::from_int(-1), Scalar::ratio(1, 3), Scalar::ratio(-1, 21), Scalar::ratio(1, 315)];
    Ok(got == want)
}

fn moment_sums_vanish() -> Result<bool> {
    let target = tolerance(1e-30)?;
    for a in [Scalar::from_int(2), Scalar::from_int(3), Scalar::ratio(5, 2)] {
        for k in 0..=10 {
            if !moment_sum(&a, k, &target, None)?.vanishes() {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn euler_identity() -> Result<bool> {
    for (qn, qd) in [(1, 2), (1, 3), (2, 5), (7, 9)] {
        let q = QParam::new(Scalar::ratio(qn, qd))?;
        for t in [Scalar::ratio(-3, 2), Scalar::ratio(1, 7), Scalar::from_int(4)] {
            for n in [1, 5, 17] {
                if !verify_euler_identity(&q, &t, n)?.equal {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

fn heine_regimes() -> Result<bool> {
    let cases = [(2, 3, 1, Verdict::Exists), (2, 2, 1, Verdict::Exists), (1, 2, 1, Verdict::NotExists), (2, 3, 2, Verdict::NotExists)];
    for (lambda, an, ad, want) in cases {
        let f = Family::heine(Scalar::from_int(lambda), Scalar::ratio(1, 2))?;
        if classify_family(&f, &Scalar::ratio(an, ad))?.verdict != want {
            return Ok(false);
        }
    }
    Ok(true)
}

fn plus_minus_average() -> Result<bool> {
    let r = |n: i64, d: i64| BigRational::new(n.into(), d.into());
    let tail = GeometricTail { ratio: r(1, 3), from: 0 };
    let d = DiscretePmf::new(Family::explicit(vec![r(9, 1), r(3, 1), r(1, 1)], Some(tail))?);
    let p = build_perturbation(&d, &LogTransformSpec::new(Scalar::ratio(5, 2))?, 200)?;
    let (plus, minus) = (p.member(Scalar::ratio(2, 3))?, p.member(Scalar::ratio(-2, 3))?);
    for j in 0..40 {
        let mean = &(&plus.mass(j)? + &minus.mass(j)?) * &Scalar::ratio(1, 2);
        if mean != d.mass(j)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn heine_member() -> Result<bool> {
    let d = DiscretePmf::new(Family::heine(Scalar::from_int(2), Scalar::ratio(1, 2))?);
    let p = build_perturbation(&d, &LogTransformSpec::new(Scalar::from_int(2))?, 200)?;
    let report = verify_member(&p.member(Scalar::ratio(1, 2))?, 5, &tolerance(1e-12)?, 100)?;
    Ok(report.passed())
}

fn base_independence() -> Result<bool> {
    let t = LogTransformSpec::new(Scalar::ratio(5, 2))?;
    let target = tolerance(1e-20)?;
    let a = build_perturbation(&DiscretePmf::new(Family::poisson(Scalar::from_int(3))?), &t, 200)?;
    let b = build_perturbation(&DiscretePmf::new(Family::heine(Scalar::from_int(2), Scalar::ratio(1, 2))?), &t, 200)?;
    for k in 0..=5 {
        if a.moment_sum(k, &target)? != b.moment_sum(k, &target)? {
            return Ok(false);
        }
    }
    Ok(true)
}

fn log_concavity() -> Result<bool> {
    let d = DiscretePmf::new(Family::poisson(Scalar::from_int(3))?);
    Ok(d.check_log_concavity(100)?.passed())
}

const CHECKS: [(&str, Check); 8] = [
    ("partial_sum_prefix", partial_sum_prefix),
    ("moment_sums_vanish", moment_sums_vanish),
    ("euler_identity", euler_identity),
    ("heine_regimes", heine_regimes),
    ("plus_minus_average", plus_minus_average),
    ("heine_member", heine_member),
    ("base_independence", base_independence),
    ("log_concavity", log_concavity),
];

pub(crate) fn run(_args: &SelftestArgs) -> std::result::Result<Report, CliError> {
    let mut table = Table::new(["check", "passed", "detail"]);
    let mut rows = Vec::new();
    let mut all = true;
    for (name, check) in CHECKS {
        let (passed, detail) = match check() {
            Ok(ok) => (ok, String::new()),
            Err(e) => (false, describe(&e)),
        };
        all &= passed;
        rows.push(json!({ "check": name, "passed": passed, "detail": detail }));
        table.push(vec![name.to_string(), passed.to_string(), detail]);
    }
    let json = json!({ "checks": Value::Array(rows), "passed": all });
    Ok(Report { json, table, status: if all { Status::Ok } else { Status::Failed } })
}

fn describe(e: &Error) -> String {
    format!("{}: {e}", e.code())
}
