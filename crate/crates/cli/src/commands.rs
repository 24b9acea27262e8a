use num_rational::BigRational;
use serde_json::{json, Value};
use stieltjes_core::classifier::{
    classify_by_beta, classify_family, default_grid, test_condition_w, Classification, Verdict,
};
use stieltjes_core::distributions::{DiscretePmf, DistributionSpec, Family, LogTransformSpec};
use stieltjes_core::numeric::{format_rational, parse_rational, Dyadic, Round};
use stieltjes_core::stieltjes::{attach_truncated, build_perturbation, default_scan_horizon, verify_member, Perturbation};
use stieltjes_core::{Error, Scalar};

use crate::output::{bound, decimal, Report, Status, Table};
use crate::{ClassifyArgs, CliError, DistArgs, EmitArgs, MomentsArgs, PerturbArgs, RouteArg, VerifyArgs};

type CmdResult = Result<Report, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn load_dist(args: &DistArgs) -> Result<DiscretePmf, CliError> {
    let need = |v: &Option<String>, name: &str| v.clone().ok_or_else(|| usage(format!("--dist {} needs --{name}", args.dist)));
    let spec = match args.dist.as_str() {
        "heine" => DistributionSpec::heine(&need(&args.lambda, "lambda")?, &need(&args.q, "q")?),
        "poisson" => DistributionSpec::poisson(&need(&args.lambda, "lambda")?),
        s if s.trim_start().starts_with('{') => DistributionSpec::from_json(s)?,
        path => {
            let text = std::fs::read_to_string(path).map_err(|e| usage(format!("cannot read {path}: {e}")))?;
            DistributionSpec::from_json(&text)?
        }
    };
    Ok(DiscretePmf::from_spec(&spec, args.prec)?)
}

fn exact(text: &str, name: &str) -> Result<Scalar, CliError> {
    parse_rational(text).map(Scalar::Exact).map_err(|e| usage(format!("--{name}: {e}")))
}

fn transform(a: &str) -> Result<LogTransformSpec, CliError> {
    Ok(LogTransformSpec::new(exact(a, "a")?)?)
}

/// Positive tolerance, rounded down to a dyadic so that meeting it implies
/// meeting the requested decimal value.
fn target(text: &str) -> Result<Dyadic, CliError> {
    let r: BigRational = parse_rational(text).map_err(|e| usage(format!("--target: {e}")))?;
    let (d, _) = Dyadic::from_rational(&r, 64, Round::Floor);
    if d.signum() <= 0 {
        return Err(usage("--target must be positive"));
    }
    Ok(d)
}

fn epsilons(list: &[String]) -> Result<Vec<Scalar>, CliError> {
    let eps = list.iter().map(|e| exact(e, "eps")).collect::<Result<Vec<_>, _>>()?;
    if let Some(bad) = eps.iter().find(|e| !e.abs().certainly_le(&Scalar::one())) {
        return Err(usage(format!("--eps {bad} lies outside [-1, 1]")));
    }
    Ok(eps)
}

fn perturbation(
    d: &DiscretePmf,
    t: &LogTransformSpec,
    truncate: Option<usize>,
    scan: Option<usize>,
    max_k: usize,
) -> Result<Perturbation, CliError> {
    Ok(match truncate {
        Some(n) => attach_truncated(d, t, n)?,
        None => build_perturbation(d, t, scan.unwrap_or_else(|| default_scan_horizon(max_k)))?,
    })
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("report types serialize")
}

fn scalar_cell(s: &Scalar) -> String {
    match s.as_rational() {
        Some(r) => format_rational(r),
        None => to_value(s)["approx"].as_str().unwrap_or_default().to_string(),
    }
}

fn route_error(route: &str, e: &Error) -> Value {
    json!({ "route": route, "error": { "code": e.code(), "message": e.to_string() } })
}

fn classification_rows(c: &Classification, table: &mut Table, label: &str) {
    table.push(vec![label.into(), "verdict".into(), format!("{:?}", c.verdict)]);
    table.push(vec![label.into(), "route".into(), format!("{:?}", c.route)]);
    for e in &c.evidence {
        table.push(vec![label.into(), e.name.clone(), scalar_cell(&e.value)]);
    }
}

pub(crate) fn classify(args: &ClassifyArgs) -> CmdResult {
    let d = load_dist(&args.dist)?;
    let a = exact(&args.a, "a")?;
    let has_rule = matches!(d.family(), Family::Poisson { .. } | Family::Heine { .. })
        || a.certainly_lt(&Scalar::one());
    let growth = |d: &DiscretePmf| -> Result<Classification, Error> {
        test_condition_w(d, &LogTransformSpec::new(a.clone())?, args.horizon)
    };
    let beta = |d: &DiscretePmf| -> Result<Classification, Error> {
        classify_by_beta(d, &LogTransformSpec::new(a.clone())?, args.horizon.min(200), &default_grid())
    };
    let primary = match args.route {
        RouteArg::Auto | RouteArg::All if has_rule => classify_family(d.family(), &a)?,
        RouteArg::Auto | RouteArg::All => growth(&d)?,
        RouteArg::Family => classify_family(d.family(), &a)?,
        RouteArg::Growth => growth(&d)?,
        RouteArg::Beta => beta(&d)?,
    };
    let mut table = Table::new(["route", "field", "value"]);
    classification_rows(&primary, &mut table, "primary");
    let mut json = to_value(&primary);
    if args.route == RouteArg::All && a.certainly_lt(&Scalar::one()) {
        json["checks"] = json!([]);
    } else if args.route == RouteArg::All {
        let mut others = Vec::new();
        if has_rule {
            others.push(("ConditionW", growth(&d)));
        }
        others.push(("BetaThreshold", beta(&d)));
        let mut checks = Vec::new();
        for (name, res) in others {
            match res {
                Ok(c) => {
                    classification_rows(&c, &mut table, name);
                    checks.push(to_value(&c));
                }
                Err(e) => checks.push(route_error(name, &e)),
            }
        }
        json["checks"] = Value::Array(checks);
    }
    let status = match primary.verdict {
        Verdict::Exists | Verdict::NotExists => Status::Ok,
        Verdict::Boundary | Verdict::Unknown => Status::Undecided,
    };
    Ok(Report { json, table, status })
}

fn perturbation_header(p: &Perturbation, digits: usize) -> Result<Value, Error> {
    let (m, m_bound) = decimal(&p.normalizer()?, digits);
    Ok(json!({
        "a": p.transform().a(),
        "support": p.support(),
        "normalizer": m,
        "normalizer_bound": bound(&m_bound),
        "argmax": p.argmax(),
        "decay_index": p.decay_index(),
    }))
}

pub(crate) fn perturb(args: &PerturbArgs) -> CmdResult {
    let d = load_dist(&args.dist)?;
    let t = transform(&args.a)?;
    let p = perturbation(&d, &t, None, args.scan_horizon, args.max_k)?;
    let digits = args.out.digits;
    let mut table = Table::new(["j", "p_j", "h_j", "bound"]);
    let mut rows = Vec::new();
    for j in 0..=args.horizon {
        let (pj, pb) = decimal(&d.mass(j)?, digits);
        let (hj, hb) = decimal(&p.normalized(j)?, digits);
        let b = bound(&pb.max(hb));
        rows.push(json!({ "j": j, "p": pj, "h": hj, "bound": b }));
        table.push(vec![j.to_string(), pj, hj, b]);
    }
    let mut json = perturbation_header(&p, digits)?;
    json["rows"] = Value::Array(rows);
    Ok(Report { json, table, status: Status::Ok })
}

pub(crate) fn verify(args: &VerifyArgs) -> CmdResult {
    let d = load_dist(&args.dist)?;
    let t = transform(&args.a)?;
    let eps = epsilons(&args.eps)?;
    let tol = target(&args.target)?;
    let p = perturbation(&d, &t, args.truncate, args.scan_horizon, args.max_k)?;
    let digits = args.out.digits;

    let mut certificates = Vec::new();
    for k in 0..=args.max_k {
        certificates.push(p.moment_sum(k, &tol)?);
    }
    let mut passed = certificates.iter().all(|c| c.vanishes());
    let mut table = Table::new([
        "epsilon", "k", "certificate", "truncation_index", "tail_bound", "identity_difference", "direct_difference",
        "bound", "nonnegative", "total_mass_ok", "passed",
    ]);
    let mut members = Vec::new();
    for e in eps {
        let m = p.member(e.clone())?;
        let r = verify_member(&m, args.max_k, &tol, args.horizon)?;
        passed &= r.passed();
        for (mc, cert) in r.moments.iter().zip(&certificates) {
            let status = to_value(&cert.verdict)["status"].as_str().unwrap_or_default().to_string();
            table.push(vec![
                scalar_cell(&e),
                mc.k.to_string(),
                status,
                cert.truncation_index.to_string(),
                bound(&cert.tail_bound),
                decimal(&mc.via_identity, digits).0,
                decimal(&mc.direct, digits).0,
                bound(&mc.bound),
                r.nonnegativity.passed().to_string(),
                r.total_mass.passed.to_string(),
                (mc.passed && cert.vanishes() && r.nonnegativity.passed() && r.total_mass.passed).to_string(),
            ]);
        }
        let mut v = to_value(&r);
        if let Some(obj) = v.as_object_mut() {
            obj.remove("certificates");
            obj.insert("passed".into(), Value::Bool(r.passed()));
        }
        members.push(v);
    }
    let mut json = perturbation_header(&p, digits)?;
    json["target"] = to_value(&tol);
    json["certificates"] = to_value(&certificates);
    json["members"] = Value::Array(members);
    json["passed"] = Value::Bool(passed);
    Ok(Report { json, table, status: if passed { Status::Ok } else { Status::Failed } })
}

pub(crate) fn moments(args: &MomentsArgs) -> CmdResult {
    let d = load_dist(&args.dist)?;
    let t = transform(&args.a)?;
    let tol = target(&args.target)?;
    let digits = args.out.digits;
    let mut table = Table::new(["k", "value", "bound"]);
    let mut rows = Vec::new();
    for k in 0..=args.max_k {
        let m = d.moment_of_y(&t.base, k, &tol)?;
        let (v, b) = decimal(&m, digits);
        let b = bound(&b);
        let mut row = json!({ "k": k, "value": v, "bound": b });
        if let Some(r) = m.as_rational() {
            row["exact"] = Value::String(format_rational(r));
        }
        rows.push(row);
        table.push(vec![k.to_string(), v, b]);
    }
    let json = json!({ "a": t.a(), "target": tol, "rows": rows });
    Ok(Report { json, table, status: Status::Ok })
}

pub(crate) fn emit(args: &EmitArgs) -> CmdResult {
    let d = load_dist(&args.dist)?;
    let t = transform(&args.a)?;
    let eps = epsilons(&args.eps)?;
    let p = perturbation(&d, &t, args.truncate, args.scan_horizon, 10)?;
    let members = eps.iter().map(|e| p.member(e.clone())).collect::<Result<Vec<_>, _>>()?;
    let digits = args.out.digits;
    let mut header = vec!["j".to_string(), "p_j".into(), "h_j".into()];
    header.extend(eps.iter().map(|e| format!("g_j(eps={})", scalar_cell(e))));
    header.push("bound".into());
    let mut table = Table::new(header);
    let mut rows = Vec::new();
    for j in 0..=args.horizon {
        let (pj, mut worst) = decimal(&d.mass(j)?, digits);
        let (hj, hb) = decimal(&p.normalized(j)?, digits);
        worst = worst.max(hb);
        let mut gs = Vec::with_capacity(members.len());
        for m in &members {
            let (g, gb) = decimal(&m.mass(j)?, digits);
            worst = worst.max(gb);
            gs.push(g);
        }
        let b = bound(&worst);
        rows.push(json!({ "j": j, "p": pj, "h": hj, "g": gs, "bound": b }));
        let mut cells = vec![j.to_string(), pj, hj];
        cells.extend(gs);
        cells.push(b);
        table.push(cells);
    }
    let mut json = perturbation_header(&p, digits)?;
    json["epsilons"] = to_value(&eps);
    json["rows"] = Value::Array(rows);
    Ok(Report { json, table, status: Status::Ok })
}
