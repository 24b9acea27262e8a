use std::process::Command;

use serde_json::Value;
use stieltjes_cli::{run, EXIT_FAILED, EXIT_OK, EXIT_UNDECIDED, EXIT_USAGE};

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("stieltjes").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn json(args: &[&str]) -> (i32, Value) {
    let (code, out, err) = call(args);
    let v = serde_json::from_str(&out).unwrap_or_else(|e| panic!("{e}: {out} {err}"));
    (code, v)
}

const HEINE: [&str; 6] = ["--dist", "heine", "--q", "1/2", "--lambda", "2"];

fn with<'a>(head: &[&'a str], tail: &[&'a str]) -> Vec<&'a str> {
    head.iter().chain(tail).copied().collect()
}

#[test]
fn classify_boundary_heine_by_family_rule() {
    let (code, v) = json(&with(&["classify"], &with(&HEINE, &["--a", "2"])));
    assert_eq!(code, EXIT_OK);
    assert_eq!(v["verdict"], "Exists");
    assert_eq!(v["route"], "FamilyRule");
}

#[test]
fn classify_below_threshold_and_bounded_support() {
    let (_, v) = json(&["classify", "--dist", "heine", "--q", "1/2", "--lambda", "1", "--a", "2"]);
    assert_eq!(v["verdict"], "NotExists");
    let (_, v) = json(&with(&["classify"], &with(&HEINE, &["--a", "1/2"])));
    assert_eq!(v["route"], "BoundedSupport");
}

#[test]
fn verify_at_zero_epsilon_is_the_base_law() {
    let (code, v) = json(&with(&["verify"], &with(&HEINE, &["--a", "2", "--eps", "0", "--max-k", "3"])));
    assert_eq!(code, EXIT_OK);
    let member = &v["members"][0];
    assert_eq!(member["epsilon"], "0");
    assert_eq!(member["passed"], true);
    for m in member["moments"].as_array().unwrap() {
        assert_eq!(m["via_identity"], "0");
    }
}

#[test]
fn verify_issues_certificates_for_every_moment() {
    for dist in [&HEINE[..], &["--dist", "poisson", "--lambda", "3"][..]] {
        let (code, v) = json(&with(&["verify"], &with(dist, &["--a", "2", "--max-k", "10", "--target", "1e-20", "--eps", "1/2"])));
        assert_eq!(code, EXIT_OK, "{v}");
        let certs = v["certificates"].as_array().unwrap();
        assert_eq!(certs.len(), 11);
        for c in certs {
            assert_eq!(c["verdict"]["status"], "VanishesWithin");
        }
    }
}

#[test]
fn certificates_do_not_depend_on_the_distribution() {
    let args = ["--a", "5/2", "--max-k", "6", "--target", "1e-25"];
    let (_, a) = json(&with(&["verify"], &with(&HEINE, &args)));
    let (_, b) = json(&with(&["verify", "--dist", "poisson", "--lambda", "7"], &args));
    assert_eq!(a["certificates"], b["certificates"]);
}

#[test]
fn exit_codes() {
    assert_eq!(call(&["classify", "--dist", "heine", "--a", "2"]).0, EXIT_USAGE);
    assert_eq!(call(&["nonsense"]).0, EXIT_USAGE);
    assert_eq!(call(&with(&["verify"], &with(&HEINE, &["--a", "2", "--eps", "3/2"]))).0, EXIT_USAGE);
    assert_eq!(call(&with(&["verify"], &with(&HEINE, &["--a", "0"]))).0, EXIT_USAGE);
    assert_eq!(call(&["--help"]).0, EXIT_OK);
    // no decay certificate below the threshold
    let (code, out, _) = call(&["verify", "--dist", "heine", "--q", "1/2", "--lambda", "1", "--a", "2"]);
    assert_eq!(code, EXIT_FAILED);
    assert!(out.contains("NoDecayCertificate"));
    // finitely supported attachment gives a nonzero moment sum
    assert_eq!(call(&with(&["verify"], &with(&HEINE, &["--a", "2", "--truncate", "5", "--max-k", "1"]))).0, EXIT_FAILED);
    let beta = ["classify", "--dist", "poisson", "--lambda", "3", "--a", "2", "--route", "beta"];
    assert_eq!(call(&beta).0, EXIT_OK);
    assert_eq!(call(&with(&beta, &["--strict"])).0, EXIT_UNDECIDED);
}

#[test]
fn csv_output_has_a_header_and_one_row_per_index() {
    let (code, out, _) = call(&with(&["emit"], &with(&HEINE, &["--a", "2", "--horizon", "5", "--eps", "-1,1/2"])));
    assert_eq!(code, EXIT_OK);
    let mut reader = csv::Reader::from_reader(out.as_bytes());
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(header, ["j", "p_j", "h_j", "g_j(eps=-1)", "g_j(eps=1/2)", "bound"]);
    let rows: Vec<_> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 6);
    // eps = -1 removes every even index on the boundary
    for (j, row) in rows.iter().enumerate() {
        assert_eq!(row[0].parse::<usize>().unwrap(), j);
        assert_eq!(&row[3] == "0", j % 2 == 0);
    }
}

#[test]
fn decimal_output_round_trips_within_its_bound() {
    let (_, v) = json(&with(&["perturb"], &with(&HEINE, &["--a", "3", "--horizon", "6"])));
    for row in v["rows"].as_array().unwrap() {
        let p: f64 = row["p"].as_str().unwrap().parse().unwrap();
        let bound: f64 = row["bound"].as_str().unwrap().parse().unwrap();
        assert!(p > 0.0 && p < 1.0);
        assert!(bound < 1e-15 * p.max(1e-300) + 1e-18);
    }
    assert_eq!(v["rows"][0]["h"], "1");
}

#[test]
fn moments_of_poisson_match_closed_form() {
    let (_, v) = json(&["moments", "--dist", "poisson", "--lambda", "1/2", "--a", "2", "--max-k", "3"]);
    for row in v["rows"].as_array().unwrap() {
        let k = row["k"].as_u64().unwrap() as i32;
        let got: f64 = row["value"].as_str().unwrap().parse().unwrap();
        let want = (0.5 * (2f64.powi(k) - 1.0)).exp();
        assert!((got - want).abs() <= 1e-12 * want, "k = {k}");
    }
}

#[test]
fn inline_json_spec_and_output_file() {
    let dir = std::env::temp_dir().join(format!("stieltjes-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let spec = dir.join("dist.json");
    std::fs::write(&spec, r#"{"kind": "heine", "lambda": "2", "q": "1/2"}"#).unwrap();
    let target = dir.join("out.json");
    let args = ["classify", "--dist", spec.to_str().unwrap(), "--a", "3", "--output", target.to_str().unwrap()];
    let (code, out, _) = call(&args);
    assert_eq!(code, EXIT_OK);
    assert!(out.is_empty());
    let from_file: Value = serde_json::from_str(&std::fs::read_to_string(&target).unwrap()).unwrap();
    let (_, inline) = json(&["classify", "--dist", r#"{"kind":"heine","lambda":"2","q":"1/2"}"#, "--a", "3"]);
    assert_eq!(from_file, inline);
    assert_eq!(inline["verdict"], "Exists");
    std::fs::remove_dir_all(&dir).unwrap();
}

#[test]
fn selftest_passes() {
    let (code, v) = json(&["selftest"]);
    assert_eq!(code, EXIT_OK);
    assert_eq!(v["passed"], true);
    assert!(v["checks"].as_array().unwrap().len() >= 8);
}

#[test]
fn binary_output_is_deterministic() {
    let bin = env!("CARGO_BIN_EXE_stieltjes");
    let args = with(&["emit"], &with(&HEINE, &["--a", "5/2", "--horizon", "12", "--format", "json"]));
    let first = Command::new(bin).args(&args).output().unwrap();
    let second = Command::new(bin).args(&args).output().unwrap();
    assert_eq!(first.status.code(), Some(EXIT_OK));
    assert!(!first.stdout.is_empty());
    assert_eq!(first.stdout, second.stdout);
    let usage = Command::new(bin).args(["verify", "--dist", "heine"]).output().unwrap();
    assert_eq!(usage.status.code(), Some(EXIT_USAGE));
    assert!(!usage.stderr.is_empty());
}
