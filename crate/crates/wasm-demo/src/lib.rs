//! Browser bindings. Every export takes strings and returns a JSON string;
//! failures come back as `{"error": {"code", "message"}}`.

use serde_json::{json, Value};
use stieltjes_core::classifier::{classify_family, test_condition_w, DEFAULT_HORIZON};
use stieltjes_core::distributions::{DiscretePmf, DistributionSpec, Family, LogTransformSpec};
use stieltjes_core::numeric::parse_rational;
use stieltjes_core::stieltjes::{build_perturbation, default_scan_horizon, moment_partial_sums};
use stieltjes_core::{Result, Scalar};
use wasm_bindgen::prelude::wasm_bindgen;

const PREC: u32 = 128;

fn respond(r: Result<Value>) -> String {
    let v = r.unwrap_or_else(|e| json!({ "error": { "code": e.code(), "message": e.to_string() } }));
    v.to_string()
}

fn scalar(text: &str) -> Result<Scalar> {
    parse_rational(text).map(Scalar::Exact)
}

fn dist(spec: &str) -> Result<DiscretePmf> {
    DiscretePmf::from_spec(&DistributionSpec::from_json(spec)?, PREC)
}

/// Verdict for `Y = a^X` by the family rule, falling back to the growth test.
#[wasm_bindgen]
pub fn classify(spec: &str, a: &str) -> String {
    respond((|| {
        let d = dist(spec)?;
        let a = scalar(a)?;
        let c = match d.family() {
            Family::Table(_) if !a.certainly_lt(&Scalar::one()) => {
                test_condition_w(&d, &LogTransformSpec::new(a)?, DEFAULT_HORIZON)?
            }
            f => classify_family(f, &a)?,
        };
        Ok(serde_json::to_value(&c).expect("classification serializes"))
    })())
}

/// `p_j`, `h_j` and `g_j = p_j (1 + eps h_j)` for `j <= horizon`, as floats
/// for plotting.
#[wasm_bindgen]
pub fn member_masses(spec: &str, a: &str, eps: &str, horizon: usize) -> String {
    respond((|| {
        let d = dist(spec)?;
        let t = LogTransformSpec::new(scalar(a)?)?;
        let p = build_perturbation(&d, &t, default_scan_horizon(10))?;
        let m = p.member(scalar(eps)?)?;
        let mut rows = (Vec::new(), Vec::new(), Vec::new());
        for j in 0..=horizon {
            rows.0.push(d.mass(j)?.to_f64());
            rows.1.push(p.normalized(j)?.to_f64());
            rows.2.push(m.mass(j)?.to_f64());
        }
        Ok(json!({ "p": rows.0, "h": rows.1, "g": rows.2, "argmax": p.argmax(), "decay_index": p.decay_index() }))
    })())
}

/// Exact partial sums of the cancelled moment series for `k`, through `last`.
#[wasm_bindgen]
pub fn partial_sums(a: &str, k: usize, last: usize) -> String {
    respond((|| {
        let sums = moment_partial_sums(&scalar(a)?, k, last)?;
        let exact: Vec<Value> = sums.iter().map(|s| serde_json::to_value(s).expect("scalar serializes")).collect();
        let approx: Vec<f64> = sums.iter().map(Scalar::to_f64).collect();
        Ok(json!({ "exact": exact, "approx": approx }))
    })())
}
