//! Browser bindings: enumerate a set, apply a schedule script to the
//! two-statement nest, and show the LSTM wavefront. Every export returns
//! a JSON string; the `*_json` functions hold the logic and run natively.

use polyloom::codegen::lower;
use polyloom::deps::{check_legality, check_parallel, compute_dependences, ParallelVerdict, Verdict};
use polyloom::rnn::{diagonals, lstm_dependence_model, WAVEFRONT_SCRIPT};
use polyloom::schedule::nest::{two_statement_nest, tagged_text};
use polyloom::schedule::Selection;
use polyloom::set::{BoundingBox, IntegerSet, Params};
use serde_json::json;
use wasm_bindgen::prelude::*;

/// Largest box side accepted from the page.
const MAX_SIDE: i64 = 64;

/// `N=4, M=3` into parameter values.
fn parse_params(text: &str) -> Result<Params, String> {
    let mut p = Params::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item.split_once('=').ok_or_else(|| format!("expected name=value, got {item:?}"))?;
        let v: i64 = v.trim().parse().map_err(|_| format!("bad value in {item:?}"))?;
        p.set(k.trim(), v);
    }
    Ok(p)
}

/// Members of `set` inside the box `[lo, hi]^d`.
pub fn enumerate_set_json(set: &str, params: &str, lo: i64, hi: i64) -> Result<String, String> {
    if hi < lo || hi - lo > MAX_SIDE {
        return Err(format!("box [{lo}, {hi}] must be non-empty and at most {MAX_SIDE} wide"));
    }
    let s = IntegerSet::parse(set).map_err(|e| e.to_string())?;
    let params = parse_params(params)?;
    let dim = s.dim();
    let points = s.enumerate(&params, &BoundingBox::cube(dim, lo, hi)).map_err(|e| e.to_string())?;
    Ok(json!({ "dim": dim, "canonical": s.to_string(), "points": points }).to_string())
}

/// Apply `script` to the sequential nest: schedules, legality and the
/// generated loop text.
pub fn schedule_json(script: &str) -> Result<String, String> {
    let base = two_statement_nest();
    let q = base.run_script(script).map_err(|e| e.to_string())?;
    let deps = compute_dependences(&base).map_err(|e| e.to_string())?;
    let (legal, witness) = match check_legality(&q, &deps).map_err(|e| e.to_string())? {
        Verdict::Legal => (true, None),
        Verdict::Illegal(e) => (false, Some(e.to_string())),
    };
    let ast = lower(&q).map_err(|e| e.to_string())?;
    Ok(json!({
        "schedules": tagged_text(&q),
        "legal": legal,
        "witness": witness,
        "source": ast.emit_source(&q),
        "warnings": ast.warnings,
    })
    .to_string())
}

/// Cells of each anti-diagonal of an `L x T` grid and whether the layer
/// loop is certified parallel after skewing.
pub fn wavefront_json(layers: usize, steps: usize) -> Result<String, String> {
    if layers == 0 || steps == 0 || layers > 16 || steps > 64 {
        return Err("need 1 <= L <= 16 and 1 <= T <= 64".into());
    }
    let p = lstm_dependence_model(layers, steps).map_err(|e| e.to_string())?;
    let deps = compute_dependences(&p).map_err(|e| e.to_string())?;
    let w = p.run_script(WAVEFRONT_SCRIPT).map_err(|e| e.to_string())?;
    let parallel = check_parallel(&w, &deps, &Selection::all(), "l").map_err(|e| e.to_string())?;
    let flat = p.run_script("parallelize t").map_err(|e| e.to_string())?;
    let carried = match check_parallel(&flat, &deps, &Selection::all(), "t").map_err(|e| e.to_string())? {
        ParallelVerdict::Carried(e) => Some(e.to_string()),
        ParallelVerdict::Parallel => None,
    };
    Ok(json!({
        "diagonals": diagonals(layers, steps),
        "schedule": w.dump_schedules().trim(),
        "layers_parallel": parallel == ParallelVerdict::Parallel,
        "time_carried_by": carried,
    })
    .to_string())
}

#[wasm_bindgen]
pub fn enumerate_set(set: &str, params: &str, lo: i32, hi: i32) -> Result<String, JsValue> {
    enumerate_set_json(set, params, lo as i64, hi as i64).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn apply_schedule(script: &str) -> Result<String, JsValue> {
    schedule_json(script).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn lstm_wavefront(layers: u32, steps: u32) -> Result<String, JsValue> {
    wavefront_json(layers as usize, steps as usize).map_err(|e| JsValue::from_str(&e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    #[test]
    fn six_point_set() {
        let v: Value = serde_json::from_str(&enumerate_set_json("{S(i,j): 1<=i<=3 and 1<=j<=2}", "", 0, 5).unwrap()).unwrap();
        assert_eq!(v["points"].as_array().unwrap().len(), 6);
        let v: Value = serde_json::from_str(&enumerate_set_json("[N] -> {S(i): 0<=i<N}", "N=3", 0, 9).unwrap()).unwrap();
        assert_eq!(v["points"], json!([[0], [1], [2]]));
        assert!(enumerate_set_json("{S(i): i >= 0}", "", 0, 1000).is_err());
        assert!(enumerate_set_json("{S(i) oops", "", 0, 3).is_err());
    }

    #[test]
    fn schedule_legality_and_source() {
        let v: Value = serde_json::from_str(&schedule_json("interchange i j").unwrap()).unwrap();
        assert_eq!(v["legal"], true);
        assert!(v["schedules"].as_str().unwrap().starts_with("S1: (j, i, 0)"));
        assert!(v["source"].as_str().unwrap().contains("for ("));
        let v: Value = serde_json::from_str(&schedule_json("fission 0 S2 | S1").unwrap()).unwrap();
        assert_eq!(v["legal"], false);
        assert!(v["witness"].as_str().unwrap().starts_with("flow S1"));
        assert!(schedule_json("twirl i").is_err());
    }

    #[test]
    fn wavefront_grid() {
        let v: Value = serde_json::from_str(&wavefront_json(2, 3).unwrap()).unwrap();
        assert_eq!(v["diagonals"].as_array().unwrap().len(), 4);
        assert_eq!(v["layers_parallel"], true);
        assert_eq!(v["time_carried_by"], "flow cell(0,0) -> cell(0,1) via h[1][1]");
        assert!(wavefront_json(0, 3).is_err());
    }
}
