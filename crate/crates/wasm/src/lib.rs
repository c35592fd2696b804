//! Browser bindings for the `www/` demo page.
//!
//! Every export takes plain numbers or strings and returns a number or a
//! JSON string, so the page needs no generated type glue beyond the loader.

use locc_core::asymptotics::{build_series, compare_cm_bound, Scheme};
use locc_core::estimator::evaluate_tree;
use locc_core::montecarlo::{simulate_fidelity, McConfig, Strategy};
use locc_core::optimizer::{greedy_pilot, n4_ansatz_tree};
use locc_core::strategy::make_two_stage;
use locc_core::{Geometry, GuessRule};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

/// Exact fidelity of the four-copy ansatz tree at the given angles.
#[wasm_bindgen]
pub fn ansatz_fidelity(alpha: f64, beta: f64, gamma: f64) -> Result<f64, JsError> {
    let tree = n4_ansatz_tree(alpha, beta, gamma).map_err(js_err)?;
    Ok(evaluate_tree(&tree, &GuessRule::OptimalGuess)
        .map_err(js_err)?
        .fidelity)
}

/// Series `N(1 − F)` for a fixed-axis scheme (`2d-cl`, `2d-og`, `3d-cl`,
/// `3d-og`) on a comma-separated grid, plus the extrapolated coefficient.
#[wasm_bindgen]
pub fn coefficient_series(scheme: &str, grid: &str) -> Result<String, JsError> {
    let scheme: Scheme = scheme.parse().map_err(js_err)?;
    let grid = grid
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| JsError::new(&format!("bad grid: {e}")))?;
    let series = build_series(scheme, &grid).map_err(js_err)?;
    let summary = compare_cm_bound(&series).ok();
    Ok(json!({ "series": series.entries, "summary": summary }).to_string())
}

/// Monte Carlo fidelity of the two-stage scheme with a greedy pilot.
#[wasm_bindgen]
pub fn two_stage_fidelity(
    copies: usize,
    pilot: usize,
    lambda: f64,
    samples: usize,
    seed: u64,
) -> Result<String, JsError> {
    let pilot = greedy_pilot(Geometry::Full, pilot).map_err(js_err)?;
    let strategy = make_two_stage(Geometry::Full, copies, lambda, pilot).map_err(js_err)?;
    let cfg = McConfig {
        samples,
        seed,
        ..McConfig::default()
    };
    let r = simulate_fidelity(
        &Strategy::TwoStage(strategy),
        &GuessRule::OptimalGuess,
        &cfg,
    )
    .map_err(js_err)?;
    Ok(json!({
        "mean": r.mean,
        "stderr": r.stderr,
        "coefficient": copies as f64 * (1.0 - r.mean),
        "coefficient_stderr": copies as f64 * r.stderr,
    })
    .to_string())
}
