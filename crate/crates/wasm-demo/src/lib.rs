//! Browser demo: three JSON-in, JSON-out operations over the core pipeline.
//!
//! The exported functions take and return JSON strings so the page needs no
//! generated TypeScript types. The logic lives in [`ops`] and runs natively in tests.

use wasm_bindgen::prelude::*;

pub mod ops;

fn to_js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

/// Generate a synthetic field, train a linear model on two sibling fields and
/// clear the field with the random, sequential and linear deminers.
#[wasm_bindgen]
pub fn simulate_field(request: &str) -> Result<String, JsValue> {
    to_js(ops::simulate_field(request))
}

/// Cluster clicked points and fit both pattern kinds to every cluster.
#[wasm_bindgen]
pub fn explore_patterns(request: &str) -> Result<String, JsValue> {
    to_js(ops::explore_patterns(request))
}

/// Priors derived from expert estimates and the risk curves at their means.
#[wasm_bindgen]
pub fn prior_curves(request: &str) -> Result<String, JsValue> {
    to_js(ops::prior_curves(request))
}
