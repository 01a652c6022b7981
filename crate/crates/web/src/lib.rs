//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export returns a JSON string; the plain functions in [`demo`] do the
//! work and are what the native tests exercise.

use wasm_bindgen::prelude::*;

pub mod demo;

fn to_js<T: serde::Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    match r {
        Ok(v) => Ok(serde_json::to_string(&v).expect("demo output serializes")),
        Err(e) => Err(JsError::new(&e)),
    }
}

/// Deferral curves of the two-cluster instance under k-NN and oracle routing.
#[wasm_bindgen]
pub fn sweep_two_cluster(jitter: f64, sigma_q: f64, k: usize, seed: u64) -> Result<String, JsError> {
    to_js(demo::sweep_two_cluster(jitter, sigma_q, k, seed))
}

/// Renders a test pattern, blurs it `passes` times and reports its sharpness.
#[wasm_bindgen]
pub fn sharpness_pattern(kind: &str, size: usize, passes: usize) -> Result<String, JsError> {
    to_js(demo::sharpness_pattern(kind, size, passes))
}

/// Routes one prompt given per-model estimates and costs.
#[wasm_bindgen]
pub fn route_one(estimates: Vec<f64>, costs: Vec<f64>, lambda: f64) -> Result<String, JsError> {
    to_js(demo::route_one(&estimates, &costs, lambda))
}
