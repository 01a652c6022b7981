//! Cost-aware routing of prompts across a pool of generators.
//!
//! Each prompt is sent to the pool member maximizing
//! `estimated_quality - lambda * cost`. The crate covers the whole loop
//! around that rule: labeled datasets and their ingestion, quality
//! estimators (exact k-NN and a small multi-head MLP), routing and budget
//! calibration, deferral curves with the usual summary statistics, the
//! Gaussian-blur sharpness metric, and a synthetic generator with a
//! brute-force frontier for small instances.

pub mod error;
pub mod estimator;
pub mod eval;
pub mod imgmetrics;
pub mod pool;
pub mod rng;
pub mod router;
pub mod synth;

pub use error::{Error, Result};
pub use estimator::{KnnIndex, MlpModel, QualityEstimate, QualityEstimator, SavedEstimator};
pub use eval::{DeferralCurve, DeferralPoint, Qnc, TTestResult};
pub use pool::{Dataset, LabelScaler, ModelCandidate, PromptRecord, RoutingPool, Split};
pub use router::{RouteDecision, RouterConfig};

/// Formats a real with 17 significant digits in scientific notation.
///
/// The output parses back to the identical `f64` and is valid both as a JSON
/// number and as a CSV field.
pub fn fmt_real(v: f64) -> String {
    if v == 0.0 {
        // avoid "-0e0" surprises in diffs
        return if v.is_sign_negative() { "-0.0000000000000000e0".into() } else { "0.0000000000000000e0".into() };
    }
    format!("{:.16e}", v)
}
