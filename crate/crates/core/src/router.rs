//! The plug-in routing rule: send each prompt to
//! `argmax_m estimate[m] - lambda * cost[m]`.
//!
//! Ties in the adjusted score go to the cheaper model, then to the lower pool
//! index. With that policy the chosen cost can only go down as `lambda` grows.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::{oracle_estimates, predict_split, QualityEstimate, QualityEstimator};
use crate::pool::{Dataset, LabelScaler, RoutingPool};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RouterConfig {
    lambda: f64,
}

impl RouterConfig {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::invalid("lambda", format!("must be finite and >= 0, got {lambda}")));
        }
        Ok(RouterConfig { lambda })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RouteDecision {
    pub prompt_id: String,
    /// 0-based pool index.
    pub chosen: usize,
    pub chosen_id: String,
    pub estimates: QualityEstimate,
    /// `estimate[m] - lambda * cost[m]`
    pub adjusted: Vec<f64>,
}

impl RouteDecision {
    /// One line of the decisions JSONL format.
    pub fn to_json_line(&self, lambda: f64) -> String {
        let adjusted: Vec<String> = self.adjusted.iter().map(|&v| crate::fmt_real(v)).collect();
        format!(
            "{{\"prompt_id\":{},\"chosen\":{},\"lambda\":{},\"adjusted\":[{}]}}",
            serde_json::to_string(&self.prompt_id).expect("string serializes"),
            serde_json::to_string(&self.chosen_id).expect("string serializes"),
            crate::fmt_real(lambda),
            adjusted.join(",")
        )
    }
}

/// Index chosen by the rule, without building a full decision.
pub fn choose(estimate: &[f64], costs: &[f64], lambda: f64) -> usize {
    let mut best = 0;
    let mut best_score = estimate[0] - lambda * costs[0];
    for m in 1..estimate.len() {
        let s = estimate[m] - lambda * costs[m];
        if s > best_score || (s == best_score && costs[m] < costs[best]) {
            best = m;
            best_score = s;
        }
    }
    best
}

/// Applies the rule to a single estimate. `prompt_id` is left empty.
pub fn route(estimate: &QualityEstimate, pool: &RoutingPool, cfg: &RouterConfig) -> Result<RouteDecision> {
    if estimate.len() != pool.len() {
        return Err(Error::DimensionMismatch { expected: pool.len(), found: estimate.len(), line: None });
    }
    if let Some(bad) = estimate.values().iter().find(|v| !v.is_finite()) {
        return Err(Error::invalid("estimate", format!("non-finite value {bad}")));
    }
    let costs = pool.costs();
    let chosen = choose(estimate.values(), &costs, cfg.lambda);
    let adjusted = estimate.values().iter().zip(&costs).map(|(g, c)| g - cfg.lambda * c).collect();
    Ok(RouteDecision {
        prompt_id: String::new(),
        chosen,
        chosen_id: pool.models()[chosen].id.clone(),
        estimates: estimate.clone(),
        adjusted,
    })
}

/// Routes precomputed per-record estimates, preserving record order.
pub fn route_estimates(
    estimates: &[QualityEstimate],
    split: &Dataset,
    cfg: &RouterConfig,
) -> Result<Vec<RouteDecision>> {
    if estimates.len() != split.len() {
        return Err(Error::invalid("estimates", "one estimate per record required"));
    }
    estimates
        .iter()
        .zip(&split.records)
        .map(|(e, r)| {
            let mut d = route(e, &split.pool, cfg)?;
            d.prompt_id = r.prompt_id.clone();
            Ok(d)
        })
        .collect()
}

pub fn route_batch(est: &dyn QualityEstimator, split: &Dataset, cfg: &RouterConfig) -> Result<Vec<RouteDecision>> {
    let estimates = predict_split(est, split)?;
    route_estimates(&estimates, split, cfg)
}

/// Routes on the scaled true labels instead of predictions.
pub fn oracle_route(split: &Dataset, scaler: &LabelScaler, cfg: &RouterConfig) -> Result<Vec<RouteDecision>> {
    route_estimates(&oracle_estimates(split, scaler), split, cfg)
}

/// Average cost of routing `estimates` at `lambda`, summed in record order.
pub fn average_cost(estimates: &[QualityEstimate], costs: &[f64], lambda: f64) -> f64 {
    let total: f64 = estimates.iter().map(|e| costs[choose(e.values(), costs, lambda)]).sum();
    total / estimates.len() as f64
}

/// Bisection search for the smallest `lambda` whose average routed cost
/// stays within `budget`.
///
/// Returns 0 when the unconstrained router already fits. Otherwise the
/// search keeps an infeasible lower end and a feasible upper end and returns
/// the upper end once the bracket is narrower than `tol`, so the result is
/// always feasible.
pub fn calibrate_lambda(estimates: &[QualityEstimate], pool: &RoutingPool, budget: f64, tol: f64) -> Result<f64> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::invalid("tol", "must be positive"));
    }
    if budget.is_nan() || budget < pool.min_cost() {
        return Err(Error::Infeasible(format!("budget {budget} is below the cheapest model cost {}", pool.min_cost())));
    }
    if estimates.is_empty() {
        return Ok(0.0);
    }
    if let Some(e) = estimates.iter().find(|e| e.len() != pool.len()) {
        return Err(Error::DimensionMismatch { expected: pool.len(), found: e.len(), line: None });
    }
    let costs = pool.costs();
    if average_cost(estimates, &costs, 0.0) <= budget {
        return Ok(0.0);
    }

    // Past range / gap every prompt is sent to a cheapest model.
    let range = estimates
        .iter()
        .map(|e| {
            let v = e.values();
            v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v.iter().copied().fold(f64::INFINITY, f64::min)
        })
        .fold(0.0, f64::max);
    let mut sorted = costs.clone();
    sorted.sort_by(f64::total_cmp);
    let gap = sorted.windows(2).map(|w| w[1] - w[0]).filter(|g| *g > 0.0).fold(f64::INFINITY, f64::min);
    let mut hi = if gap.is_finite() { range.max(f64::MIN_POSITIVE) / gap } else { 1.0 };
    while average_cost(estimates, &costs, hi) > budget {
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Infeasible("no finite lambda meets the budget".into()));
        }
    }
    let mut lo = 0.0;
    while hi - lo > tol {
        let mid = lo + 0.5 * (hi - lo);
        if mid <= lo || mid >= hi {
            break;
        }
        if average_cost(estimates, &costs, mid) <= budget {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}
