//! Realized quality and cost of a router, deferral curves, selection rates,
//! quality-neutral cost and the Welch test used to compare operating points.

mod stats;

pub use stats::{ln_gamma, reg_inc_beta, welch_ttest, TTestResult};

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::estimator::{predict_split, QualityEstimate, QualityEstimator};
use crate::pool::{Dataset, RoutingPool};
use crate::router::{route_estimates, RouteDecision, RouterConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct DeferralPoint {
    pub lambda: f64,
    pub avg_cost: f64,
    /// In raw metric units.
    pub avg_quality: f64,
    /// Selection fraction per model, in pool order.
    pub rates: Vec<(String, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeferralCurve {
    pub points: Vec<DeferralPoint>,
}

/// Mean raw label and mean cost of the chosen models, summed in record order.
pub fn avg_quality_cost(decisions: &[RouteDecision], split: &Dataset) -> Result<(f64, f64)> {
    if split.is_empty() {
        return Err(Error::invalid("split", "no records to evaluate"));
    }
    let by_id: HashMap<&str, &RouteDecision> = decisions.iter().map(|d| (d.prompt_id.as_str(), d)).collect();
    if by_id.len() != decisions.len() {
        return Err(Error::invalid("decisions", "duplicate prompt_id"));
    }
    let costs = split.pool.costs();
    let (mut q, mut c) = (0.0, 0.0);
    for r in &split.records {
        let d = by_id
            .get(r.prompt_id.as_str())
            .ok_or_else(|| Error::invalid("decisions", format!("no decision for prompt \"{}\"", r.prompt_id)))?;
        if d.chosen >= costs.len() {
            return Err(Error::invalid("decisions", format!("model index {} out of range", d.chosen)));
        }
        q += r.labels[d.chosen];
        c += costs[d.chosen];
    }
    if decisions.len() != split.len() {
        return Err(Error::invalid("decisions", "decision for a prompt outside the split"));
    }
    let n = split.len() as f64;
    Ok((q / n, c / n))
}

/// Fraction of decisions sent to each pool model; unselected models get 0.
pub fn selection_rates(decisions: &[RouteDecision], pool: &RoutingPool) -> Result<Vec<(String, f64)>> {
    if decisions.is_empty() {
        return Err(Error::invalid("decisions", "empty decision list"));
    }
    let mut counts = vec![0usize; pool.len()];
    for d in decisions {
        let i = pool
            .index_of(&d.chosen_id)
            .ok_or_else(|| Error::invalid("decisions", format!("unknown model \"{}\"", d.chosen_id)))?;
        counts[i] += 1;
    }
    let n = decisions.len() as f64;
    Ok(pool.models().iter().zip(counts).map(|(m, k)| (m.id.clone(), k as f64 / n)).collect())
}

/// Sweeps precomputed estimates over `lambdas` (strictly increasing, >= 0).
pub fn curve_from_estimates(estimates: &[QualityEstimate], split: &Dataset, lambdas: &[f64]) -> Result<DeferralCurve> {
    if lambdas.is_empty() {
        return Err(Error::invalid("lambdas", "empty grid"));
    }
    if lambdas.iter().any(|l| !(l.is_finite() && *l >= 0.0)) || lambdas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("lambdas", "grid must be finite, nonnegative and strictly increasing"));
    }
    let points = lambdas
        .iter()
        .map(|&lambda| {
            let decisions = route_estimates(estimates, split, &RouterConfig::new(lambda)?)?;
            let (avg_quality, avg_cost) = avg_quality_cost(&decisions, split)?;
            let rates = selection_rates(&decisions, &split.pool)?;
            Ok(DeferralPoint { lambda, avg_cost, avg_quality, rates })
        })
        .collect::<Result<_>>()?;
    Ok(DeferralCurve { points })
}

pub fn deferral_curve(est: &dyn QualityEstimator, split: &Dataset, lambdas: &[f64]) -> Result<DeferralCurve> {
    curve_from_estimates(&predict_split(est, split)?, split, lambdas)
}

/// `{0}` followed by `n` log-spaced values from `lo` to `hi` inclusive.
pub fn default_lambda_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut g = vec![0.0];
    g.extend(log_grid(lo, hi, n));
    g
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.log10(), hi.log10());
            (0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
        }
    }
}

impl DeferralCurve {
    /// CSV with header `lambda,avg_cost,avg_quality,rate_<id>...`.
    pub fn to_csv(&self, pool: &RoutingPool) -> String {
        let mut out = String::from("lambda,avg_cost,avg_quality");
        for m in pool.models() {
            out.push_str(",rate_");
            out.push_str(&m.id);
        }
        out.push('\n');
        for p in &self.points {
            let mut row = vec![crate::fmt_real(p.lambda), crate::fmt_real(p.avg_cost), crate::fmt_real(p.avg_quality)];
            row.extend(p.rates.iter().map(|(_, r)| crate::fmt_real(*r)));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    /// Reads the `lambda,avg_cost,avg_quality[,rate_*]` CSV back.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| Error::Parse { line: Some(1), msg: "empty curve file".into() })?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        if cols.len() < 3 || cols[..3] != ["lambda", "avg_cost", "avg_quality"] {
            return Err(Error::Parse { line: Some(1), msg: "expected header lambda,avg_cost,avg_quality,...".into() });
        }
        let ids: Vec<String> = cols[3..]
            .iter()
            .map(|c| c.strip_prefix("rate_").map(str::to_owned))
            .collect::<Option<_>>()
            .ok_or_else(|| Error::Parse { line: Some(1), msg: "rate columns must start with rate_".into() })?;
        let mut points = Vec::new();
        for (i, line) in lines {
            let vals: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| Error::Parse { line: Some(i + 1), msg: e.to_string() })?;
            if vals.len() != cols.len() {
                return Err(Error::Parse { line: Some(i + 1), msg: format!("expected {} fields", cols.len()) });
            }
            points.push(DeferralPoint {
                lambda: vals[0],
                avg_cost: vals[1],
                avg_quality: vals[2],
                rates: ids.iter().cloned().zip(vals[3..].iter().copied()).collect(),
            });
        }
        Ok(DeferralCurve { points })
    }
}

/// Quality-neutral cost of a curve against a reference operating point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Qnc {
    /// `100 * c* / ref_cost`, where `c*` is the least cost at which the curve
    /// reaches the reference quality.
    Percent(f64),
    Unreachable,
}

/// Interpolates the curve's monotone upper envelope in (cost, quality) and
/// finds where it first reaches `ref_quality`.
pub fn qnc(curve: &DeferralCurve, ref_cost: f64, ref_quality: f64) -> Result<Qnc> {
    if !(ref_cost > 0.0 && ref_cost.is_finite()) {
        return Err(Error::invalid("ref_cost", "must be positive"));
    }
    if curve.points.is_empty() {
        return Err(Error::invalid("curve", "no points"));
    }
    let mut pts: Vec<(f64, f64)> = curve.points.iter().map(|p| (p.avg_cost, p.avg_quality)).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    let mut best = f64::NEG_INFINITY;
    for p in &mut pts {
        best = best.max(p.1);
        p.1 = best;
    }
    let Some(i) = pts.iter().position(|p| p.1 >= ref_quality) else {
        return Ok(Qnc::Unreachable);
    };
    let c_star = if i == 0 || pts[i].1 == ref_quality {
        pts[i].0
    } else {
        let ((c0, q0), (c1, q1)) = (pts[i - 1], pts[i]);
        c0 + (c1 - c0) * (ref_quality - q0) / (q1 - q0)
    };
    Ok(Qnc::Percent(100.0 * c_star / ref_cost))
}
