//! Synthetic routing instances with known per-cluster expected quality, and
//! an exhaustive frontier over every deterministic prompt-to-model assignment.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pool::{Dataset, ModelCandidate, PromptRecord, RoutingPool, Split};
use crate::rng::Stream;

fn default_jitter() -> f64 {
    0.1
}

fn default_train_fraction() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub models: Vec<ModelCandidate>,
    /// One feature-space center per cluster.
    pub centers: Vec<Vec<f64>>,
    /// `mu[cluster][model]`: expected quality.
    pub mu: Vec<Vec<f64>>,
    pub sigma_q: f64,
    /// Standard deviation of the Gaussian feature jitter around each center.
    #[serde(default = "default_jitter")]
    pub jitter: f64,
    pub n: usize,
    pub s: usize,
    pub seed: u64,
    /// Leading share of prompts assigned to `train`.
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Share assigned to `val` after the training block; the rest is `test`.
    #[serde(default)]
    pub val_fraction: f64,
}

/// Exact expected-quality table emitted next to a generated dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub model_order: Vec<String>,
    pub mu: Vec<Vec<f64>>,
    /// Cluster of every generated prompt, in dataset order.
    pub record_cluster: Vec<usize>,
}

impl SynthSpec {
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let spec: SynthSpec =
            serde_json::from_slice(bytes).map_err(|e| Error::Parse { line: None, msg: e.to_string() })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        RoutingPool::new(self.models.clone())?;
        let m = self.models.len();
        if self.centers.is_empty() {
            return Err(Error::invalid("centers", "need at least one cluster"));
        }
        let d = self.centers[0].len();
        if self.centers.iter().any(|c| c.len() != d || c.iter().any(|v| !v.is_finite())) {
            return Err(Error::invalid("centers", "centers must be finite and share one dimension"));
        }
        if self.mu.len() != self.centers.len() || self.mu.iter().any(|r| r.len() != m) {
            return Err(Error::invalid("mu", "expected one row per cluster and one column per model"));
        }
        if self.mu.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("mu", "values must be finite"));
        }
        if !(self.sigma_q >= 0.0 && self.sigma_q.is_finite()) {
            return Err(Error::invalid("sigma_q", "must be finite and >= 0"));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::invalid("jitter", "must be finite and >= 0"));
        }
        if self.n == 0 || self.s == 0 {
            return Err(Error::invalid("n/s", "prompt and sample counts must be positive"));
        }
        let fr = |v: f64| (0.0..=1.0).contains(&v);
        if !fr(self.train_fraction) || !fr(self.val_fraction) || self.train_fraction + self.val_fraction > 1.0 {
            return Err(Error::invalid("train_fraction/val_fraction", "fractions must lie in [0, 1] and sum to <= 1"));
        }
        Ok(())
    }
}

/// Builds a dataset from `spec`, using `spec.seed`.
///
/// Prompt `i` belongs to cluster `i % clusters`. For each prompt the stream
/// yields the feature jitter (one normal per dimension), then for each model
/// its `s` quality noises. Samples are clipped to [0, 1].
pub fn generate(spec: &SynthSpec) -> Result<(Dataset, Truth)> {
    spec.validate()?;
    let pool = RoutingPool::new(spec.models.clone())?;
    let mut rng = Stream::new(spec.seed);
    let n_train = (spec.n as f64 * spec.train_fraction).round() as usize;
    let n_val = (spec.n as f64 * spec.val_fraction).round() as usize;
    let width = (spec.n.max(2) - 1).to_string().len();
    let mut records = Vec::with_capacity(spec.n);
    let mut record_cluster = Vec::with_capacity(spec.n);
    for i in 0..spec.n {
        let c = i % spec.centers.len();
        let features = spec.centers[c].iter().map(|v| v + spec.jitter * rng.normal()).collect();
        let quality_samples = spec.mu[c]
            .iter()
            .map(|&mu| (0..spec.s).map(|_| (mu + spec.sigma_q * rng.normal()).clamp(0.0, 1.0)).collect())
            .collect();
        let split = if i < n_train {
            Split::Train
        } else if i < n_train + n_val {
            Split::Val
        } else {
            Split::Test
        };
        records.push(PromptRecord {
            prompt_id: format!("synth-{i:0width$}"),
            text: None,
            features,
            quality_samples,
            labels: Vec::new(),
            split,
        });
        record_cluster.push(c);
    }
    let truth = Truth { model_order: pool.ids(), mu: spec.mu.clone(), record_cluster };
    Ok((Dataset::new(pool, records)?, truth))
}

/// The two-cluster instance used by the acceptance suite and the demo.
pub fn two_cluster_spec() -> SynthSpec {
    SynthSpec::from_json(include_bytes!("../fixtures/two_cluster.json")).expect("bundled spec is valid")
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct FrontierPoint {
    pub cost: f64,
    pub quality: f64,
}

pub const MAX_ASSIGNMENTS: u64 = 10_000_000;

/// Average (cost, raw quality) of one assignment, summed in record order.
pub fn assignment_point(split: &Dataset, assignment: &[usize]) -> FrontierPoint {
    let costs = split.pool.costs();
    let (mut q, mut c) = (0.0, 0.0);
    for (r, &m) in split.records.iter().zip(assignment) {
        q += r.labels[m];
        c += costs[m];
    }
    let n = split.len() as f64;
    FrontierPoint { cost: c / n, quality: q / n }
}

/// Non-dominated (cost, quality) points over all `M^N` assignments, sorted by
/// cost ascending.
pub fn brute_force_frontier(split: &Dataset) -> Result<Vec<FrontierPoint>> {
    let (n, m) = (split.len(), split.pool.len());
    if n == 0 {
        return Err(Error::invalid("split", "no records"));
    }
    let total = (m as u64)
        .checked_pow(n as u32)
        .filter(|t| *t <= MAX_ASSIGNMENTS)
        .ok_or_else(|| Error::TooLarge(format!("{m}^{n} assignments exceed {MAX_ASSIGNMENTS}")))?;
    let mut points = Vec::with_capacity(total as usize);
    let mut assignment = vec![0usize; n];
    loop {
        points.push(assignment_point(split, &assignment));
        // odometer increment, first record fastest
        let mut i = 0;
        loop {
            if i == n {
                return Ok(pareto(points));
            }
            assignment[i] += 1;
            if assignment[i] < m {
                break;
            }
            assignment[i] = 0;
            i += 1;
        }
    }
}

fn pareto(mut points: Vec<FrontierPoint>) -> Vec<FrontierPoint> {
    points.sort_by(|a, b| a.cost.total_cmp(&b.cost).then(b.quality.total_cmp(&a.quality)));
    let mut out: Vec<FrontierPoint> = Vec::new();
    for p in points {
        if out.last().is_none_or(|last| p.quality > last.quality) {
            out.push(p);
        }
    }
    out
}

/// Whether some frontier point is at least as good on both axes and better on
/// one, with `tol` absorbing summation-order rounding.
pub fn is_dominated(p: FrontierPoint, frontier: &[FrontierPoint], tol: f64) -> bool {
    frontier.iter().any(|f| {
        f.cost <= p.cost + tol && f.quality >= p.quality - tol && (f.cost < p.cost - tol || f.quality > p.quality + tol)
    })
}
