//! One-hidden-layer perceptron with an independent sigmoid head per model,
//! trained on scaled labels with summed sigmoid cross-entropy.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{check_dim, QualityEstimate, QualityEstimator};
use crate::error::{Error, Result};
use crate::pool::{Dataset, LabelScaler};
use crate::rng::Stream;

/// Probabilities are clamped to this distance from {0, 1} inside the log.
const PROB_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    pub input: usize,
    pub hidden: usize,
    pub heads: usize,
    /// hidden × input, row-major
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// heads × hidden, row-major
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
    pub scaler: LabelScaler,
    pub seed: u64,
    pub model_order: Vec<String>,
}

/// Same layout as the model's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

impl Gradients {
    pub fn flat(&self) -> Vec<f64> {
        [&self.w1, &self.b1, &self.w2, &self.b2].into_iter().flatten().copied().collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub lr: f64,
    pub batch_size: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    /// Full-batch loss of the model before the first update.
    pub initial_loss: f64,
    /// Full-batch loss after each epoch.
    pub epoch_losses: Vec<f64>,
}

struct Activations {
    pre: Vec<f64>,
    hidden: Vec<f64>,
    out: Vec<f64>,
}

/// Logistic function, kept strictly inside (0, 1) where f64 would round to an endpoint.
fn sigmoid(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

/// Sigmoid cross-entropy of one head against a soft target.
pub fn head_loss(p: f64, y: f64) -> f64 {
    let p = p.clamp(PROB_FLOOR, 1.0 - PROB_FLOOR);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

impl MlpModel {
    /// Glorot-uniform weights from a SplitMix64 stream, zero biases.
    ///
    /// Draw order: all of `w1` row-major, then all of `w2` row-major.
    pub fn init(input: usize, hidden: usize, heads: usize, seed: u64) -> Result<Self> {
        if input == 0 || hidden == 0 || heads == 0 {
            return Err(Error::invalid("dims", "input, hidden and head counts must be positive"));
        }
        let mut rng = Stream::new(seed);
        let mut glorot = |fan_in: usize, fan_out: usize| {
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..fan_in * fan_out).map(|_| a * (2.0 * rng.uniform() - 1.0)).collect::<Vec<_>>()
        };
        let w1 = glorot(input, hidden);
        let w2 = glorot(hidden, heads);
        Ok(MlpModel {
            input,
            hidden,
            heads,
            w1,
            b1: vec![0.0; hidden],
            w2,
            b2: vec![0.0; heads],
            scaler: LabelScaler { lo: 0.0, hi: 1.0 },
            seed,
            model_order: (0..heads).map(|i| format!("head{i}")).collect(),
        })
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    /// All parameters in `w1, b1, w2, b2` order.
    pub fn params(&self) -> Vec<f64> {
        [&self.w1, &self.b1, &self.w2, &self.b2].into_iter().flatten().copied().collect()
    }

    fn param_mut(&mut self, i: usize) -> &mut f64 {
        let mut i = i;
        for v in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            if i < v.len() {
                return &mut v[i];
            }
            i -= v.len();
        }
        panic!("parameter index out of range")
    }

    fn activations(&self, x: &[f64]) -> Activations {
        let pre: Vec<f64> = self
            .w1
            .chunks_exact(self.input)
            .zip(&self.b1)
            .map(|(row, b)| row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect();
        let hidden: Vec<f64> = pre.iter().map(|&z| z.max(0.0)).collect();
        let out = self
            .w2
            .chunks_exact(self.hidden)
            .zip(&self.b2)
            .map(|(row, b)| sigmoid(row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>() + b))
            .collect();
        Activations { pre, hidden, out }
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.input, x)?;
        Ok(self.activations(x).out)
    }

    fn check_batch(&self, batch: &[(Vec<f64>, Vec<f64>)]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::invalid("batch", "empty batch"));
        }
        for (x, y) in batch {
            check_dim(self.input, x)?;
            if y.len() != self.heads {
                return Err(Error::DimensionMismatch { expected: self.heads, found: y.len(), line: None });
            }
            if let Some(bad) = y.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::invalid("targets", format!("target {bad} outside [0, 1]")));
            }
        }
        Ok(())
    }

    /// Batch mean of the per-example sum of head losses.
    pub fn loss(&self, batch: &[(Vec<f64>, Vec<f64>)]) -> Result<f64> {
        self.check_batch(batch)?;
        Ok(self.loss_unchecked(batch))
    }

    fn loss_unchecked(&self, batch: &[(Vec<f64>, Vec<f64>)]) -> f64 {
        let total: f64 = batch
            .iter()
            .map(|(x, y)| self.activations(x).out.iter().zip(y).map(|(&p, &t)| head_loss(p, t)).sum::<f64>())
            .sum();
        total / batch.len() as f64
    }

    /// Backpropagated gradient of [`MlpModel::loss`].
    ///
    /// Uses `p - y` at the output logits, the derivative of the unclamped loss;
    /// the two differ only where a head is saturated past the clamp.
    pub fn gradient(&self, batch: &[(Vec<f64>, Vec<f64>)]) -> Result<Gradients> {
        self.check_batch(batch)?;
        Ok(self.gradient_unchecked(batch))
    }

    fn gradient_unchecked(&self, batch: &[(Vec<f64>, Vec<f64>)]) -> Gradients {
        let mut g = Gradients {
            w1: vec![0.0; self.w1.len()],
            b1: vec![0.0; self.b1.len()],
            w2: vec![0.0; self.w2.len()],
            b2: vec![0.0; self.b2.len()],
        };
        let scale = 1.0 / batch.len() as f64;
        let mut dh = vec![0.0; self.hidden];
        for (x, y) in batch {
            let act = self.activations(x);
            dh.iter_mut().for_each(|v| *v = 0.0);
            for (m, (&p, &t)) in act.out.iter().zip(y).enumerate() {
                let dz = (p - t) * scale;
                g.b2[m] += dz;
                let rows = m * self.hidden..(m + 1) * self.hidden;
                let (gw2, w2) = (&mut g.w2[rows.clone()], &self.w2[rows]);
                for (((gw, &w), &h), d) in gw2.iter_mut().zip(w2).zip(&act.hidden).zip(dh.iter_mut()) {
                    *gw += dz * h;
                    *d += dz * w;
                }
            }
            let w1_rows = g.w1.chunks_exact_mut(self.input);
            for (((gb, gw1), &pre), &d) in g.b1.iter_mut().zip(w1_rows).zip(&act.pre).zip(&dh) {
                if pre <= 0.0 {
                    continue;
                }
                *gb += d;
                for (gw, xv) in gw1.iter_mut().zip(x) {
                    *gw += d * xv;
                }
            }
        }
        g
    }

    fn step(&mut self, g: &Gradients, lr: f64) {
        for (p, d) in [(&mut self.w1, &g.w1), (&mut self.b1, &g.b1), (&mut self.w2, &g.w2), (&mut self.b2, &g.b2)] {
            p.iter_mut().zip(d).for_each(|(p, d)| *p -= lr * d);
        }
    }

    /// `(features, scaled labels)` pairs for every record.
    pub fn training_pairs(train: &Dataset, scaler: &LabelScaler) -> Vec<(Vec<f64>, Vec<f64>)> {
        train
            .records
            .iter()
            .map(|r| (r.features.clone(), r.labels.iter().map(|&l| scaler.apply(l)).collect()))
            .collect()
    }

    /// Minibatch gradient descent with a fixed step and per-epoch shuffling.
    pub fn train(mut self, train: &Dataset, scaler: LabelScaler, cfg: &TrainConfig) -> Result<(Self, TrainReport)> {
        if train.is_empty() {
            return Err(Error::invalid("train", "empty training split"));
        }
        if cfg.epochs == 0 || cfg.batch_size == 0 || !(cfg.lr >= 0.0 && cfg.lr.is_finite()) {
            return Err(Error::invalid("train config", "epochs and batch size must be positive, lr finite and >= 0"));
        }
        if train.pool.len() != self.heads {
            return Err(Error::invalid(
                "heads",
                format!("model has {} heads, pool has {}", self.heads, train.pool.len()),
            ));
        }
        check_dim(self.input, &train.records[0].features)?;
        self.model_order = train.pool.ids();
        self.scaler = scaler;

        let pairs = Self::training_pairs(train, &scaler);
        let initial_loss = self.loss_unchecked(&pairs);
        let mut rng = Stream::new(cfg.seed);
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        let mut epoch_losses = Vec::with_capacity(cfg.epochs);
        let mut batch = Vec::with_capacity(cfg.batch_size);
        for _ in 0..cfg.epochs {
            order.shuffle(rng.inner());
            for chunk in order.chunks(cfg.batch_size) {
                batch.clear();
                batch.extend(chunk.iter().map(|&i| pairs[i].clone()));
                let g = self.gradient_unchecked(&batch);
                self.step(&g, cfg.lr);
            }
            epoch_losses.push(self.loss_unchecked(&pairs));
        }
        Ok((self, TrainReport { initial_loss, epoch_losses }))
    }

    /// Largest relative gap between the analytic gradient and central
    /// differences, over every parameter. Denominator is `max(|g|, 1e-8)`.
    pub fn gradient_check(&self, batch: &[(Vec<f64>, Vec<f64>)], epsilon: f64) -> Result<f64> {
        if !(epsilon > 0.0 && epsilon <= 1e-2) {
            return Err(Error::invalid("epsilon", "must lie in (0, 1e-2]"));
        }
        let analytic = self.gradient(batch)?.flat();
        let mut probe = self.clone();
        let mut worst = 0.0f64;
        for (i, g) in analytic.iter().enumerate() {
            let orig = *probe.param_mut(i);
            *probe.param_mut(i) = orig + epsilon;
            let up = probe.loss_unchecked(batch);
            *probe.param_mut(i) = orig - epsilon;
            let down = probe.loss_unchecked(batch);
            *probe.param_mut(i) = orig;
            let fd = (up - down) / (2.0 * epsilon);
            worst = worst.max((g - fd).abs() / g.abs().max(1e-8));
        }
        Ok(worst)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let ok = self.w1.len() == self.input * self.hidden
            && self.b1.len() == self.hidden
            && self.w2.len() == self.hidden * self.heads
            && self.b2.len() == self.heads
            && self.model_order.len() == self.heads;
        if !ok {
            return Err(Error::invalid("mlp", "parameter shapes do not match dims"));
        }
        if self.params().iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("mlp", "non-finite parameter"));
        }
        Ok(())
    }
}

impl QualityEstimator for MlpModel {
    fn model_order(&self) -> &[String] {
        &self.model_order
    }

    fn dim(&self) -> usize {
        self.input
    }

    fn predict(&self, x: &[f64]) -> Result<QualityEstimate> {
        self.forward(x).map(QualityEstimate)
    }
}
