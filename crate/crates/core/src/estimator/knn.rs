//! Exact k-nearest-neighbor regression over stored training prompts.

use serde::{Deserialize, Serialize};

use super::{check_dim, QualityEstimate, QualityEstimator};
use crate::error::{Error, Result};
use crate::pool::{Dataset, LabelScaler};

/// Brute-force k-NN index. Both matrices are row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnIndex {
    pub dim: usize,
    pub k: usize,
    pub model_order: Vec<String>,
    pub scaler: LabelScaler,
    /// N × dim
    pub features: Vec<f64>,
    /// N × M, already scaled
    pub labels: Vec<f64>,
}

impl KnnIndex {
    /// Indexes every record of `train` with labels mapped through `scaler`.
    pub fn build(train: &Dataset, k: usize, scaler: LabelScaler) -> Result<Self> {
        let n = train.len();
        if n == 0 {
            return Err(Error::invalid("train", "empty training split"));
        }
        if k == 0 {
            return Err(Error::invalid("k", "k must be at least 1"));
        }
        if k > n {
            return Err(Error::invalid("k", format!("k exceeds N ({k} > {n})")));
        }
        let mut features = Vec::with_capacity(n * train.dim);
        let mut labels = Vec::with_capacity(n * train.pool.len());
        for r in &train.records {
            features.extend_from_slice(&r.features);
            labels.extend(r.labels.iter().map(|&l| scaler.apply(l)));
        }
        Ok(KnnIndex { dim: train.dim, k, model_order: train.pool.ids(), scaler, features, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len() / self.model_order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Rows of the `k` nearest training points, ascending by row index.
    ///
    /// Distance ties go to the lower row.
    pub fn neighbors(&self, x: &[f64]) -> Result<Vec<usize>> {
        check_dim(self.dim, x)?;
        let mut dist: Vec<(f64, usize)> = if self.dim == 0 {
            (0..self.len()).map(|i| (0.0, i)).collect()
        } else {
            self.features
                .chunks_exact(self.dim)
                .enumerate()
                .map(|(i, row)| (row.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>(), i))
                .collect()
        };
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < dist.len() {
            dist.select_nth_unstable_by(self.k - 1, cmp);
            dist.truncate(self.k);
        }
        let mut rows: Vec<usize> = dist.into_iter().map(|(_, i)| i).collect();
        rows.sort_unstable();
        Ok(rows)
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let m = self.model_order.len();
        if m == 0 || !self.labels.len().is_multiple_of(m) {
            return Err(Error::invalid("knn.labels", "label matrix does not match model_order"));
        }
        let n = self.labels.len() / m;
        if self.features.len() != n * self.dim {
            return Err(Error::invalid("knn.features", "row count disagrees with labels"));
        }
        if self.k == 0 || self.k > n {
            return Err(Error::invalid("knn.k", format!("k={} outside 1..={n}", self.k)));
        }
        Ok(())
    }
}

impl QualityEstimator for KnnIndex {
    fn model_order(&self) -> &[String] {
        &self.model_order
    }

    fn dim(&self) -> usize {
        self.dim
    }

    /// Per-model mean of the neighbors' scaled labels, summed in row order.
    fn predict(&self, x: &[f64]) -> Result<QualityEstimate> {
        let rows = self.neighbors(x)?;
        let m = self.model_order.len();
        let mut acc = vec![0.0; m];
        for &r in &rows {
            for (a, l) in acc.iter_mut().zip(&self.labels[r * m..(r + 1) * m]) {
                *a += l;
            }
        }
        let k = rows.len() as f64;
        Ok(QualityEstimate(acc.into_iter().map(|a| a / k).collect()))
    }
}
