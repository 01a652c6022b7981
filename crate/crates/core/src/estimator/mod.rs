//! Quality estimators mapping a prompt's features to one predicted (scaled)
//! quality per pool model.

mod knn;
mod mlp;

pub use knn::KnnIndex;
pub use mlp::{Gradients, MlpModel, TrainConfig, TrainReport};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pool::{Dataset, LabelScaler, RoutingPool};

/// Predicted quality per pool model, in scaled [0, 1] units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QualityEstimate(pub Vec<f64>);

impl QualityEstimate {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl From<Vec<f64>> for QualityEstimate {
    fn from(v: Vec<f64>) -> Self {
        QualityEstimate(v)
    }
}

pub trait QualityEstimator {
    /// Pool ids the output heads correspond to, in order.
    fn model_order(&self) -> &[String];

    fn dim(&self) -> usize;

    fn predict(&self, features: &[f64]) -> Result<QualityEstimate>;

    fn check_pool(&self, pool: &RoutingPool) -> Result<()> {
        let ids = pool.ids();
        if ids.as_slice() != self.model_order() {
            return Err(Error::invalid(
                "estimator",
                format!("model order {:?} does not match pool {:?}", self.model_order(), ids),
            ));
        }
        Ok(())
    }
}

/// Scaled true labels, for routing with perfect knowledge of the labels.
pub fn oracle_estimates(split: &Dataset, scaler: &LabelScaler) -> Vec<QualityEstimate> {
    split.records.iter().map(|r| QualityEstimate(r.labels.iter().map(|&l| scaler.apply(l)).collect())).collect()
}

/// Runs `est` over every record of `split`, in order.
pub fn predict_split(est: &dyn QualityEstimator, split: &Dataset) -> Result<Vec<QualityEstimate>> {
    est.check_pool(&split.pool)?;
    split.records.iter().map(|r| est.predict(&r.features)).collect()
}

pub const FORMAT_NAME: &str = "costroute-estimator";
pub const FORMAT_VERSION: u32 = 1;

/// A trained estimator as stored on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum SavedEstimator {
    Knn(KnnIndex),
    Mlp(MlpModel),
}

#[derive(Serialize, Deserialize)]
struct Envelope {
    format: String,
    version: u32,
    estimator: SavedEstimator,
}

impl SavedEstimator {
    pub fn to_json(&self) -> String {
        let env = Envelope { format: FORMAT_NAME.into(), version: FORMAT_VERSION, estimator: self.clone() };
        serde_json::to_string(&env).expect("estimator serializes")
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let env: Envelope =
            serde_json::from_slice(bytes).map_err(|e| Error::Parse { line: None, msg: e.to_string() })?;
        if env.format != FORMAT_NAME || env.version != FORMAT_VERSION {
            return Err(Error::Parse {
                line: None,
                msg: format!("unsupported estimator format {} v{}", env.format, env.version),
            });
        }
        match &env.estimator {
            SavedEstimator::Knn(k) => k.validate()?,
            SavedEstimator::Mlp(m) => m.validate()?,
        }
        Ok(env.estimator)
    }

    fn inner(&self) -> &dyn QualityEstimator {
        match self {
            SavedEstimator::Knn(k) => k,
            SavedEstimator::Mlp(m) => m,
        }
    }
}

impl QualityEstimator for SavedEstimator {
    fn model_order(&self) -> &[String] {
        self.inner().model_order()
    }

    fn dim(&self) -> usize {
        self.inner().dim()
    }

    fn predict(&self, features: &[f64]) -> Result<QualityEstimate> {
        self.inner().predict(features)
    }
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch { expected, found: x.len(), line: None });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pool::{PromptRecord, Split};

    fn tiny_dataset() -> Dataset {
        let pool = RoutingPool::from_costs([("a", 1.0), ("b", 3.0)]).unwrap();
        let recs = (0..6)
            .map(|i| PromptRecord {
                prompt_id: format!("p{i}"),
                text: None,
                features: vec![i as f64 * 0.1, 1.0 - i as f64 * 0.07],
                quality_samples: vec![vec![0.1 * i as f64], vec![0.9 - 0.05 * i as f64, 0.3]],
                labels: vec![],
                split: Split::Train,
            })
            .collect();
        Dataset::new(pool, recs).unwrap()
    }

    #[test]
    fn saved_estimators_round_trip_exactly() {
        let ds = tiny_dataset();
        let scaler = LabelScaler::fit_dataset(&ds).unwrap();
        let knn = SavedEstimator::Knn(KnnIndex::build(&ds, 3, scaler).unwrap());
        let back = SavedEstimator::from_json(knn.to_json().as_bytes()).unwrap();
        assert_eq!(back, knn);

        let cfg = TrainConfig { epochs: 3, lr: 0.3, batch_size: 2, seed: 5 };
        let (mlp, _) = MlpModel::init(2, 4, 2, 9).unwrap().train(&ds, scaler, &cfg).unwrap();
        let mlp = SavedEstimator::Mlp(mlp);
        let back = SavedEstimator::from_json(mlp.to_json().as_bytes()).unwrap();
        assert_eq!(back, mlp);
        let x = [0.33, 0.77];
        assert_eq!(back.predict(&x).unwrap(), mlp.predict(&x).unwrap());
    }

    #[test]
    fn rejects_foreign_documents() {
        assert!(SavedEstimator::from_json(br#"{"format":"other","version":1,"estimator":{}}"#).is_err());
        assert!(SavedEstimator::from_json(b"[]").is_err());
    }

    #[test]
    fn pool_mismatch_is_reported() {
        let ds = tiny_dataset();
        let scaler = LabelScaler::fit_dataset(&ds).unwrap();
        let knn = KnnIndex::build(&ds, 1, scaler).unwrap();
        let other = RoutingPool::from_costs([("b", 1.0), ("a", 3.0)]).unwrap();
        assert!(knn.check_pool(&other).is_err());
        assert!(knn.check_pool(&ds.pool).is_ok());
    }
}
