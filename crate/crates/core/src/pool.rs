//! Routing pool, labeled prompt datasets and their on-disk formats.

use std::collections::{BTreeMap, HashSet};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One candidate generator. `cost` is in whatever unit the pool uses.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelCandidate {
    pub id: String,
    pub cost: f64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub meta: BTreeMap<String, String>,
}

/// Ordered set of candidates. The position of a model is its canonical index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPool")]
pub struct RoutingPool {
    models: Vec<ModelCandidate>,
}

#[derive(Deserialize)]
struct RawPool {
    models: Vec<ModelCandidate>,
}

impl TryFrom<RawPool> for RoutingPool {
    type Error = Error;

    fn try_from(raw: RawPool) -> Result<Self> {
        RoutingPool::new(raw.models)
    }
}

impl RoutingPool {
    pub fn new(models: Vec<ModelCandidate>) -> Result<Self> {
        if models.is_empty() {
            return Err(Error::invalid("models", "pool must contain at least one model"));
        }
        let mut seen = HashSet::new();
        for (i, m) in models.iter().enumerate() {
            if m.id.is_empty() {
                return Err(Error::invalid(format!("models[{i}].id"), "empty id"));
            }
            if !m.cost.is_finite() || m.cost < 0.0 {
                return Err(Error::invalid(
                    format!("models[{i}].cost"),
                    format!("cost must be a finite nonnegative number, got {}", m.cost),
                ));
            }
            if !seen.insert(m.id.as_str()) {
                return Err(Error::DuplicateId(m.id.clone()));
            }
        }
        Ok(RoutingPool { models })
    }

    /// Convenience constructor from `(id, cost)` pairs.
    pub fn from_costs<S: Into<String>>(entries: impl IntoIterator<Item = (S, f64)>) -> Result<Self> {
        RoutingPool::new(
            entries
                .into_iter()
                .map(|(id, cost)| ModelCandidate { id: id.into(), cost, meta: BTreeMap::new() })
                .collect(),
        )
    }

    pub fn models(&self) -> &[ModelCandidate] {
        &self.models
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn ids(&self) -> Vec<String> {
        self.models.iter().map(|m| m.id.clone()).collect()
    }

    pub fn costs(&self) -> Vec<f64> {
        self.models.iter().map(|m| m.cost).collect()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.models.iter().position(|m| m.id == id)
    }

    pub fn min_cost(&self) -> f64 {
        self.models.iter().map(|m| m.cost).fold(f64::INFINITY, f64::min)
    }

    pub fn max_cost(&self) -> f64 {
        self.models.iter().map(|m| m.cost).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&serde_json::json!({ "models": self.models })).expect("pool serializes")
    }
}

/// Parses a pool document: `{"models":[{"id":..,"cost":..,"meta":{..}?},..]}`.
pub fn load_pool(bytes: &[u8]) -> Result<RoutingPool> {
    let raw: RawPool = serde_json::from_slice(bytes).map_err(|e| Error::Parse { line: None, msg: e.to_string() })?;
    RoutingPool::try_from(raw)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::invalid("split", format!("unknown split \"{other}\""))),
        }
    }
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

/// A prompt with its per-model quality samples, aligned to pool order.
#[derive(Clone, Debug, PartialEq)]
pub struct PromptRecord {
    pub prompt_id: String,
    pub text: Option<String>,
    pub features: Vec<f64>,
    /// `quality_samples[m]` holds the S raw metric values for pool model `m`.
    pub quality_samples: Vec<Vec<f64>>,
    /// `labels[m]` is the mean of `quality_samples[m]`.
    pub labels: Vec<f64>,
    pub split: Split,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordLine {
    prompt_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    features: Vec<f64>,
    qualities: IndexMap<String, Vec<f64>>,
    split: Split,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub pool: RoutingPool,
    pub records: Vec<PromptRecord>,
    pub dim: usize,
}

impl Dataset {
    /// Validates `records` against `pool` and recomputes labels from samples.
    pub fn new(pool: RoutingPool, records: Vec<PromptRecord>) -> Result<Self> {
        let mut ds = Dataset { dim: records.first().map_or(0, |r| r.features.len()), pool, records: Vec::new() };
        for (i, mut rec) in records.into_iter().enumerate() {
            if rec.quality_samples.len() != ds.pool.len() {
                return Err(Error::invalid(
                    format!("records[{i}].quality_samples"),
                    format!("expected {} models, found {}", ds.pool.len(), rec.quality_samples.len()),
                ));
            }
            rec.labels = rec.quality_samples.iter().map(|s| compute_labels(s)).collect::<Result<_>>()?;
            ds.push_checked(rec, None)?;
        }
        Ok(ds)
    }

    fn push_checked(&mut self, rec: PromptRecord, line: Option<usize>) -> Result<()> {
        if rec.features.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: rec.features.len(), line });
        }
        if let Some(bad) = rec.features.iter().find(|v| !v.is_finite()) {
            return Err(Error::Parse { line, msg: format!("non-finite feature value {bad}") });
        }
        if self.records.iter().any(|r| r.prompt_id == rec.prompt_id) {
            return Err(Error::DuplicateId(rec.prompt_id));
        }
        self.records.push(rec);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Records belonging to `split`, in dataset order.
    pub fn split(&self, split: Split) -> Dataset {
        Dataset {
            pool: self.pool.clone(),
            records: self.records.iter().filter(|r| r.split == split).cloned().collect(),
            dim: self.dim,
        }
    }

    /// Every label of every record, record-major.
    pub fn all_labels(&self) -> Vec<f64> {
        self.records.iter().flat_map(|r| r.labels.iter().copied()).collect()
    }

    /// Serializes to the JSONL format read by [`load_dataset`].
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for rec in &self.records {
            let line = RecordLine {
                prompt_id: rec.prompt_id.clone(),
                text: rec.text.clone(),
                features: rec.features.clone(),
                qualities: self
                    .pool
                    .models()
                    .iter()
                    .zip(&rec.quality_samples)
                    .map(|(m, s)| (m.id.clone(), s.clone()))
                    .collect(),
                split: rec.split,
            };
            out.push_str(&serde_json::to_string(&line).expect("record serializes"));
            out.push('\n');
        }
        out
    }
}

/// Reads a JSONL dataset, rejecting on the first malformed line.
///
/// Blank lines are skipped. The feature dimension is fixed by the first record.
pub fn load_dataset(bytes: &[u8], pool: &RoutingPool) -> Result<Dataset> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse { line: None, msg: e.to_string() })?;
    let mut ds = Dataset { pool: pool.clone(), records: Vec::new(), dim: 0 };
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let line: RecordLine =
            serde_json::from_str(raw).map_err(|e| Error::Parse { line: Some(line_no), msg: e.to_string() })?;
        if ds.records.is_empty() {
            ds.dim = line.features.len();
        }
        if let Some(unknown) = line.qualities.keys().find(|k| pool.index_of(k).is_none()) {
            return Err(Error::UnknownModel { model: unknown.clone(), line: line_no });
        }
        let mut samples = Vec::with_capacity(pool.len());
        let mut labels = Vec::with_capacity(pool.len());
        for m in pool.models() {
            let s =
                line.qualities.get(&m.id).ok_or_else(|| Error::MissingModel { model: m.id.clone(), line: line_no })?;
            if s.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse {
                    line: Some(line_no),
                    msg: format!("non-finite quality sample for model \"{}\"", m.id),
                });
            }
            let label = compute_labels(s).map_err(|_| Error::Parse {
                line: Some(line_no),
                msg: format!("no quality samples for model \"{}\"", m.id),
            })?;
            samples.push(s.clone());
            labels.push(label);
        }
        let rec = PromptRecord {
            prompt_id: line.prompt_id,
            text: line.text,
            features: line.features,
            quality_samples: samples,
            labels,
            split: line.split,
        };
        ds.push_checked(rec, Some(line_no)).map_err(|e| match e {
            Error::DuplicateId(id) => {
                Error::Parse { line: Some(line_no), msg: format!("duplicate prompt_id \"{id}\"") }
            }
            other => other,
        })?;
    }
    Ok(ds)
}

/// Empirical expected quality: the arithmetic mean of the samples.
pub fn compute_labels(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::invalid("quality_samples", "need at least one sample"));
    }
    Ok(samples.iter().sum::<f64>() / samples.len() as f64)
}

/// Linear map of raw labels onto [0, 1], fit on training labels.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelScaler {
    pub lo: f64,
    pub hi: f64,
}

impl LabelScaler {
    /// Fits `lo = min`, `hi = max` over all given labels (every model jointly).
    pub fn fit(labels: &[f64]) -> Result<Self> {
        if let Some(bad) = labels.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid("labels", format!("non-finite label {bad}")));
        }
        let lo = labels.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = labels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if labels.is_empty() || lo >= hi {
            return Err(Error::Degenerate("degenerate label range".into()));
        }
        Ok(LabelScaler { lo, hi })
    }

    /// Fits on every (record, model) label of `train`.
    pub fn fit_dataset(train: &Dataset) -> Result<Self> {
        Self::fit(&train.all_labels())
    }

    /// `(v - lo) / (hi - lo)` clamped to [0, 1].
    pub fn apply(&self, v: f64) -> f64 {
        ((v - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0)
    }
}

/// Hashed character-trigram term frequencies, L2-normalized.
///
/// Each trigram of Unicode scalar values is hashed with 64-bit FNV-1a over its
/// UTF-8 bytes and counted in bucket `hash % dim`. Text shorter than three
/// characters yields the zero vector.
pub fn featurize_prompt(text: &str, dim: usize) -> Vec<f64> {
    use std::hash::Hasher;

    assert!(dim >= 1, "feature dimension must be positive");
    let mut v = vec![0.0; dim];
    let chars: Vec<char> = text.chars().collect();
    let mut buf = [0u8; 12];
    for w in chars.windows(3) {
        let mut n = 0;
        for c in w {
            n += c.encode_utf8(&mut buf[n..]).len();
        }
        let mut h = fnv::FnvHasher::default();
        h.write(&buf[..n]);
        v[(h.finish() % dim as u64) as usize] += 1.0;
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    v
}

#[cfg(test)]
// 0.318 is a CLIPScore value, not an approximation of 1/pi
#[allow(clippy::approx_constant)]
mod tests {
    use super::*;

    const PAPER_COSTS: [f64; 9] = [1.50, 1.54, 23.92, 119.70, 210.00, 239.40, 598.50, 598.50, 1197.00];

    fn two_model_pool() -> RoutingPool {
        RoutingPool::from_costs([("a", 1.0), ("b", 2.0)]).unwrap()
    }

    #[test]
    fn loads_nine_model_pool() {
        let models: Vec<_> = PAPER_COSTS
            .iter()
            .enumerate()
            .map(|(i, c)| serde_json::json!({"id": format!("m{i}"), "cost": c}))
            .collect();
        let doc = serde_json::json!({ "models": models }).to_string();
        let pool = load_pool(doc.as_bytes()).unwrap();
        assert_eq!(pool.len(), 9);
        assert_eq!(pool.costs(), PAPER_COSTS);
        assert_eq!(pool.min_cost(), 1.50);
    }

    #[test]
    fn single_zero_cost_model_is_valid() {
        let pool = load_pool(br#"{"models":[{"id":"a","cost":0}]}"#).unwrap();
        assert_eq!(pool.len(), 1);
    }

    #[test]
    fn pool_rejections_name_the_field() {
        let e = load_pool(br#"{"models":[{"id":"a","cost":1},{"id":"a","cost":2}]}"#).unwrap_err();
        assert!(e.to_string().contains("duplicate id"), "{e}");
        let e = load_pool(br#"{"models":[{"id":"a","cost":-1}]}"#).unwrap_err();
        assert!(e.to_string().contains("models[0].cost"), "{e}");
        let e = load_pool(br#"{"models":[]}"#).unwrap_err();
        assert!(e.to_string().contains("models"), "{e}");
        let e = load_pool(br#"{"models":[{"id":"","cost":1}]}"#).unwrap_err();
        assert!(e.to_string().contains("models[0].id"), "{e}");
    }

    #[test]
    fn meta_is_kept() {
        let pool = load_pool(br#"{"models":[{"id":"sdxl","cost":1,"meta":{"steps":"22"}}]}"#).unwrap();
        assert_eq!(pool.models()[0].meta["steps"], "22");
        assert_eq!(load_pool(pool.to_json().as_bytes()).unwrap(), pool);
    }

    const TWO_RECORDS: &str = concat!(
        r#"{"prompt_id":"p1","text":"a cat","features":[0,0,0,1],"qualities":{"a":[0.2,0.4],"b":[0.9]},"split":"train"}"#,
        "\n",
        r#"{"prompt_id":"p2","features":[1,0,0,0],"qualities":{"b":[0.5],"a":[0.1]},"split":"test"}"#,
        "\n"
    );

    #[test]
    fn loads_wellformed_dataset() {
        let ds = load_dataset(TWO_RECORDS.as_bytes(), &two_model_pool()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dim, 4);
        assert!((ds.records[0].labels[0] - 0.3).abs() < 1e-15);
        assert_eq!(ds.records[1].labels, vec![0.1, 0.5]);
        assert_eq!(ds.split(Split::Test).len(), 1);
    }

    #[test]
    fn missing_model_names_model_and_line() {
        let data = concat!(
            r#"{"prompt_id":"p1","features":[0,0,0,1],"qualities":{"a":[0.2],"b":[0.9]},"split":"train"}"#,
            "\n",
            r#"{"prompt_id":"p2","features":[0,0,0,1],"qualities":{"a":[0.2]},"split":"train"}"#
        );
        let e = load_dataset(data.as_bytes(), &two_model_pool()).unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("\"b\"") && msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let data = concat!(
            r#"{"prompt_id":"p1","features":[0,0,0,1],"qualities":{"a":[0.2],"b":[0.9]},"split":"train"}"#,
            "\n",
            r#"{"prompt_id":"p2","features":[0,0,1],"qualities":{"a":[0.2],"b":[0.9]},"split":"train"}"#
        );
        let e = load_dataset(data.as_bytes(), &two_model_pool()).unwrap_err();
        assert!(matches!(e, Error::DimensionMismatch { expected: 4, found: 3, line: Some(2) }), "{e}");
    }

    #[test]
    fn duplicate_prompt_and_bad_lines_are_rejected() {
        let rec = r#"{"prompt_id":"p1","features":[1],"qualities":{"a":[0.2],"b":[0.9]},"split":"train"}"#;
        let e = load_dataset(format!("{rec}\n{rec}\n").as_bytes(), &two_model_pool()).unwrap_err();
        assert!(e.to_string().contains("duplicate prompt_id"), "{e}");
        let e = load_dataset(b"{not json", &two_model_pool()).unwrap_err();
        assert!(e.to_string().starts_with("line 1"), "{e}");
        let empty = r#"{"prompt_id":"p1","features":[1],"qualities":{"a":[],"b":[0.9]},"split":"train"}"#;
        assert!(load_dataset(empty.as_bytes(), &two_model_pool()).is_err());
        let unknown = r#"{"prompt_id":"p1","features":[1],"qualities":{"a":[1],"b":[0.9],"c":[1]},"split":"train"}"#;
        assert!(matches!(load_dataset(unknown.as_bytes(), &two_model_pool()), Err(Error::UnknownModel { .. })));
    }

    #[test]
    fn label_means() {
        assert_eq!(compute_labels(&[0.3]).unwrap(), 0.3);
        assert!((compute_labels(&[0.2, 0.4, 0.4, 0.6]).unwrap() - 0.4).abs() < 1e-15);
        assert_eq!(compute_labels(&[1.0, 1.0, 1.0]).unwrap(), 1.0);
        assert!(compute_labels(&[]).is_err());
    }

    #[test]
    fn scaler_fit_and_apply() {
        let s = LabelScaler::fit(&[0.2, 0.7, 0.45]).unwrap();
        assert_eq!((s.lo, s.hi), (0.2, 0.7));
        assert!((s.apply(0.45) - 0.5).abs() < 1e-15);
        assert_eq!(s.apply(0.9), 1.0);
        assert_eq!(s.apply(-3.0), 0.0);
        let id = LabelScaler::fit(&[0.0, 1.0]).unwrap();
        assert_eq!((id.lo, id.hi), (0.0, 1.0));
        assert_eq!(id.apply(0.318), 0.318);
        let e = LabelScaler::fit(&[0.5, 0.5]).unwrap_err();
        assert!(e.to_string().contains("degenerate label range"));
        assert!(LabelScaler::fit(&[]).is_err());
    }

    #[test]
    fn featurizer_conventions() {
        assert_eq!(featurize_prompt("abc", 64), featurize_prompt("abc", 64));
        assert_eq!(featurize_prompt("", 64), vec![0.0; 64]);
        assert_eq!(featurize_prompt("ab", 8), vec![0.0; 8]);
        let v = featurize_prompt("a colorful park with a crowd", 64);
        let norm_sq: f64 = v.iter().map(|x| x * x).sum();
        assert!((norm_sq.sqrt() - 1.0).abs() < 1e-9);
        // "abc" has a single trigram, so exactly one bucket is set
        let one = featurize_prompt("abc", 64);
        assert_eq!(one.iter().filter(|x| **x == 1.0).count(), 1);
    }

    #[test]
    fn fnv1a_reference_vector() {
        use std::hash::Hasher;
        // published FNV-1a 64 test vector for "a"
        let mut h = fnv::FnvHasher::default();
        h.write(b"a");
        assert_eq!(h.finish(), 0xaf63dc4c8601ec8c);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_dataset() -> impl Strategy<Value = Dataset> {
            (1usize..4, 1usize..4, 1usize..6).prop_flat_map(|(m, d, n)| {
                proptest::collection::vec(
                    (
                        proptest::collection::vec(-10.0f64..10.0, d),
                        proptest::collection::vec(proptest::collection::vec(0.0f64..1.0, 1..4), m),
                        prop_oneof![Just(Split::Train), Just(Split::Val), Just(Split::Test)],
                        proptest::option::of("[a-z ]{0,12}"),
                    ),
                    n,
                )
                .prop_map(move |rows| {
                    let pool = RoutingPool::from_costs((0..m).map(|i| (format!("m{i}"), i as f64 + 0.5))).unwrap();
                    let records = rows
                        .into_iter()
                        .enumerate()
                        .map(|(i, (features, quality_samples, split, text))| PromptRecord {
                            prompt_id: format!("p{i}"),
                            text,
                            features,
                            quality_samples,
                            labels: Vec::new(),
                            split,
                        })
                        .collect();
                    Dataset::new(pool, records).unwrap()
                })
            })
        }

        proptest! {
            #[test]
            fn dataset_jsonl_round_trip(ds in arb_dataset()) {
                let back = load_dataset(ds.to_jsonl().as_bytes(), &ds.pool).unwrap();
                prop_assert_eq!(&back, &ds);
                for rec in &back.records {
                    for (s, l) in rec.quality_samples.iter().zip(&rec.labels) {
                        let mean = s.iter().sum::<f64>() / s.len() as f64;
                        prop_assert!((mean - l).abs() <= 1e-12);
                    }
                }
            }

            #[test]
            fn scaler_is_monotone_and_hits_endpoints(
                labels in proptest::collection::vec(-5.0f64..5.0, 2..20),
                a in -6.0f64..6.0, b in -6.0f64..6.0,
            ) {
                if let Ok(s) = LabelScaler::fit(&labels) {
                    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                    prop_assert!(s.apply(lo) <= s.apply(hi));
                    prop_assert_eq!(s.apply(s.lo), 0.0);
                    prop_assert_eq!(s.apply(s.hi), 1.0);
                }
            }

            #[test]
            fn featurize_is_pure(text in ".{0,40}", dim in 1usize..128) {
                let a = featurize_prompt(&text, dim);
                let b = featurize_prompt(&text, dim);
                prop_assert_eq!(a.len(), dim);
                prop_assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
        }
    }
}
