//! Hashed n-gram features and multinomial logistic regression trained by
//! full-batch gradient descent.

use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{default_class_order, Prediction};
use crate::hash::{fnv1a64, stage_seed};
use crate::lexer::tokenize_unhashed;
use crate::slicer::SliceRecord;

pub const DEFAULT_FEATURE_BITS: u32 = 18;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("training needs at least two classes, found {0}")]
    SingleClassError(usize),
    #[error("model file is inconsistent: {0}")]
    BadModel(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Sparse token-count vector; `indices` strictly increasing.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureVector {
    pub indices: Vec<u32>,
    pub values: Vec<u32>,
}

impl FeatureVector {
    /// Counts scaled to unit length, so the step size is independent of
    /// slice length.
    fn normalized(&self) -> Vec<(usize, f64)> {
        let norm = self.values.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt();
        self.indices.iter().zip(&self.values).map(|(&i, &v)| (i as usize, v as f64 / norm)).collect()
    }
}

fn tokens(code: &str) -> Vec<String> {
    let stream = tokenize_unhashed(code);
    if stream.is_clean() && !stream.tokens.is_empty() {
        stream.tokens.into_iter().map(|t| t.text).collect()
    } else {
        code.split_whitespace().map(str::to_string).collect()
    }
}

/// Feature id of a unigram (`u:tok`) or bigram (`b:a\x1fb`) string.
pub fn feature_id(feature: &str, bits: u32) -> u32 {
    (fnv1a64(feature.as_bytes()) & ((1u64 << bits) - 1)) as u32
}

/// Unigram and bigram counts over lexer tokens (whitespace tokens when the
/// code does not lex cleanly), hashed into `2^bits` buckets.
pub fn featurize(code: &str, bits: u32) -> FeatureVector {
    let toks = tokens(code);
    let mut ids: Vec<u32> = toks.iter().map(|t| feature_id(&format!("u:{t}"), bits)).collect();
    ids.extend(toks.windows(2).map(|w| feature_id(&format!("b:{}\x1f{}", w[0], w[1]), bits)));
    ids.sort_unstable();
    let mut fv = FeatureVector { indices: Vec::new(), values: Vec::new() };
    for id in ids {
        if fv.indices.last() == Some(&id) {
            *fv.values.last_mut().expect("parallel vecs") += 1;
        } else {
            fv.indices.push(id);
            fv.values.push(1);
        }
    }
    fv
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub l2: f64,
    pub epochs: usize,
    pub seed: u64,
    pub feature_bits: u32,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { lr: 0.1, l2: 1e-4, epochs: 200, seed: 0, feature_bits: DEFAULT_FEATURE_BITS }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub classes: Vec<String>,
    pub lr: f64,
    pub l2: f64,
    pub seed: u64,
    pub epochs: usize,
    pub feature_bits: u32,
    /// `classes.len() x 2^feature_bits`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// A featurized, normalized training example.
#[derive(Debug, Clone)]
pub struct Example {
    pub x: Vec<(usize, f64)>,
    pub y: usize,
}

/// Loss and gradient restricted to the weight columns in `active`.
#[derive(Debug, Clone)]
pub struct Gradient {
    pub loss: f64,
    /// `classes x active.len()`, row-major.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        1usize << self.feature_bits
    }

    fn row(&self, c: usize) -> &[f64] {
        let d = self.dim();
        &self.weights[c * d..(c + 1) * d]
    }

    pub fn logits(&self, x: &[(usize, f64)]) -> Vec<f64> {
        (0..self.classes.len())
            .map(|c| {
                let w = self.row(c);
                self.bias[c] + x.iter().map(|&(j, v)| w[j] * v).sum::<f64>()
            })
            .collect()
    }

    /// Mean cross-entropy plus `l2 / 2 * |W|^2`, and its gradient.
    /// `active` must list every column with a nonzero weight or feature.
    pub fn objective(&self, data: &[Example], active: &[usize]) -> Gradient {
        let (k, d, n) = (self.classes.len(), self.dim(), data.len() as f64);
        let pos = |j: usize| active.binary_search(&j).expect("feature column is active");
        let mut gw = vec![0.0; k * active.len()];
        let mut gb = vec![0.0; k];
        let mut loss = 0.0;
        for ex in data {
            let p = softmax(&self.logits(&ex.x));
            loss -= p[ex.y].max(f64::MIN_POSITIVE).ln();
            for c in 0..k {
                let delta = p[c] - if c == ex.y { 1.0 } else { 0.0 };
                gb[c] += delta / n;
                for &(j, v) in &ex.x {
                    gw[c * active.len() + pos(j)] += delta * v / n;
                }
            }
        }
        loss /= n;
        for c in 0..k {
            for (a, &j) in active.iter().enumerate() {
                let w = self.weights[c * d + j];
                loss += 0.5 * self.l2 * w * w;
                gw[c * active.len() + a] += self.l2 * w;
            }
        }
        Gradient { loss, weights: gw, bias: gb }
    }

    fn step(&mut self, g: &Gradient, active: &[usize]) {
        let d = self.dim();
        for c in 0..self.classes.len() {
            for (a, &j) in active.iter().enumerate() {
                self.weights[c * d + j] -= self.lr * g.weights[c * active.len() + a];
            }
            self.bias[c] -= self.lr * g.bias[c];
        }
    }

    pub fn scores(&self, code: &str) -> Vec<f64> {
        softmax(&self.logits(&featurize(code, self.feature_bits).normalized()))
    }

    /// Most probable class (first on ties) and the full distribution.
    pub fn predict(&self, code: &str) -> (String, Vec<f64>) {
        let scores = self.scores(code);
        let best = argmax(&scores);
        (self.classes[best].clone(), scores)
    }

    pub fn save(&self, path: &Path) -> Result<(), BaselineError> {
        if let Some(p) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(p)?;
        }
        let mut bytes = serde_json::to_vec(self).map_err(io::Error::other)?;
        bytes.push(b'\n');
        Ok(std::fs::write(path, bytes)?)
    }

    pub fn load(path: &Path) -> Result<Self, BaselineError> {
        let m: LinearModel = crate::io::read_json(path)?;
        let k = m.classes.len();
        if m.feature_bits > 24 || m.bias.len() != k || m.weights.len() != k * m.dim() {
            return Err(BaselineError::BadModel(format!(
                "{k} classes, {} bias terms, {} weights, {} feature bits",
                m.bias.len(),
                m.weights.len(),
                m.feature_bits
            )));
        }
        Ok(m)
    }
}

pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: LinearModel,
    /// Objective before each update, then after the last one.
    pub losses: Vec<f64>,
}

/// Trains on the given records; classes are the distinct labels in class
/// order. Weights of observed features start at U(-0.01, 0.01).
pub fn train(records: &[SliceRecord], config: &TrainConfig) -> Result<TrainOutcome, BaselineError> {
    let classes = default_class_order(records.iter().map(|r| r.label.as_str()));
    if classes.len() < 2 {
        return Err(BaselineError::SingleClassError(classes.len()));
    }
    let data: Vec<Example> = records
        .par_iter()
        .map(|r| Example {
            x: featurize(&r.code, config.feature_bits).normalized(),
            y: classes.iter().position(|c| c == r.label.as_str()).expect("label in classes"),
        })
        .collect();
    Ok(train_examples(classes, &data, config))
}

pub fn train_examples(classes: Vec<String>, data: &[Example], config: &TrainConfig) -> TrainOutcome {
    let mut active: Vec<usize> = data.iter().flat_map(|e| e.x.iter().map(|&(j, _)| j)).collect();
    active.sort_unstable();
    active.dedup();
    let k = classes.len();
    let d = 1usize << config.feature_bits;
    let mut rng = ChaCha8Rng::seed_from_u64(stage_seed(config.seed, "baseline/init"));
    let mut weights = vec![0.0; k * d];
    for c in 0..k {
        for &j in &active {
            weights[c * d + j] = rng.gen_range(-0.01..0.01);
        }
    }
    let mut model = LinearModel {
        classes,
        lr: config.lr,
        l2: config.l2,
        seed: config.seed,
        epochs: config.epochs,
        feature_bits: config.feature_bits,
        weights,
        bias: vec![0.0; k],
    };
    let mut losses = Vec::with_capacity(config.epochs + 1);
    for _ in 0..config.epochs {
        let g = model.objective(data, &active);
        losses.push(g.loss);
        model.step(&g, &active);
    }
    losses.push(model.objective(data, &active).loss);
    TrainOutcome { model, losses }
}

pub fn predict_records(model: &LinearModel, records: &[SliceRecord]) -> Vec<Prediction> {
    records
        .par_iter()
        .map(|r| Prediction {
            slice_id: r.slice_id.clone(),
            true_label: r.label.to_string(),
            pred_label: model.predict(&r.code).0,
            epoch: None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::VulnClass;
    use crate::slicer::SliceLabel;

    fn record(id: usize, label: SliceLabel, code: &str) -> SliceRecord {
        SliceRecord {
            slice_id: format!("s{id}"),
            contract_id: "c".into(),
            label,
            code: code.into(),
            line_span: [1, 1],
        }
    }

    #[test]
    fn features_are_deterministic_and_ordered() {
        let a = featurize("a b", 18);
        assert_eq!(a, featurize("a b", 18));
        assert_ne!(a, featurize("b a", 18));
        assert!(a.indices.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(a.values.iter().sum::<u32>(), 3);
    }

    #[test]
    fn unlexable_code_falls_back_to_whitespace() {
        let fv = featurize("x \"open", 18);
        assert!(fv.indices.contains(&feature_id("u:\"open", 18)));
    }

    #[test]
    fn softmax_simplex_and_shift() {
        let z = [1.0, -3.0, 1000.0, 0.5];
        let p = softmax(&z);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        let shifted: Vec<f64> = z.iter().map(|v| v + 17.0).collect();
        assert_eq!(argmax(&softmax(&shifted)), argmax(&p));
    }

    #[test]
    fn single_class_rejected() {
        let recs = [record(0, SliceLabel::Clean, "a"), record(1, SliceLabel::Clean, "b")];
        assert!(matches!(train(&recs, &TrainConfig::default()), Err(BaselineError::SingleClassError(1))));
    }

    #[test]
    fn separable_toy_set() {
        let re = SliceLabel::Vuln(VulnClass::RE);
        let recs: Vec<_> = (0..20)
            .map(|i| {
                if i % 2 == 0 {
                    record(i, re, "x.transfer(1);")
                } else {
                    record(i, SliceLabel::Clean, "uint a = b;")
                }
            })
            .collect();
        let cfg = TrainConfig { epochs: 100, feature_bits: 12, ..TrainConfig::default() };
        let out = train(&recs, &cfg).unwrap();
        assert!(out.losses.windows(2).all(|w| w[1] <= w[0] + 1e-9));
        let preds = predict_records(&out.model, &recs);
        assert!(preds.iter().all(|p| p.true_label == p.pred_label));
        let again = train(&recs, &cfg).unwrap();
        assert_eq!(again.model, out.model);
    }

    #[test]
    fn model_file_round_trip() {
        let re = SliceLabel::Vuln(VulnClass::RE);
        let recs = [record(0, re, "a"), record(1, SliceLabel::Clean, "b")];
        let cfg = TrainConfig { epochs: 3, feature_bits: 6, ..TrainConfig::default() };
        let model = train(&recs, &cfg).unwrap().model;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        model.save(&path).unwrap();
        assert_eq!(LinearModel::load(&path).unwrap(), model);
    }
}
