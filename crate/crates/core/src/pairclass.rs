//! Pairwise document classification.
//!
//! A multinomial logistic regression over pair features predicts which
//! context (or [`NONE_LABEL`]) relates two documents; the class probability
//! is used as the contextual similarity score.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::Corpus;
use crate::ctxsim::ContextSet;
use crate::linkrep::GraphEmbedding;
use crate::sgd;
use crate::textrep::{self, DenseVector, EmbeddingTable, TextError, Vocabulary};

/// Reserved label for pairs unrelated in every context.
pub const NONE_LABEL: &str = "none";
const MODEL_HEADER: &str = "contextrec-softmax 1";

#[derive(Debug, Error)]
pub enum PairError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("training data holds fewer than two distinct labels")]
    SingleClass,
    #[error("no vector for document {0:?}")]
    MissingVector(String),
    #[error("unknown label {0:?}")]
    UnknownLabel(String),
    #[error("pair relates document {0:?} to itself")]
    SelfPair(String),
    #[error("no pairs given")]
    Empty,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("{source_name}: line {line}: {message}")]
    Format {
        source_name: String,
        line: usize,
        message: String,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Text(#[from] TextError),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LabeledPair {
    pub a: String,
    pub b: String,
    pub label: String,
}

impl LabeledPair {
    pub fn new(a: impl Into<String>, b: impl Into<String>, label: impl Into<String>) -> Self {
        Self {
            a: a.into(),
            b: b.into(),
            label: label.into(),
        }
    }
}

/// `[va ; vb ; |va - vb| ; va ⊙ vb]`
#[derive(Debug, Clone, PartialEq)]
pub struct PairFeature(DenseVector);

impl PairFeature {
    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }
}

pub fn make_features(va: &DenseVector, vb: &DenseVector) -> Result<PairFeature, PairError> {
    if va.dim() != vb.dim() {
        return Err(PairError::DimensionMismatch {
            expected: va.dim(),
            found: vb.dim(),
        });
    }
    let (a, b) = (va.as_slice(), vb.as_slice());
    let mut out = Vec::with_capacity(4 * a.len());
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out.extend(a.iter().zip(b).map(|(x, y)| (x - y).abs()));
    out.extend(a.iter().zip(b).map(|(x, y)| x * y));
    Ok(PairFeature(DenseVector::new(out)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub l2: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            epochs: 100,
            l2: 1e-4,
            batch_size: 32,
            seed: 42,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<(), PairError> {
        let bad = |m: &str| Err(PairError::InvalidConfig(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch_size must be positive");
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return bad("l2 must be non-negative");
        }
        Ok(())
    }
}

/// Linear softmax classifier over pair features.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftmaxModel {
    classes: Vec<String>,
    dim: usize,
    /// Row-major, `classes × dim`.
    weights: Vec<f64>,
    bias: Vec<f64>,
    pub config: TrainConfig,
}

/// One training example: feature values and class index.
#[derive(Debug, Clone, PartialEq)]
pub struct Example {
    pub features: Vec<f64>,
    pub class: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: SoftmaxModel,
    /// Full-data objective after the last epoch.
    pub final_loss: f64,
    /// Full-data objective before training and after each epoch.
    pub loss_history: Vec<f64>,
}

impl SoftmaxModel {
    /// All-zero model for `contexts` plus the trailing "none" class.
    pub fn zeros(contexts: &ContextSet, dim: usize) -> Self {
        let classes = class_labels(contexts);
        Self {
            weights: vec![0.0; classes.len() * dim],
            bias: vec![0.0; classes.len()],
            classes,
            dim,
            config: TrainConfig::default(),
        }
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn class_index(&self, label: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == label)
    }

    /// Feature dimension (four times the document-vector dimension).
    pub fn feature_dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn bias_mut(&mut self) -> &mut [f64] {
        &mut self.bias
    }

    pub fn weight_norm(&self) -> f64 {
        self.weights.iter().map(|w| w * w).sum::<f64>().sqrt()
    }

    fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let mut logits: Vec<f64> = (0..self.classes.len())
            .map(|c| {
                let row = &self.weights[c * self.dim..(c + 1) * self.dim];
                row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias[c]
            })
            .collect();
        sgd::softmax_in_place(&mut logits);
        logits
    }

    pub fn predict_features(&self, feature: &PairFeature) -> Result<Vec<f64>, PairError> {
        if feature.dim() != self.dim {
            return Err(PairError::DimensionMismatch {
                expected: self.dim,
                found: feature.dim(),
            });
        }
        Ok(self.probabilities(feature.as_slice()))
    }

    /// Class distribution for the ordered pair `(va, vb)`, in [`Self::classes`] order.
    pub fn predict(&self, va: &DenseVector, vb: &DenseVector) -> Result<Vec<f64>, PairError> {
        self.predict_features(&make_features(va, vb)?)
    }

    pub fn predict_labeled(&self, va: &DenseVector, vb: &DenseVector) -> Result<Vec<(String, f64)>, PairError> {
        let probs = self.predict(va, vb)?;
        Ok(self.classes.iter().cloned().zip(probs).collect())
    }

    /// Mean cross-entropy plus `(l2 / 2)‖W‖²`, with its analytic gradient.
    pub fn loss_and_gradient(&self, examples: &[Example], l2: f64) -> (f64, Gradient) {
        let k = self.classes.len();
        let mut grad = Gradient {
            weights: vec![0.0; k * self.dim],
            bias: vec![0.0; k],
        };
        let mut loss = 0.0;
        let n = examples.len().max(1) as f64;
        for ex in examples {
            let p = self.probabilities(&ex.features);
            loss -= p[ex.class].max(f64::MIN_POSITIVE).ln();
            for (c, &pc) in p.iter().enumerate().take(k) {
                let delta = (pc - if c == ex.class { 1.0 } else { 0.0 }) / n;
                grad.bias[c] += delta;
                let row = &mut grad.weights[c * self.dim..(c + 1) * self.dim];
                for (g, x) in row.iter_mut().zip(&ex.features) {
                    *g += delta * x;
                }
            }
        }
        loss /= n;
        loss += 0.5 * l2 * self.weights.iter().map(|w| w * w).sum::<f64>();
        for (g, w) in grad.weights.iter_mut().zip(&self.weights) {
            *g += l2 * w;
        }
        (loss, grad)
    }

    /// Plain-text serialization: header, class ordering, config, then
    /// row-major parameters in shortest round-trip decimal form.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let c = &self.config;
        let _ = writeln!(out, "{MODEL_HEADER}");
        let _ = writeln!(out, "classes {}", self.classes.len());
        for label in &self.classes {
            let _ = writeln!(out, "{label}");
        }
        let _ = writeln!(out, "features {}", self.dim);
        let _ = writeln!(out, "learning_rate {}", c.learning_rate);
        let _ = writeln!(out, "epochs {}", c.epochs);
        let _ = writeln!(out, "l2 {}", c.l2);
        let _ = writeln!(out, "batch_size {}", c.batch_size);
        let _ = writeln!(out, "seed {}", c.seed);
        let _ = writeln!(out, "bias");
        let _ = writeln!(out, "{}", join(&self.bias));
        let _ = writeln!(out, "weights");
        for row in self.weights.chunks(self.dim.max(1)) {
            let _ = writeln!(out, "{}", join(row));
        }
        out
    }

    pub fn parse(text: &str, source_name: &str) -> Result<Self, PairError> {
        let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim_end()));
        let err = |line: usize, message: String| PairError::Format {
            source_name: source_name.to_string(),
            line,
            message,
        };
        let mut next = |what: &str| {
            lines
                .next()
                .ok_or_else(|| err(0, format!("unexpected end, expected {what}")))
        };
        let (line, header) = next("header")?;
        if header != MODEL_HEADER {
            return Err(err(line, format!("unsupported model header {header:?}")));
        }
        fn keyed<T: std::str::FromStr>(
            (line, text): (usize, &str),
            key: &str,
            err: &dyn Fn(usize, String) -> PairError,
        ) -> Result<T, PairError> {
            let value = text
                .strip_prefix(key)
                .and_then(|r| r.strip_prefix(' '))
                .ok_or_else(|| err(line, format!("expected `{key} <value>`")))?;
            value.parse().map_err(|_| err(line, format!("bad value for {key}")))
        }
        let n: usize = keyed(next("classes")?, "classes", &err)?;
        let mut classes = Vec::with_capacity(n);
        for _ in 0..n {
            classes.push(next("class label")?.1.to_string());
        }
        let dim: usize = keyed(next("features")?, "features", &err)?;
        let config = TrainConfig {
            learning_rate: keyed(next("learning_rate")?, "learning_rate", &err)?,
            epochs: keyed(next("epochs")?, "epochs", &err)?,
            l2: keyed(next("l2")?, "l2", &err)?,
            batch_size: keyed(next("batch_size")?, "batch_size", &err)?,
            seed: keyed(next("seed")?, "seed", &err)?,
        };
        let floats = |(line, text): (usize, &str), len: usize| -> Result<Vec<f64>, PairError> {
            let values = text
                .split_whitespace()
                .map(str::parse::<f64>)
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| err(line, e.to_string()))?;
            if values.len() != len || values.iter().any(|v| !v.is_finite()) {
                return Err(err(line, format!("expected {len} finite values")));
            }
            Ok(values)
        };
        let (line, tag) = next("bias")?;
        if tag != "bias" {
            return Err(err(line, "expected `bias`".into()));
        }
        let bias = floats(next("bias values")?, n)?;
        let (line, tag) = next("weights")?;
        if tag != "weights" {
            return Err(err(line, "expected `weights`".into()));
        }
        let mut weights = Vec::with_capacity(n * dim);
        for _ in 0..n {
            weights.extend(floats(next("weight row")?, dim)?);
        }
        Ok(Self {
            classes,
            dim,
            weights,
            bias,
            config,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), PairError> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|source| PairError::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PairError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| PairError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")
}

/// Context labels followed by the reserved "none" class.
pub fn class_labels(contexts: &ContextSet) -> Vec<String> {
    contexts
        .labels()
        .iter()
        .cloned()
        .chain(std::iter::once(NONE_LABEL.to_string()))
        .collect()
}

fn lookup<'a>(vectors: &'a BTreeMap<String, DenseVector>, id: &str) -> Result<&'a DenseVector, PairError> {
    vectors.get(id).ok_or_else(|| PairError::MissingVector(id.to_string()))
}

/// Turns labeled pairs into examples, adding the swapped order of every pair.
pub fn symmetrized_examples(
    pairs: &[LabeledPair],
    doc_vectors: &BTreeMap<String, DenseVector>,
    classes: &[String],
) -> Result<Vec<Example>, PairError> {
    let mut examples = Vec::with_capacity(2 * pairs.len());
    for pair in pairs {
        if pair.a == pair.b {
            return Err(PairError::SelfPair(pair.a.clone()));
        }
        let class = classes
            .iter()
            .position(|c| *c == pair.label)
            .ok_or_else(|| PairError::UnknownLabel(pair.label.clone()))?;
        let (va, vb) = (lookup(doc_vectors, &pair.a)?, lookup(doc_vectors, &pair.b)?);
        for (x, y) in [(va, vb), (vb, va)] {
            examples.push(Example {
                features: make_features(x, y)?.as_slice().to_vec(),
                class,
            });
        }
    }
    Ok(examples)
}

/// Mini-batch SGD on the L2-regularized cross-entropy. The L2 term is applied
/// as a proximal step, `W ← (W − η∇) / (1 + ηλ)`, which stays stable for any λ.
pub fn train(
    pairs: &[LabeledPair],
    doc_vectors: &BTreeMap<String, DenseVector>,
    contexts: &ContextSet,
    config: &TrainConfig,
) -> Result<TrainOutcome, PairError> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(PairError::Empty);
    }
    let classes = class_labels(contexts);
    let distinct: BTreeSet<&str> = pairs.iter().map(|p| p.label.as_str()).collect();
    if distinct.len() < 2 {
        return Err(PairError::SingleClass);
    }
    let examples = symmetrized_examples(pairs, doc_vectors, &classes)?;
    let dim = examples[0].features.len();
    let mut model = SoftmaxModel::zeros(contexts, dim);
    model.config = config.clone();

    let mut rng = sgd::seeded(config.seed);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut history = vec![model.loss_and_gradient(&examples, config.l2).0];
    let shrink = 1.0 / (1.0 + config.learning_rate * config.l2);
    let mut batch = Vec::with_capacity(config.batch_size);
    for _ in 0..config.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| examples[i].clone()));
            let (_, grad) = model.loss_and_gradient(&batch, 0.0);
            for (w, g) in model.weights.iter_mut().zip(&grad.weights) {
                *w = (*w - config.learning_rate * g) * shrink;
            }
            for (b, g) in model.bias.iter_mut().zip(&grad.bias) {
                *b -= config.learning_rate * g;
            }
        }
        history.push(model.loss_and_gradient(&examples, config.l2).0);
    }
    Ok(TrainOutcome {
        final_loss: *history.last().expect("history holds the initial loss"),
        loss_history: history,
        model,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metrics {
    pub accuracy: f64,
    /// Classes occurring as a true or predicted label, in model order.
    pub per_class: Vec<ClassMetrics>,
    pub macro_f1: f64,
    /// `confusion[true][predicted]` over all model classes.
    pub confusion: Vec<Vec<usize>>,
}

/// Metrics from `(true, predicted)` class indices over `num_classes` classes.
pub fn metrics_from_predictions(labels: &[String], outcomes: &[(usize, usize)]) -> Metrics {
    let k = labels.len();
    let mut confusion = vec![vec![0usize; k]; k];
    for &(t, p) in outcomes {
        confusion[t][p] += 1;
    }
    let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
    let total = outcomes.len();
    let mut per_class = Vec::new();
    for c in 0..k {
        let support: usize = confusion[c].iter().sum();
        let predicted: usize = confusion.iter().map(|row| row[c]).sum();
        if support == 0 && predicted == 0 {
            continue;
        }
        let tp = confusion[c][c] as f64;
        let precision = if predicted == 0 { 0.0 } else { tp / predicted as f64 };
        let recall = if support == 0 { 0.0 } else { tp / support as f64 };
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.push(ClassMetrics {
            label: labels[c].clone(),
            precision,
            recall,
            f1,
            support,
        });
    }
    let macro_f1 = if per_class.is_empty() {
        0.0
    } else {
        per_class.iter().map(|m| m.f1).sum::<f64>() / per_class.len() as f64
    };
    Metrics {
        accuracy: if total == 0 { 0.0 } else { correct as f64 / total as f64 },
        per_class,
        macro_f1,
        confusion,
    }
}

fn argmax(values: &[f64]) -> usize {
    values
        .iter()
        .enumerate()
        .fold(
            (0, f64::NEG_INFINITY),
            |best, (i, &v)| if v > best.1 { (i, v) } else { best },
        )
        .0
}

pub fn evaluate(
    model: &SoftmaxModel,
    pairs: &[LabeledPair],
    doc_vectors: &BTreeMap<String, DenseVector>,
) -> Result<Metrics, PairError> {
    if pairs.is_empty() {
        return Err(PairError::Empty);
    }
    let mut outcomes = Vec::with_capacity(pairs.len());
    for pair in pairs {
        let truth = model
            .class_index(&pair.label)
            .ok_or_else(|| PairError::UnknownLabel(pair.label.clone()))?;
        let probs = model.predict(lookup(doc_vectors, &pair.a)?, lookup(doc_vectors, &pair.b)?)?;
        outcomes.push((truth, argmax(&probs)));
    }
    Ok(metrics_from_predictions(model.classes(), &outcomes))
}

/// Uniformly samples `count` unordered "none" pairs among `ids` that are not
/// already labeled in `existing` (in either order).
pub fn sample_negative_pairs(ids: &[String], existing: &[LabeledPair], count: usize, seed: u64) -> Vec<LabeledPair> {
    let mut taken: BTreeSet<(&str, &str)> = BTreeSet::new();
    for p in existing {
        let (a, b) = (p.a.as_str(), p.b.as_str());
        taken.insert(if a < b { (a, b) } else { (b, a) });
    }
    let n = ids.len();
    let available = (n * n.saturating_sub(1) / 2).saturating_sub(taken.len());
    let target = count.min(available);
    let mut rng = sgd::seeded(seed);
    let mut out = Vec::with_capacity(target);
    let mut attempts = 0usize;
    while out.len() < target && attempts < 100 * target.max(1) {
        attempts += 1;
        let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if i == j {
            continue;
        }
        let (a, b) = (ids[i].as_str(), ids[j].as_str());
        let key = if a < b { (a, b) } else { (b, a) };
        if taken.insert(key) {
            out.push(LabeledPair::new(a, b, NONE_LABEL));
        }
    }
    out
}

/// Reads a JSONL file of `{"a", "b", "label"}` records.
pub fn read_pairs(path: impl AsRef<Path>) -> Result<Vec<LabeledPair>, PairError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| PairError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_pairs(&text, &path.display().to_string())
}

pub fn parse_pairs(text: &str, source_name: &str) -> Result<Vec<LabeledPair>, PairError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| PairError::Format {
                source_name: source_name.to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

/// Document vectors for the classifier: SIF text vectors concatenated with
/// graph embeddings via [`textrep::hybrid_concat`]. Documents without a graph
/// vector get a zero link part; without any graph embedding the text vector
/// is used alone.
pub fn build_doc_vectors(
    corpus: &Corpus,
    vocab: &Vocabulary,
    table: &EmbeddingTable,
    graph: Option<&GraphEmbedding>,
    alpha: f64,
) -> Result<BTreeMap<String, DenseVector>, PairError> {
    let mut out = BTreeMap::new();
    for doc in corpus.documents() {
        let text = textrep::sif_embed(doc, vocab, table);
        let vector = match graph {
            Some(g) => {
                let link = g.get(&doc.id).cloned().unwrap_or_else(|| DenseVector::zeros(g.dim));
                textrep::hybrid_concat(&text, &link, alpha)?
            }
            None => text,
        };
        out.insert(doc.id.clone(), vector);
    }
    Ok(out)
}
