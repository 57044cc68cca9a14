//! The linear text classifier: vocabulary, parameter matrices, forward pass and
//! top-k prediction.
//!
//! A text's hidden vector is the mean (or, optionally, the sum) of the input
//! rows of its features. Logits are `output · hidden`, turned into class
//! probabilities by a max-shifted softmax. All arithmetic after the row lookup
//! runs in `f64`; parameters are stored as `f32`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use log::warn;
use thiserror::Error;

use crate::corpus::LabeledText;
use crate::features::{featurize, preprocess, tokenize, FeatureParams, FeatureVector};
use crate::label::LanguageLabel;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("corpus has a single class ({0}); at least two are required")]
    SingleClass(LanguageLabel),
    #[error("example {index} has {count} labels; training examples need exactly one")]
    MultiLabelExample { index: usize, count: usize },
    #[error("`other` is a decision-layer output and cannot be trained")]
    OtherNotTrainable,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("duplicate word {0:?} in vocabulary")]
    DuplicateWord(String),
    #[error("duplicate label {0} in vocabulary")]
    DuplicateLabel(LanguageLabel),
    #[error("model format error: {0}")]
    Format(String),
    #[error("model file truncated: needed {needed} bytes at offset {offset}, {available} available")]
    TruncatedFile {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// How feature rows are pooled into the hidden vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Pooling {
    /// Sum divided by the number of features.
    #[default]
    Mean,
    /// Plain sum.
    Sum,
}

impl FromStr for Pooling {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(Pooling::Mean),
            "sum" => Ok(Pooling::Sum),
            other => Err(format!("unknown pooling {other:?} (expected mean|sum)")),
        }
    }
}

impl fmt::Display for Pooling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pooling::Mean => "mean",
            Pooling::Sum => "sum",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Loss {
    #[default]
    Softmax,
}

/// Training hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainParams {
    pub dim: usize,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Values above 1 use unsynchronized shared-parameter updates and are not
    /// reproducible run to run.
    pub threads: usize,
    pub loss: Loss,
    pub pooling: Pooling,
    pub feature: FeatureParams,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            dim: 16,
            lr: 0.1,
            epochs: 5,
            seed: 0,
            threads: 1,
            loss: Loss::Softmax,
            pooling: Pooling::Mean,
            feature: FeatureParams::default(),
        }
    }
}

impl TrainParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.dim == 0 {
            return Err(ModelError::InvalidParams("dim must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(ModelError::InvalidParams("lr must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(ModelError::InvalidParams("epochs must be at least 1".into()));
        }
        if self.threads == 0 {
            return Err(ModelError::InvalidParams("threads must be at least 1".into()));
        }
        self.feature.validate().map_err(ModelError::InvalidParams)
    }
}

/// Word list and label list of a model. Order is fixed at build time.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    words: Vec<(String, u64)>,
    labels: Vec<LanguageLabel>,
    word_index: HashMap<String, u32>,
    label_index: HashMap<LanguageLabel, usize>,
}

impl Vocabulary {
    pub fn from_parts(words: Vec<(String, u64)>, labels: Vec<LanguageLabel>) -> Result<Self, ModelError> {
        let mut word_index = HashMap::with_capacity(words.len());
        for (i, (w, _)) in words.iter().enumerate() {
            if word_index.insert(w.clone(), i as u32).is_some() {
                return Err(ModelError::DuplicateWord(w.clone()));
            }
        }
        let mut label_index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if l.is_other() {
                return Err(ModelError::OtherNotTrainable);
            }
            if label_index.insert(*l, i).is_some() {
                return Err(ModelError::DuplicateLabel(*l));
            }
        }
        Ok(Vocabulary {
            words,
            labels,
            word_index,
            label_index,
        })
    }

    pub fn word_id(&self, token: &str) -> Option<u32> {
        self.word_index.get(token).copied()
    }

    pub fn label_id(&self, label: &LanguageLabel) -> Option<usize> {
        self.label_index.get(label).copied()
    }

    pub fn words(&self) -> &[(String, u64)] {
        &self.words
    }

    pub fn labels(&self) -> &[LanguageLabel] {
        &self.labels
    }

    pub fn n_words(&self) -> usize {
        self.words.len()
    }

    pub fn n_labels(&self) -> usize {
        self.labels.len()
    }
}

/// Builds the vocabulary of a single-label corpus.
///
/// Words below `min_count` are dropped; the rest are ordered by count
/// descending, then first occurrence. Labels keep first-occurrence order.
pub fn build_vocab<'a, I>(corpus: I, params: &FeatureParams) -> Result<Vocabulary, ModelError>
where
    I: IntoIterator<Item = &'a LabeledText>,
{
    params.validate().map_err(ModelError::InvalidParams)?;
    // (count, first occurrence)
    let mut counts: HashMap<String, (u64, usize)> = HashMap::new();
    let mut labels = Vec::new();
    let mut seen_labels = HashMap::new();
    let mut n_examples = 0usize;
    let mut n_tokens = 0usize;
    for (index, ex) in corpus.into_iter().enumerate() {
        n_examples += 1;
        let label = match ex.labels() {
            [l] => *l,
            other => {
                return Err(ModelError::MultiLabelExample {
                    index,
                    count: other.len(),
                })
            }
        };
        if label.is_other() {
            return Err(ModelError::OtherNotTrainable);
        }
        if seen_labels.insert(label, labels.len()).is_none() {
            labels.push(label);
        }
        let text = preprocess(ex.text(), params.normalization);
        for tok in tokenize(&text) {
            // the model file stores word lengths as u16
            if tok.len() > usize::from(u16::MAX) {
                continue;
            }
            let e = counts.entry(tok.to_string()).or_insert((0, n_tokens));
            e.0 += 1;
            n_tokens += 1;
        }
    }
    if n_examples == 0 {
        return Err(ModelError::EmptyCorpus);
    }
    if labels.len() == 1 {
        warn!("corpus has a single class: {}", labels[0]);
    }
    let mut words: Vec<(String, u64, usize)> = counts
        .into_iter()
        .filter(|(_, (c, _))| *c >= params.min_count)
        .map(|(w, (c, first))| (w, c, first))
        .collect();
    words.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    Vocabulary::from_parts(words.into_iter().map(|(w, c, _)| (w, c)).collect(), labels)
}

/// Row-major `f32` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f32>) -> Result<Self, ModelError> {
        if rows.checked_mul(cols) != Some(data.len()) {
            return Err(ModelError::ShapeMismatch(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f32] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f32] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub(crate) fn into_vec(self) -> Vec<f32> {
        self.data
    }
}

/// Read access to a parameter matrix, shared by the plain and the atomic
/// (training) representations.
pub(crate) trait RowRead {
    fn cols(&self) -> usize;
    fn get(&self, r: usize, c: usize) -> f32;
}

impl RowRead for Matrix {
    fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    fn get(&self, r: usize, c: usize) -> f32 {
        self.data[r * self.cols + c]
    }
}

pub(crate) fn pooled_hidden<M: RowRead>(input: &M, fv: &FeatureVector, n_words: usize, pooling: Pooling) -> Vec<f64> {
    let dim = input.cols();
    let mut h = vec![0.0f64; dim];
    let n = fv.len();
    if n == 0 {
        return h;
    }
    for r in fv.rows(n_words) {
        for (c, hc) in h.iter_mut().enumerate() {
            *hc += f64::from(input.get(r, c));
        }
    }
    if pooling == Pooling::Mean {
        let inv = n as f64;
        h.iter_mut().for_each(|x| *x /= inv);
    }
    h
}

pub(crate) fn logits<M: RowRead>(output: &M, n_labels: usize, h: &[f64]) -> Vec<f64> {
    (0..n_labels)
        .map(|k| {
            h.iter()
                .enumerate()
                .map(|(c, hc)| f64::from(output.get(k, c)) * hc)
                .sum()
        })
        .collect()
}

/// Max-shifted softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut e: Vec<f64> = z.iter().map(|v| (v - max).exp()).collect();
    let s: f64 = e.iter().sum();
    e.iter_mut().for_each(|v| *v /= s);
    e
}

/// Ranked `(label, probability)` pairs, descending by probability with ties
/// broken by ascending label index.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub ranked: Vec<(LanguageLabel, f64)>,
}

impl Prediction {
    pub fn top(&self) -> Option<(LanguageLabel, f64)> {
        self.ranked.first().copied()
    }

    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    pub fn truncated(&self, k: usize) -> Prediction {
        Prediction {
            ranked: self.ranked.iter().take(k).copied().collect(),
        }
    }
}

/// Indices of `scores` sorted by (score desc, index asc).
pub fn rank_indices(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    idx
}

/// A trained classifier. Immutable once built; safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    vocab: Vocabulary,
    input: Matrix,
    output: Matrix,
    params: TrainParams,
}

impl Model {
    /// Assembles a model, checking shapes against the vocabulary and params.
    pub fn from_parts(
        vocab: Vocabulary,
        input: Matrix,
        output: Matrix,
        params: TrainParams,
    ) -> Result<Self, ModelError> {
        params.validate()?;
        let in_rows = vocab.n_words() + params.feature.bucket as usize;
        if input.rows() != in_rows || input.cols() != params.dim {
            return Err(ModelError::ShapeMismatch(format!(
                "input matrix is {}x{}, expected {in_rows}x{}",
                input.rows(),
                input.cols(),
                params.dim
            )));
        }
        if output.rows() != vocab.n_labels() || output.cols() != params.dim {
            return Err(ModelError::ShapeMismatch(format!(
                "output matrix is {}x{}, expected {}x{}",
                output.rows(),
                output.cols(),
                vocab.n_labels(),
                params.dim
            )));
        }
        if !input.as_slice().iter().chain(output.as_slice()).all(|v| v.is_finite()) {
            return Err(ModelError::ShapeMismatch("non-finite parameter".into()));
        }
        Ok(Model {
            vocab,
            input,
            output,
            params,
        })
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn labels(&self) -> &[LanguageLabel] {
        self.vocab.labels()
    }

    pub fn params(&self) -> &TrainParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.params.dim
    }

    pub fn input_matrix(&self) -> &Matrix {
        &self.input
    }

    pub fn output_matrix(&self) -> &Matrix {
        &self.output
    }

    /// Pooling is an inference-time setting; model files do not record it.
    pub fn set_pooling(&mut self, pooling: Pooling) {
        self.params.pooling = pooling;
    }

    /// Normalization is an inference-time setting; model files do not record it.
    pub fn set_normalization(&mut self, norm: crate::features::Normalization) {
        self.params.feature.normalization = norm;
    }

    pub fn featurize(&self, text: &str) -> FeatureVector {
        featurize(text, &self.vocab, &self.params.feature)
    }

    pub fn hidden(&self, fv: &FeatureVector) -> Vec<f64> {
        pooled_hidden(&self.input, fv, self.vocab.n_words(), self.params.pooling)
    }

    pub fn logits(&self, h: &[f64]) -> Vec<f64> {
        logits(&self.output, self.vocab.n_labels(), h)
    }

    pub fn softmax_scores(&self, h: &[f64]) -> Vec<f64> {
        softmax(&self.logits(h))
    }

    /// Full softmax distribution for a text, in label-index order.
    pub fn scores(&self, text: &str) -> Vec<f64> {
        let fv = self.featurize(text);
        self.softmax_scores(&self.hidden(&fv))
    }

    /// Top-`k` labels. `k` is clamped to `[1, n_labels]`; probabilities come
    /// from the full softmax and are not renormalized.
    pub fn predict_topk(&self, text: &str, k: usize) -> Prediction {
        let scores = self.scores(text);
        let k = k.clamp(1, scores.len().max(1));
        let ranked = rank_indices(&scores)
            .into_iter()
            .take(k)
            .map(|i| (self.vocab.labels()[i], scores[i]))
            .collect();
        Prediction { ranked }
    }

    #[cfg(test)]
    pub(crate) fn into_parts(self) -> (Vocabulary, Matrix, Matrix, TrainParams) {
        (self.vocab, self.input, self.output, self.params)
    }

    /// Loss and exact gradients of the cross-entropy for one example.
    pub fn example_gradient(&self, fv: &FeatureVector, target: usize) -> ExampleGradient {
        example_gradient(
            &self.input,
            &self.output,
            self.vocab.n_words(),
            self.vocab.n_labels(),
            fv,
            target,
            self.params.pooling,
        )
    }
}

/// Free-function forms of the forward pass.
pub fn hidden(fv: &FeatureVector, model: &Model) -> Vec<f64> {
    model.hidden(fv)
}

pub fn softmax_scores(h: &[f64], model: &Model) -> Vec<f64> {
    model.softmax_scores(h)
}

pub fn predict_topk(model: &Model, text: &str, k: usize) -> Prediction {
    model.predict_topk(text, k)
}

/// Gradient of `-log p(target)` for one example.
///
/// `output` is dense (`n_labels x dim`, row-major). The gradient with respect
/// to input row `r` is `weight(r) * d_hidden`, where `weight` accumulates
/// `1/N` (mean pooling) or `1` (sum pooling) per occurrence of `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleGradient {
    pub loss: f64,
    pub hidden: Vec<f64>,
    pub probs: Vec<f64>,
    pub output: Vec<f64>,
    pub d_hidden: Vec<f64>,
    pub input_rows: Vec<(usize, f64)>,
}

impl ExampleGradient {
    /// Gradient with respect to one input row (zero if the row is unused).
    pub fn input_row(&self, row: usize) -> Vec<f64> {
        let w: f64 = self.input_rows.iter().filter(|(r, _)| *r == row).map(|(_, w)| w).sum();
        self.d_hidden.iter().map(|g| g * w).collect()
    }
}

pub(crate) fn example_gradient<M: RowRead>(
    input: &M,
    output: &M,
    n_words: usize,
    n_labels: usize,
    fv: &FeatureVector,
    target: usize,
    pooling: Pooling,
) -> ExampleGradient {
    let dim = input.cols();
    let hidden = pooled_hidden(input, fv, n_words, pooling);
    let probs = softmax(&logits(output, n_labels, &hidden));
    let loss = -probs[target].ln();
    let mut out = vec![0.0; n_labels * dim];
    let mut d_hidden = vec![0.0; dim];
    for k in 0..n_labels {
        let alpha = probs[k] - if k == target { 1.0 } else { 0.0 };
        for c in 0..dim {
            out[k * dim + c] = alpha * hidden[c];
            d_hidden[c] += alpha * f64::from(output.get(k, c));
        }
    }
    let w = match pooling {
        Pooling::Mean if !fv.is_empty() => 1.0 / fv.len() as f64,
        _ => 1.0,
    };
    let mut rows: Vec<(usize, f64)> = Vec::new();
    let mut sorted: Vec<usize> = fv.rows(n_words).collect();
    sorted.sort_unstable();
    for r in sorted {
        match rows.last_mut() {
            Some((last, acc)) if *last == r => *acc += w,
            _ => rows.push((r, w)),
        }
    }
    ExampleGradient {
        loss,
        hidden,
        probs,
        output: out,
        d_hidden,
        input_rows: rows,
    }
}
