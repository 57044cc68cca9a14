//! SGD training of the softmax classifier.
//!
//! Parameters live in [`AtomicMatrix`] during training so that several workers
//! can update them without locks. Updates are read-modify-write with relaxed
//! ordering and may overwrite each other when threads > 1; with one thread the
//! result is bit-for-bit reproducible for a fixed seed.

use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use log::info;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::LabeledText;
use crate::features::{featurize, FeatureVector};
use crate::model::{
    build_vocab, example_gradient, ExampleGradient, Matrix, Model, ModelError, RowRead, TrainParams, Vocabulary,
};

/// `f32` matrix with interior mutability through relaxed atomics.
pub(crate) struct AtomicMatrix {
    cols: usize,
    data: Vec<AtomicU32>,
}

impl AtomicMatrix {
    pub(crate) fn from_matrix(m: Matrix) -> Self {
        let cols = m.cols();
        let data = m.into_vec().into_iter().map(|v| AtomicU32::new(v.to_bits())).collect();
        AtomicMatrix { cols, data }
    }

    pub(crate) fn into_matrix(self) -> Matrix {
        let rows = self.data.len() / self.cols.max(1);
        let data = self.data.into_iter().map(|a| f32::from_bits(a.into_inner())).collect();
        Matrix::from_vec(rows, self.cols, data).expect("shape preserved")
    }

    #[inline]
    fn add(&self, r: usize, c: usize, delta: f64) {
        let cell = &self.data[r * self.cols + c];
        let cur = f32::from_bits(cell.load(Ordering::Relaxed));
        let next = (f64::from(cur) + delta) as f32;
        cell.store(next.to_bits(), Ordering::Relaxed);
    }
}

impl RowRead for AtomicMatrix {
    fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    fn get(&self, r: usize, c: usize) -> f32 {
        f32::from_bits(self.data[r * self.cols + c].load(Ordering::Relaxed))
    }
}

/// Applies `param -= lr * grad` for one example.
pub(crate) fn apply_gradient(input: &AtomicMatrix, output: &AtomicMatrix, grad: &ExampleGradient, lr: f64) {
    let dim = output.cols;
    for (i, g) in grad.output.iter().enumerate() {
        if *g != 0.0 {
            output.add(i / dim, i % dim, -lr * g);
        }
    }
    for &(row, w) in &grad.input_rows {
        for (c, g) in grad.d_hidden.iter().enumerate() {
            input.add(row, c, -lr * w * g);
        }
    }
}

struct Shared<'a> {
    input: AtomicMatrix,
    output: AtomicMatrix,
    examples: &'a [(FeatureVector, usize)],
    n_words: usize,
    n_labels: usize,
    params: TrainParams,
    step: AtomicU64,
    total_steps: u64,
}

impl Shared<'_> {
    fn run(&self, order: &[usize]) -> f64 {
        let mut loss = 0.0;
        for &i in order {
            let t = self.step.fetch_add(1, Ordering::Relaxed);
            let lr = self.params.lr * (1.0 - t as f64 / self.total_steps as f64);
            let (fv, target) = &self.examples[i];
            let g = example_gradient(
                &self.input,
                &self.output,
                self.n_words,
                self.n_labels,
                fv,
                *target,
                self.params.pooling,
            );
            loss += g.loss;
            apply_gradient(&self.input, &self.output, &g, lr);
        }
        loss
    }
}

fn init_input(rows: usize, dim: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let bound = 1.0 / dim as f32;
    let mut m = Matrix::zeros(rows, dim);
    for v in m.as_mut_slice() {
        *v = rng.random_range(-bound..=bound);
    }
    m
}

/// Trains a model on a single-label corpus.
///
/// Input rows start uniform in `[-1/dim, 1/dim]`, output rows at zero. Each
/// epoch visits a seeded shuffle of the corpus; the learning rate decays
/// linearly from `lr` to zero over `epochs * |corpus|` steps.
pub fn train(corpus: &[LabeledText], params: &TrainParams) -> Result<Model, ModelError> {
    params.validate()?;
    let vocab = build_vocab(corpus, &params.feature)?;
    if vocab.n_labels() < 2 {
        return Err(ModelError::SingleClass(vocab.labels()[0]));
    }
    train_with_vocab(corpus, vocab, params)
}

pub(crate) fn train_with_vocab(
    corpus: &[LabeledText],
    vocab: Vocabulary,
    params: &TrainParams,
) -> Result<Model, ModelError> {
    let dim = params.dim;
    let n_words = vocab.n_words();
    let n_labels = vocab.n_labels();
    let examples: Vec<(FeatureVector, usize)> = corpus
        .iter()
        .map(|ex| {
            let target = vocab
                .label_id(&ex.labels()[0])
                .expect("vocabulary built from this corpus");
            (featurize(ex.text(), &vocab, &params.feature), target)
        })
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let input = init_input(n_words + params.feature.bucket as usize, dim, &mut rng);
    let output = Matrix::zeros(n_labels, dim);

    let shared = Shared {
        input: AtomicMatrix::from_matrix(input),
        output: AtomicMatrix::from_matrix(output),
        examples: &examples,
        n_words,
        n_labels,
        params: *params,
        step: AtomicU64::new(0),
        total_steps: (params.epochs * examples.len()) as u64,
    };

    let mut order: Vec<usize> = (0..examples.len()).collect();
    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        let loss = if params.threads == 1 {
            shared.run(&order)
        } else {
            let chunk = order.len().div_ceil(params.threads).max(1);
            std::thread::scope(|s| {
                let handles: Vec<_> = order
                    .chunks(chunk)
                    .map(|part| {
                        let shared = &shared;
                        s.spawn(move || shared.run(part))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("worker panicked")).sum()
            })
        };
        info!(
            "epoch {}/{}: mean loss {:.6}",
            epoch + 1,
            params.epochs,
            loss / examples.len() as f64
        );
    }

    let Shared { input, output, .. } = shared;
    Model::from_parts(vocab, input.into_matrix(), output.into_matrix(), *params)
}
