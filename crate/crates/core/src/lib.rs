//! A fastText-style language identification toolkit: hashed character
//! n-gram features, a softmax linear classifier trained with SGD, a label
//! space with merges and cross-model alignment, post-hoc decision policies
//! (thresholding, ensembles, cascades) and an evaluation harness.

pub mod corpus;
pub mod decision;
pub mod dedup;
pub mod desk;
pub mod eval;
pub mod features;
pub mod io;
pub mod label;
pub mod model;
pub mod noise;
pub mod report;
pub mod train;

pub use corpus::{CorpusError, LabeledText};
pub use decision::{
    apply_threshold, ensemble_top1, ensemble_top3, Cascade, CascadeConfig, DecisionError, EnsembleMode, ThresholdPolicy,
};
pub use eval::{EvalError, MetricsReport, MultilabelGold};
pub use features::{featurize, FeatureParams, FeatureVector, Normalization};
pub use io::{load_model, read_model, save_model, write_model};
pub use label::{AlignmentMap, LabelError, LanguageLabel, MergeMap};
pub use model::{Model, ModelError, Pooling, Prediction, TrainParams, Vocabulary};
pub use train::train;
