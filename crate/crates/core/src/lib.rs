//! Differentially private text classification.
//!
//! The toolkit covers the full pipeline: corpus cleaning
//! ([`text`]), sparse featurization ([`features`]), a linear softmax
//! classifier ([`model`]), noisy clipped-gradient training with budget
//! accounting ([`trainer`], [`dp`]), metric reporting ([`metrics`]), and
//! the plain-text file formats gluing the stages together ([`corpus`]).
//!
//! Every stage is deterministic given a seed: randomness flows through
//! named counter-based streams ([`rng`]), so runs are bitwise
//! reproducible.

pub mod corpus;
pub mod dp;
pub mod error;
pub mod features;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod text;
pub mod trainer;

pub use corpus::RawDocument;
pub use dp::{
    clip_gradient, noise_sigma, noise_sigma_scaled, noisy_update, sample_noise, BudgetLedger,
    ClipNorm, GradientVector, NoiseSpec, PrivacyParams, SigmaMode,
};
pub use error::{Error, Result};
pub use features::{build_vocabulary, featurize, FeatureScheme, FeatureVector, Vocabulary};
pub use metrics::{confusion, metrics, Averaging, ConfusionCounts, MetricsReport};
pub use model::{
    gradient, loss, per_example_gradients, predict, predict_proba, LabeledExample, ModelParams,
};
pub use text::{
    clean_document, lemmatize, remove_stopwords, strip_markup, tokenize, StopwordList,
};
pub use trainer::{
    train_baseline, train_dp, train_dp_with_observer, training_accuracy, ClipMode, TrainConfig,
    TrainReport,
};
