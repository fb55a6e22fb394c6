//! Linear-chain conditional random field: feature templates, log-space
//! forward–backward and Viterbi, L2-regularized likelihood training with
//! L-BFGS, and a text model format.

mod features;
mod inference;
mod io;
pub mod lbfgs;
mod model;
mod train;

use thiserror::Error;

pub use features::{
    attr, default_templates, extract_features, FeatureTemplate, LabeledSequence, Position, PositionFeatures,
    TemplateKind, BOS, EOS,
};
pub use io::{load_model, save_model, FORMAT_VERSION, MAGIC};
pub use model::{decode, marginals, CrfModel, LabelMask};
pub use train::{objective_and_gradient, train, TrainingConfig, TrainingLog};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CrfError {
    #[error("no training data")]
    NoData,
    #[error("non-finite objective or gradient")]
    NonFinite,
    #[error("sequence {0} has no gold labels")]
    MissingLabels(usize),
    #[error("{positions} positions but {labels} labels")]
    LengthMismatch { positions: usize, labels: usize },
    #[error("label {0:?} is not in the model")]
    UnknownLabel(String),
    #[error("invalid label {0:?}")]
    BadLabel(String),
    #[error("model format version {found}, expected {expected}")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("corrupt model at line {line}: {message}")]
    CorruptModel { line: usize, message: String },
}
