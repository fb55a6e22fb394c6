//! Multi-tier annotation of time-aligned speech transcriptions: minimal
//! tokens, POS tags, disfluencies, multi-word units, MWU-level POS and
//! discourse markers, produced by a cascade of lexicon lookup, linear-chain
//! CRF tagging and rules.

pub mod annotation;
pub mod corpus_io;
pub mod crf;
pub mod evaluation;
pub mod lexicon;
pub mod pipeline;
pub mod scalar;
pub mod synth;
pub mod tagset;
pub mod tokenizer;

/// Double-precision CRF model.
pub type CrfModel = crf::CrfModel<f64>;
/// Single-precision CRF model.
pub type CrfModelF32 = crf::CrfModel<f32>;
