//! Semantic role labeling with syntax-enhanced self-attention.
//!
//! - [`conll`]: CoNLL-2009 reading, writing and labeled argument scoring.
//! - [`syntax`]: dependency trees, path features, pruning and vocabularies.
//! - [`encoder`]: the self-attention encoder with three ways of injecting
//!   syntax (input concatenation, head replacement, relation-aware
//!   attention).
//! - [`training`]: loss, Adadelta, word-budget batching and the training
//!   loop.
//! - [`synthetic`]: generated corpora for training checks.

pub mod config;
pub mod conll;
pub mod encoder;
pub mod error;
pub mod synthetic;
pub mod syntax;
pub mod training;
pub mod vocabs;

pub use error::{Error, Result};
