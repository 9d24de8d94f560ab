//! Abstractive sentence summarization with structure-infused copy mechanisms.
//!
//! One attentional encoder-decoder with a pointer-generator copy switch hosts
//! five variants that differ only in where dependency-parse features enter:
//! [`Architecture::Baseline`], [`Architecture::StructInput`],
//! [`Architecture::StructHidden`], [`Architecture::TwoWayWord`] and
//! [`Architecture::TwoWayRelation`].
//!
//! Everything is built on the small tape in [`autodiff`]; training, greedy and
//! reference-rewarded beam decoding, and ROUGE/relation-preservation scoring
//! live in their own modules.

pub mod autodiff;
pub mod corpus;
pub mod decoding;
pub mod error;
pub mod evaluation;
pub mod exec;
pub mod model;
pub mod training;

pub use error::{Error, Result};
pub use exec::Execution;
pub use model::{Architecture, Model, ModelConfig};
