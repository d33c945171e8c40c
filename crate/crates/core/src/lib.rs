//! Context-word relevance analysis for bidirectional recurrent sequence taggers.
//!
//! The crate trains small bidirectional RNN / LSTM / GRU named-entity taggers
//! with a sentence-level log-likelihood objective and then asks which context
//! words the trained model actually relies on. Three relevance measures are
//! provided:
//!
//! * windowed co-occurrence frequency ([`relevance::score_wf`]),
//! * change in the gold path likelihood under word erasure ([`relevance::score_sll`]),
//! * change in the left/right emission split under word erasure ([`relevance::score_lrc`]).
//!
//! Supporting modules cover CoNLL parsing, pretrained vectors, manual
//! backpropagation through time, Viterbi decoding, span-level evaluation,
//! similarity measures, heatmaps, positional probes and error reports.

pub mod analysis;
pub mod checkpoint;
#[cfg(feature = "cli")]
pub mod cli;
pub mod corpus;
pub mod correlation;
pub mod embeddings;
pub mod error;
pub mod likelihood;
pub mod linalg;
pub mod nn;
pub mod relevance;
pub mod seed;
pub mod synthetic;
pub mod trainer;

pub use error::{Error, Result};
