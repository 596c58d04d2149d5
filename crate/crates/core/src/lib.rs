//! Corpus-engineering toolkit for self-training data selection in NMT.
//!
//! The pipeline: train a lexical aligner on parallel data, extract a
//! bilingual dictionary, score monolingual sentences by translation
//! uncertainty (the mean word-translation entropy), then sample a budgeted
//! subset under a penalized, power-scaled uncertainty distribution.
//! Baseline selectors (random, word rarity, source-LM cross-entropy),
//! synthetic-pair filtering, and analysis reports round out the toolkit.

pub mod align;
pub mod bidict;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod ngram_lm;
pub mod report;
pub mod sampling;
pub mod synth;
pub mod uncertainty;

pub use error::{Error, Result};
