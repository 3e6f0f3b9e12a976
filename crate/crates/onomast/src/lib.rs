//! Character-level name classification.
//!
//! The pipeline runs: load labeled names ([`corpus`]) → normalize and
//! tokenize into overlapping two-character tokens, build a pruned
//! vocabulary, encode to fixed-length index windows ([`textprep`]) → train a
//! single-layer LSTM classifier with variational dropout and Adam ([`nn`]) →
//! score with per-class precision/recall/F1 reports ([`eval`]) → persist the
//! whole predictor in one checksummed container ([`model_io`]) → impute
//! classes for unlabeled names and aggregate dollar shares ([`apply`]).
//!
//! Every random choice flows through a seeded generator ([`rng`]), so equal
//! inputs and seeds reproduce byte-identical artifacts.

pub mod apply;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod model_io;
pub mod nn;
pub mod rng;
pub mod textprep;

pub use error::{Error, Result};

#[doc(hidden)]
pub mod synth;
