//! Style-sensitive word embeddings.
//!
//! Four CBOW trainers that differ only in which context window predicts a
//! target token: the near window (`near`), the whole utterance (`all`),
//! distant words only (`dist`), and a split-subspace model (`sep`) whose
//! vector halves are trained on near and distant context separately, so
//! one half picks up stylistic similarity while the other keeps the usual
//! syntactic/semantic behavior.
//!
//! The crate ships corpus ingestion ([`corpus`]), context-window algebra
//! ([`context`]), the negative-sampling model ([`model`]), the training
//! loop with its per-part learning-rate balancing ([`trainer`]),
//! evaluation metrics ([`eval`]), a synthetic-world generator for
//! controlled experiments ([`synthgen`]), vector-file serialization
//! ([`io`]), and the `stylevec` command-line tool ([`cli`]).

pub mod cli;
pub mod context;
pub mod corpus;
pub mod eval;
pub mod io;
pub mod model;
pub mod synthgen;
pub mod trainer;

mod error;

pub use error::{Error, Result};
