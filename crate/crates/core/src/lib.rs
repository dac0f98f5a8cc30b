//! Feed-forward FOFE language models with per-application data balancing.
//!
//! The pipeline: build a vocabulary ([`corpus`]), train per-application
//! n-gram models ([`ngram`]), pick redistribution masses on a balanced dev
//! set and derive per-source sampling weights ([`balancing`]), sample a
//! training corpus, train a FOFE model ([`fofe`], [`training`]) and
//! evaluate perplexity and scoring latency ([`eval`]).

pub mod balancing;
pub mod container;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod exec;
pub mod fofe;
pub mod ngram;
pub mod nn;
pub mod scoring;
pub mod training;

pub use error::{Error, Result};
pub use exec::Execution;
