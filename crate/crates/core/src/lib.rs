//! Flow-record intrusion detection toolkit: ingest and clean flow CSVs,
//! train tree-family classifiers, tune a decision tree with an enhanced
//! particle swarm, evaluate, and emit report tables.

pub mod dataset;
pub mod epso;
pub mod error;
pub mod harness;
pub mod ingest;
pub mod metrics;
pub mod models;
pub mod synth;

pub use error::{Error, Result};
