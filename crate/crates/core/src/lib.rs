//! Stream-based active learning under verification latency and concept drift.
//!
//! The crate simulates a learner that sees one sample per time step, may ask
//! an oracle for its label within a budget, and receives requested labels
//! only after a random delay. Pending labels can be imputed from labelled
//! neighbours ([`propagate`]), and a detected drift can temporarily raise the
//! label budget ([`schedule`]). Runs are evaluated prequentially ([`eval`]).

pub mod classifier;
pub mod drift;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod generators;
pub mod oracle;
pub mod propagate;
pub mod query;
pub mod rng;
pub mod schedule;
pub mod stats;
pub mod window;

pub use error::{Error, Result};
pub use eval::{simulate, EstimatorKind, RunTrace, SimConfig, Simulation};
pub use experiment::{emit_results, run_experiment, ExperimentConfig};
pub use generators::{Stream, StreamSpec};
