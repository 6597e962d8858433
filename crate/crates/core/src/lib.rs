//! Tell two black-box models apart with as few binary questions as possible.
//!
//! A population of reference models is summarised as a [`ResponseMatrix`]
//! (models × binary questions). Heuristics score every question by how well it
//! is expected to discriminate models, the questions are ordered by score, and
//! the ordering is then evaluated offline over every model pair or used live
//! against two model oracles.
//!
//! Modules:
//! - [`matrix`]: the response matrix, CSV ingestion, binarization, partitions
//! - [`heuristics`]: random, separability and recursive-similarity scores
//! - [`experiment`]: pairwise distinguishing runs, accuracy curves, sweeps
//! - [`theory`]: exact optimal laws and a brute-force optimal-set search
//! - [`simulation`]: synthetic model populations
//! - [`interrogator`]: the live sequential test against model oracles

pub mod bits;
pub mod error;
pub mod experiment;
pub mod heuristics;
pub mod interrogator;
pub mod matrix;
pub mod simulation;
pub mod theory;

pub use bits::BitVector;
pub use error::{Error, OracleError, Result};
pub use experiment::{
    aggregate_runs, binomial_reference, cdf_to_accuracy, first_discriminating_index,
    monte_carlo_true_negative, run_pairwise, scalability_sweep, AccuracyCurve, DistinguishCdf,
    RunSummary,
};
pub use heuristics::{
    order_questions, separability, similarity, Heuristic, OrderedQuestionList, ScoreVector,
};
pub use interrogator::{sequential_test, Decision, MatrixOracle, ModelOracle, Verdict};
pub use matrix::{load_matrix, save_matrix, Partition, ResponseMatrix};
pub use simulation::{PopulationKind, PopulationSpec};
