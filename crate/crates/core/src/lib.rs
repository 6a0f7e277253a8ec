//! Generalized majorization-minimization (G-MM).
//!
//! [`engine`] holds the problem-agnostic loop and bound selectors;
//! [`clustering`] and [`lssvm`] instantiate it for k-means and latent
//! structural SVMs; [`data`] generates and loads datasets; [`harness`] runs
//! seeded multi-trial experiments.

// Negated comparisons such as `!(x > 0.0)` are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod data;
pub mod engine;
pub mod error;
pub mod harness;
pub mod lssvm;
pub mod rng;

pub use clustering::{AssignConfig, Centers, Dataset, Initializer, KMeansProblem};
pub use engine::{
    check_theorem_diagnostics, is_valid, run, run_observed, validity_threshold, GmmConfig, GmmState, LatentConfig,
    Problem, RunTrace, Solution, Start, Termination,
};
pub use error::{GmmError, Result};
pub use lssvm::{LatentAssignment, LssvmProblem, StructuredExample};
