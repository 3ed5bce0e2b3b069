//! Adaptive mixture importance sampling for off-policy parameter tuning.
//!
//! A Gaussian-mixture proposal is sampled, KPIs are observed at the sampled
//! parameters, and counterfactual Gaussians around the proposal peaks are
//! scored with importance sampling. One of four update policies then turns
//! those scores into the next proposal. The [`simulation`] module replays
//! this loop against a synthetic noisy landscape and reports regret and
//! convergence metrics.

pub mod cli;
pub mod config;
pub mod distributions;
pub mod error;
pub mod estimation;
pub mod policies;
pub mod report;
pub mod simulation;

pub use config::{run_experiment, Algorithm, ExperimentConfig, PartialConfig};
pub use distributions::{
    gaussian_pdf, l1_distance, mixture_pdf, sample, GaussianComponent, MixtureProposal,
    ParameterPoint,
};
pub use error::{AmisError, Result};
pub use estimation::{
    ess, evaluate_candidates, evaluate_candidates_labeled, importance_weights, local_ess, is_estimate, is_stderr,
    true_gaussian_expectation, CandidateEvaluation, CounterfactualCandidate, Estimator,
};
pub use policies::{major_peak, EssScope, Policy, PolicyKind, PolicyState};
pub use simulation::{
    run_tuning, ExperimentReport, KpiOracle, RunOptions, RunRngs, RunTrace, SyntheticLandscape,
};
