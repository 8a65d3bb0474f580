//! Monte Carlo harness for compressive time delay estimation.
//!
//! Runs the τ-MSE versus subsampling ratio and τ-MSE versus SNR experiments
//! over the estimators in [`tde_core`], writing one CSV row per sweep point
//! and estimator. Output is a pure function of [`ExperimentConfig`].

pub mod config;
mod error;
pub mod estimator;
pub mod output;
pub mod runner;

pub use config::{parse_sweep, ExperimentConfig};
pub use error::{HarnessError, Result};
pub use estimator::Estimator;
pub use output::write_csv;
pub use runner::{aggregate, run_experiment_kappa, run_experiment_snr, Harness, Row, Table, TrialRecord};
