//! Monte Carlo experiments, result tables and the `qdr` command line for
//! quantized distributed MIMO reception.

pub mod cli;
pub mod error;
pub mod experiments;
pub mod record;
pub mod spec;

pub use error::SimError;
pub use experiments::{
    calibrate_sigma_q, compare_theory, run, run_lemma1_convergence, run_lemma2_decay, run_mse_sweep, run_ser_sweep,
    run_trials, sigma_q_from_observations,
};
pub use record::{fmt_sig, mean_stderr, read_csv, write_csv, write_json, MetricRecord, CSV_HEADER};
pub use spec::{db_to_linear, Estimator, ExperimentKind, ExperimentSpec, Receiver, SigmaMode, TrainingKind};
