//! The budgeted multi-domain AL loop and repeated seeded runs.
//!
//! Every random choice draws from a named substream of the base seed and the
//! repeat index (`split`, `init`, `model/{i}`, `valsplit/{i}`, `fit/{i}`,
//! `acquire/{i}`). None of the names involve the model or the strategy, so
//! cells of a sweep share their splits and warm-start sets.

mod config;
mod run;

pub use config::{DatasetSpec, ExperimentConfig};
pub use run::{
    aggregate, init_experiment, load_dataset, run_experiment, run_experiment_on, run_iteration, run_repeat,
    write_aggregate_csv, AggregatePoint, ExperimentResult, ExperimentState, IterationStatus, RunFailure, RunRecord,
    RunRow,
};
