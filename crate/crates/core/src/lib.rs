//! Multi-domain active learning benchmark.
//!
//! Six multi-domain architectures ([`models`]) are trained on pools of
//! several domains ([`data`]); five acquisition strategies ([`acquisition`])
//! pick which unlabeled instances to label next inside a budgeted,
//! seeded loop ([`engine`]); [`metrics`] turns the resulting learning curves
//! into AULC tables and runs the shared/private and batch-diversity
//! diagnostics.

pub mod acquisition;
pub mod data;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod models;
pub mod nn;
pub mod rng;
pub mod selftest;

pub use error::{MdalError, Result};
