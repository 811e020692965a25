//! The six multi-domain architectures, their losses, training and
//! embedding extraction.

mod checkpoint;
mod graph;
mod kind;
mod train;

#[cfg(test)]
mod tests;

pub use graph::{
    badge_embedding, build_model, BatchTrace, ForwardTrace, Gradients, ModelGraph, ModelSpec, ParamRole,
    PredictionPart,
};
pub use kind::ArchitectureKind;
pub use train::{batch_accuracy, fit, FitConfig, FitReport};
