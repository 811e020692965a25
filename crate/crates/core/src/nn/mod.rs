//! Small deterministic dense-network engine: layers, losses, gradient
//! reversal, optimizers, schedules and finite-difference checking.

mod gradcheck;
mod layer;
mod loss;
mod optim;
mod reversal;
mod schedule;
mod tensor;

pub use gradcheck::grad_check;
pub use layer::{dense_forward, Activation, DenseCache, DenseLayer, LayerGrads};
pub use loss::{cross_entropy_scaled, softmax, softmax_cross_entropy, softmax_rows};
pub use optim::{optimizer_step, OptimizerKind, OptimizerState};
pub use reversal::GradientReversal;
pub use schedule::{EarlyStopMonitor, LrScheduler, StopDecision, TrainSchedule};
pub use tensor::{dot, sq_dist, Tensor2};
