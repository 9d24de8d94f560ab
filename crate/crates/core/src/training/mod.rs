//! Batching, the copy-aware objective with coverage, Adam and the two-stage
//! training loop.

mod adam;
mod batch;
mod loss;
mod train;

pub use adam::Adam;
pub use batch::{make_batches, Batch, BatchVocabulary};
pub use loss::{coverage_sum, instance_graph, step_gradients, step_loss, InstanceGraph, StepLoss};
pub use train::{
    evaluate, train, EpochRecord, EvalStats, Stage, TrainConfig, TrainEvent, TrainReport,
};
