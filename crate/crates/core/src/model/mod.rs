//! The spline-network classifier: layer stack, segment aggregation, loss,
//! gradients, training and evaluation.

mod checkpoint;
mod config;
pub mod gru;
mod metrics;
mod network;
mod optim;
mod params;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::{Aggregator, LayerKind, SplineNetConfig};
pub use metrics::{accuracy, argmax, auroc, cross_entropy, score, Metric};
pub use network::{offsets_from_logits, Dropout, GradTape, LossGrad, SplineNet};
pub use optim::Adam;
pub use params::{Gradients, ModelParams, Tensor};
pub use train::{evaluate, predict_all, thread_pool, train, EpochRecord, Example, History, TrainSettings};
