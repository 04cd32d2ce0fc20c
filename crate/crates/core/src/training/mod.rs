//! Class-balanced focal loss, AdamW, clipping, the plateau schedule,
//! chunking and the training loop.

pub mod config;
pub mod data;
pub mod gradcheck;
pub mod loss;
pub mod optim;
pub mod schedule;
pub mod trainer;

pub use config::TrainConfig;
pub use data::{chunk_sessions, epoch_batches, sample_minibatch, stream_key, Chunk, SessionData};
pub use gradcheck::{eval_loss, gradient_check, TensorGradCheck};
pub use loss::{cb_focal_loss, focal_loss_node, LossConfig};
pub use optim::{adamw_step, clip_grad_norm, grad_norm, AdamState, OptimizerConfig};
pub use schedule::{schedule_update, ScheduleOutcome, ScheduleRules, TrainState, MAX_EPOCHS};
pub use trainer::{
    accumulate_gradients, apply_gradients, count_classes, dev_error, sweep, train_model, write_training_log, EpochLog,
    GradSum, SweepEntry, TrainOutcome, MAX_GRAD_NORM,
};
