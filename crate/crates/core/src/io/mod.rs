//! Persistence: instructor splits, checkpoints and the prediction pipeline.

pub mod checkpoint;
pub mod pipeline;
pub mod split;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC,
};
pub use pipeline::{
    default_recipe, fit_train_stats, load_sessions, predict, predict_waveform, prepare_sessions, recipe_features,
    write_prediction, Prediction, RawSession, DEFAULT_RECIPE,
};
pub use split::{make_instructor_split, resolve, SessionRecord, SplitManifest, DEFAULT_RATIOS};
