//! Online training: per-frame step budget, twin Adam optimizers for the
//! network and the particle features, dynamics for the particle positions,
//! checkpoints and metric logs.

mod checkpoint;
mod config;
mod metrics;
mod online;
mod state;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{TrainConfig, TrainMode};
pub use metrics::{EvalRow, LossRow, MetricsLog};
pub use online::{evaluate_frame, run_online_sequence, run_online_with, LoadedFrame};
pub use state::{TrainState, GRADIENT_CHUNKS};
