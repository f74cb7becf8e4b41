//! Three-stage training: de-biaser pre-training against SRMR, reverberator
//! pre-training on de-biased audio, then joint fine-tuning with target
//! reverberators behind the combined metric.

mod checkpoint;
mod config;
mod data;
mod runner;
mod state;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_VERSION};
pub use config::{GanStageConfig, JointStageConfig, PrereqConfig, ReverbStageConfig, TrainConfig};
pub use data::{Pool, TrainData};
pub use runner::{append_log, Phase, Trainer, LOG_HEADER};
pub use state::{fingerprint, EpochRecord, Optimizers, RunState, Stage, Targets};
