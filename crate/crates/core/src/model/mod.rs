//! The spatio-temporal scoring model: configuration, network, training
//! loop and checkpoints.

mod checkpoint;
mod config;
mod net;
mod train;

pub use checkpoint::{Checkpoint, MAGIC};
pub use config::AstroConfig;
pub use net::{forward, AstroModel, AstroNet};
pub use train::{resolve_pos_weight, score_dataset, train, EpochLog, TrainOutcome, Trainer, SCORING_BATCH};
