//! The dual-branch segmentation network and its training loop.

pub mod config;
pub mod model;
pub mod train;

pub use config::{ArchConfig, ConfigError};
pub use model::{BottleneckShapes, ModelError, ModelFragment, UWashModel};
pub use train::{train, EpochRecord, PlateauRule, TrainConfig, TrainError, TrainLog, WindowDataset};
