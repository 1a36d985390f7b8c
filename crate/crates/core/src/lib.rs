//! Sample-wise handwashing gesture segmentation on 6-axis IMU streams.

pub mod eval;
pub mod kv;
pub mod net;
pub mod nn;
pub mod par;
pub mod pipeline;
pub mod scoring;
pub mod signal;
pub mod synth;
