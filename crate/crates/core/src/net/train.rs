use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use super::model::UWashModel;
use crate::nn::loss::argmax_classes;
use crate::nn::{softmax_cross_entropy, Adam, AdamConfig, Mode, Module, NnError, Tensor};
use crate::signal::{window_starts, SampleSeries, SignalError};

#[derive(Debug, Error, PartialEq)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error("loss became non-finite at epoch {epoch}")]
    Diverged { epoch: usize },
}

/// Early stop when the epoch loss changes by less than `rel_change`
/// (relative) over `window` epochs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PlateauRule {
    pub window: usize,
    pub rel_change: f64,
}

impl Default for PlateauRule {
    fn default() -> Self {
        PlateauRule {
            window: 20,
            rel_change: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    /// Stride between training windows within each series; 1 uses every
    /// window position.
    pub window_stride: usize,
    pub plateau: Option<PlateauRule>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            batch_size: 256,
            epochs: 500,
            seed: 0,
            window_stride: 1,
            plateau: None,
        }
    }
}

/// Window positions over a set of labeled series.
#[derive(Clone, Debug)]
pub struct WindowDataset<'a> {
    series: Vec<&'a SampleSeries>,
    index: Vec<(usize, usize)>,
    length: usize,
}

impl<'a> WindowDataset<'a> {
    pub fn new(series: &[&'a SampleSeries], length: usize, stride: usize) -> Result<Self, TrainError> {
        let mut index = Vec::new();
        for (si, s) in series.iter().enumerate() {
            for (start, _) in window_starts(s.len(), length, stride)? {
                index.push((si, start));
            }
        }
        Ok(WindowDataset {
            series: series.to_vec(),
            index,
            length,
        })
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn window_length(&self) -> usize {
        self.length
    }

    /// Gathers windows `ids` into `(accel, gyro, labels)`.
    pub fn batch(&self, ids: &[usize]) -> (Tensor, Tensor, Vec<u8>) {
        let l = self.length;
        let mut accel = Tensor::zeros(&[ids.len(), 3, l]);
        let mut gyro = Tensor::zeros(&[ids.len(), 3, l]);
        let mut labels = Vec::with_capacity(ids.len() * l);
        for (bi, &id) in ids.iter().enumerate() {
            let (si, start) = self.index[id];
            let s = self.series[si];
            fill_window(&mut accel, bi, &s.accel()[start..start + l]);
            fill_window(&mut gyro, bi, &s.gyro()[start..start + l]);
            labels.extend_from_slice(&s.labels()[start..start + l]);
        }
        (accel, gyro, labels)
    }
}

/// Writes `(T, 3)` samples into batch slot `bi` of a `(B, 3, T)` tensor.
pub(crate) fn fill_window(dst: &mut Tensor, bi: usize, samples: &[[f64; 3]]) {
    let l = samples.len();
    let d = &mut dst.data_mut()[bi * 3 * l..][..3 * l];
    for (t, s) in samples.iter().enumerate() {
        for c in 0..3 {
            d[c * l + t] = s[c];
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrainLog {
    /// Loss of the first minibatch before any update.
    pub initial_loss: f64,
    pub epochs: Vec<EpochRecord>,
    pub stopped_early: bool,
}

impl TrainLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss,accuracy\n");
        for e in &self.epochs {
            s.push_str(&format!("{},{},{}\n", e.epoch, e.loss, e.accuracy));
        }
        s
    }

    pub fn final_loss(&self) -> Option<f64> {
        self.epochs.last().map(|e| e.loss)
    }
}

fn plateaued(epochs: &[EpochRecord], rule: PlateauRule) -> bool {
    let n = epochs.len();
    if rule.window == 0 || n <= rule.window {
        return false;
    }
    let then = epochs[n - 1 - rule.window].loss;
    let now = epochs[n - 1].loss;
    ((now - then) / then).abs() < rule.rel_change
}

/// Minimizes mean sample-wise cross-entropy with Adam. Deterministic for a
/// given seed. On return, parameters are rounded to storage precision.
pub fn train(
    model: &mut UWashModel,
    data: &WindowDataset<'_>,
    config: &TrainConfig,
) -> Result<TrainLog, TrainError> {
    if data.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    if config.batch_size == 0 || !(config.lr > 0.0) {
        return Err(TrainError::Config(format!(
            "batch size {} and learning rate {} must be positive",
            config.batch_size, config.lr
        )));
    }
    if data.window_length() != model.config().input_length {
        return Err(TrainError::Config(format!(
            "windows of length {} for a model with input length {}",
            data.window_length(),
            model.config().input_length
        )));
    }
    let mut adam = Adam::new(AdamConfig {
        lr: config.lr,
        ..AdamConfig::default()
    });
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x7261_696e_5f73_6866);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut log = TrainLog {
        initial_loss: f64::NAN,
        epochs: Vec::new(),
        stopped_early: false,
    };
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        let mut samples = 0usize;
        for ids in order.chunks(config.batch_size) {
            let (accel, gyro, labels) = data.batch(ids);
            model.zero_grad();
            let logits = model.forward(&accel, &gyro, Mode::Train)?;
            let (loss, grad) = softmax_cross_entropy(&logits, &labels)?;
            if !loss.is_finite() {
                return Err(TrainError::Diverged { epoch });
            }
            if log.initial_loss.is_nan() {
                log.initial_loss = loss;
            }
            model.backward(&grad)?;
            adam.step_module(model)?;
            loss_sum += loss * labels.len() as f64;
            samples += labels.len();
            correct += argmax_classes(&logits)?
                .iter()
                .zip(&labels)
                .filter(|(p, y)| p == y)
                .count();
        }
        log.epochs.push(EpochRecord {
            epoch,
            loss: loss_sum / samples as f64,
            accuracy: correct as f64 / samples as f64,
        });
        if let Some(rule) = config.plateau {
            if plateaued(&log.epochs, rule) {
                log.stopped_early = true;
                break;
            }
        }
    }
    model.round_to_storage_precision();
    Ok(log)
}
