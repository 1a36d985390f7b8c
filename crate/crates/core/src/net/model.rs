use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::config::{ArchConfig, ConfigError};
use crate::nn::checkpoint::{self, CheckpointError, SizeReport};
use crate::nn::gradcheck::Fragment;
use crate::nn::{
    concat_channels, impl_module, softmax_cross_entropy, split_channels, BatchNorm1d, Conv1d,
    Layer, LeakyRelu, MaxPool1d, Mode, Module, NnError, Param, PpmBlock, SeBlock, Tensor,
    Upsample1d,
};

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),
    #[error("checkpoint does not match architecture: {0}")]
    Mismatch(String),
}

#[derive(Clone, Debug)]
struct EncoderStage {
    conv: Conv1d,
    bn: BatchNorm1d,
    act: LeakyRelu,
    pool: MaxPool1d,
}

impl_module!(EncoderStage { conv, bn });

#[derive(Clone, Debug)]
struct Branch {
    stages: Vec<EncoderStage>,
    se: SeBlock,
}

impl_module!(Branch { stages, se });

impl Branch {
    fn new(cfg: &ArchConfig, rng: &mut ChaCha8Rng) -> Self {
        let mut cin = cfg.in_channels_per_branch;
        let stages = cfg
            .encoder_channels
            .iter()
            .map(|&cout| {
                let s = EncoderStage {
                    conv: Conv1d::new(cin, cout, 3, 1, 1, rng),
                    bn: BatchNorm1d::new(cout),
                    act: LeakyRelu::new(cfg.leaky_slope),
                    pool: MaxPool1d::new(2, 2),
                };
                cin = cout;
                s
            })
            .collect();
        let se = SeBlock::new(cin, cfg.se_reduction, cfg.leaky_slope, rng);
        Branch { stages, se }
    }

    /// Returns the gated bottleneck features and the pre-pool activations of
    /// every stage (the skip features), finest first.
    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<(Tensor, Vec<Tensor>), NnError> {
        let mut h = x.clone();
        let mut skips = Vec::with_capacity(self.stages.len());
        for s in &mut self.stages {
            let c = s.conv.forward(&h, mode)?;
            let c = s.bn.forward(&c, mode)?;
            let c = s.act.forward(&c, mode)?;
            h = s.pool.forward(&c, mode)?;
            skips.push(c);
        }
        Ok((self.se.forward(&h, mode)?, skips))
    }

    fn backward(&mut self, grad: &Tensor, skip_grads: &[Tensor]) -> Result<Tensor, NnError> {
        let mut g = self.se.backward(grad)?;
        for (s, sg) in self.stages.iter_mut().zip(skip_grads).rev() {
            let mut gc = s.pool.backward(&g)?;
            gc.add_assign(sg);
            let gc = s.act.backward(&gc)?;
            let gc = s.bn.backward(&gc)?;
            g = s.conv.backward(&gc)?;
        }
        Ok(g)
    }
}

#[derive(Clone, Debug)]
struct DecoderStage {
    up: Upsample1d,
    conv: Conv1d,
    bn: BatchNorm1d,
    act: LeakyRelu,
    widths: Vec<usize>,
}

impl_module!(DecoderStage { conv, bn });

/// Shapes observed around the pyramid pooling block on the last forward.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BottleneckShapes {
    pub pre_ppm: Vec<usize>,
    pub post_ppm: Vec<usize>,
}

/// Dual-branch 1D U-Net mapping accelerometer and gyroscope windows to
/// per-sample class logits.
///
/// Each branch runs `conv(k=3) → batchnorm → leaky ReLU → maxpool/2` per
/// stage and gates its bottleneck with an SE block. The two bottlenecks are
/// concatenated and widened by pyramid pooling. Each decoder stage upsamples
/// by two, concatenates the skip features of both branches at that
/// resolution, and applies `conv → batchnorm → leaky ReLU`. A 1×1 convolution
/// produces the logits.
#[derive(Clone, Debug)]
pub struct UWashModel {
    config: ArchConfig,
    accel: Branch,
    gyro: Branch,
    ppm: PpmBlock,
    decoder: Vec<DecoderStage>,
    head: Conv1d,
    shapes: BottleneckShapes,
}

impl_module!(UWashModel { accel, gyro, ppm, decoder, head });

impl UWashModel {
    /// Builds a freshly initialized model. Initial values are rounded to
    /// 32-bit so that a checkpoint round trip is exact.
    pub fn new(config: ArchConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let accel = Branch::new(&config, &mut rng);
        let gyro = Branch::new(&config, &mut rng);
        let ppm = PpmBlock::new(
            config.bottleneck_channels,
            config.ppm_reduce,
            config.bottleneck_length(),
            &mut rng,
        )?;
        let s = config.stages();
        let mut prev = config.ppm_channels();
        let mut decoder = Vec::with_capacity(s);
        for (j, &cout) in config.decoder_channels.iter().enumerate() {
            let skip = config.encoder_channels[s - 1 - j];
            let widths = vec![prev, skip, skip];
            let cin = prev + 2 * skip;
            decoder.push(DecoderStage {
                up: Upsample1d::new(2),
                conv: Conv1d::new(cin, cout, 3, 1, 1, &mut rng),
                bn: BatchNorm1d::new(cout),
                act: LeakyRelu::new(config.leaky_slope),
                widths,
            });
            prev = cout;
        }
        // a narrower head init keeps the initial logits close to uniform
        let head = Conv1d::from_params(
            Tensor::uniform(&[config.num_classes, prev, 1], 1.0 / (prev as f64).sqrt(), &mut rng),
            Tensor::zeros(&[config.num_classes]),
            1,
            0,
        );
        let mut model = UWashModel {
            config,
            accel,
            gyro,
            ppm,
            decoder,
            head,
            shapes: BottleneckShapes::default(),
        };
        model.round_to_storage_precision();
        Ok(model)
    }

    pub fn config(&self) -> &ArchConfig {
        &self.config
    }

    pub fn bottleneck_shapes(&self) -> &BottleneckShapes {
        &self.shapes
    }

    /// Rounds every stored value to 32-bit, the checkpoint precision.
    pub fn round_to_storage_precision(&mut self) {
        for (_, p) in self.named_params_mut() {
            p.value.round_to_f32();
        }
    }

    fn check_input(&self, x: &Tensor, what: &'static str) -> Result<usize, NnError> {
        let (b, c, t) = x.dims3(what)?;
        if c != self.config.in_channels_per_branch || t != self.config.input_length {
            return Err(NnError::Shape {
                op: what,
                detail: format!(
                    "expected (B,{},{}), got {:?}",
                    self.config.in_channels_per_branch,
                    self.config.input_length,
                    x.shape()
                ),
            });
        }
        x.check_finite(what)?;
        Ok(b)
    }

    /// `(B,3,L) + (B,3,L) → (B,10,L)` logits.
    pub fn forward(&mut self, accel: &Tensor, gyro: &Tensor, mode: Mode) -> Result<Tensor, NnError> {
        let b = self.check_input(accel, "accel input")?;
        if self.check_input(gyro, "gyro input")? != b {
            return Err(NnError::Shape {
                op: "forward",
                detail: format!("batch sizes differ: {:?} vs {:?}", accel.shape(), gyro.shape()),
            });
        }
        let (ha, skips_a) = self.accel.forward(accel, mode)?;
        let (hg, skips_g) = self.gyro.forward(gyro, mode)?;
        let z = concat_channels(&[&ha, &hg])?;
        let mut h = self.ppm.forward(&z, mode)?;
        self.shapes = BottleneckShapes {
            pre_ppm: z.shape().to_vec(),
            post_ppm: h.shape().to_vec(),
        };
        let s = self.config.stages();
        for (j, d) in self.decoder.iter_mut().enumerate() {
            let u = d.up.forward(&h, mode)?;
            let cat = concat_channels(&[&u, &skips_a[s - 1 - j], &skips_g[s - 1 - j]])?;
            let c = d.conv.forward(&cat, mode)?;
            let c = d.bn.forward(&c, mode)?;
            h = d.act.forward(&c, mode)?;
        }
        let logits = self.head.forward(&h, mode)?;
        logits.check_finite("logits")?;
        Ok(logits)
    }

    /// Back-propagates `∂loss/∂logits`; returns the input gradients
    /// `(accel, gyro)`.
    pub fn backward(&mut self, grad_logits: &Tensor) -> Result<(Tensor, Tensor), NnError> {
        let s = self.config.stages();
        let mut skip_a: Vec<Option<Tensor>> = vec![None; s];
        let mut skip_g: Vec<Option<Tensor>> = vec![None; s];
        let mut g = self.head.backward(grad_logits)?;
        for (j, d) in self.decoder.iter_mut().enumerate().rev() {
            let gc = d.act.backward(&g)?;
            let gc = d.bn.backward(&gc)?;
            let gcat = d.conv.backward(&gc)?;
            let mut parts = split_channels(&gcat, &d.widths)?.into_iter();
            let gu = parts.next().expect("three parts");
            skip_a[s - 1 - j] = parts.next();
            skip_g[s - 1 - j] = parts.next();
            g = d.up.backward(&gu)?;
        }
        let gz = self.ppm.backward(&g)?;
        let half = self.config.bottleneck_channels / 2;
        let mut parts = split_channels(&gz, &[half, half])?.into_iter();
        let (gha, hgg) = (parts.next().unwrap(), parts.next().unwrap());
        let collect = |v: Vec<Option<Tensor>>| -> Result<Vec<Tensor>, NnError> {
            v.into_iter()
                .map(|t| t.ok_or(NnError::MissingCache("decoder skip")))
                .collect()
        };
        let ga = self.accel.backward(&gha, &collect(skip_a)?)?;
        let gg = self.gyro.backward(&hgg, &collect(skip_g)?)?;
        Ok((ga, gg))
    }

    /// Eval-mode logits without touching this instance's caches.
    pub fn predict(&self, accel: &Tensor, gyro: &Tensor) -> Result<Tensor, NnError> {
        self.clone().forward(accel, gyro, Mode::Eval)
    }

    /// Every stored tensor in checkpoint order.
    pub fn state(&self) -> Vec<(String, &Tensor)> {
        self.named_params()
            .into_iter()
            .map(|(n, p)| (n, &p.value))
            .collect()
    }

    pub fn to_checkpoint_bytes(&self) -> Result<Vec<u8>, ModelError> {
        Ok(checkpoint::encode(&self.config.to_kv(), &self.state())?)
    }

    pub fn from_checkpoint_bytes(bytes: &[u8]) -> Result<Self, ModelError> {
        let data = checkpoint::decode(bytes)?;
        let config = ArchConfig::from_kv(&data.config)?;
        let mut model = UWashModel::new(config, 0)?;
        let mut slots = model.named_params_mut();
        if slots.len() != data.tensors.len() {
            return Err(ModelError::Mismatch(format!(
                "{} tensors stored, architecture has {}",
                data.tensors.len(),
                slots.len()
            )));
        }
        for ((name, p), (stored_name, t)) in slots.iter_mut().zip(data.tensors) {
            if *name != stored_name || p.value.shape() != t.shape() {
                return Err(ModelError::Mismatch(format!(
                    "slot {name} {:?} vs stored {stored_name} {:?}",
                    p.value.shape(),
                    t.shape()
                )));
            }
            p.value = t;
        }
        drop(slots);
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        Ok(checkpoint::write_file(path, &self.to_checkpoint_bytes()?)?)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        Self::from_checkpoint_bytes(&checkpoint::read_file(path)?)
    }

    /// Serialized size of this model's checkpoint.
    pub fn size_report(&self) -> SizeReport {
        checkpoint::size_report(&self.config.to_kv(), &self.state())
    }
}

/// Mean cross-entropy of the model on fixed windows, for gradient checks.
pub struct ModelFragment {
    pub model: UWashModel,
    pub accel: Tensor,
    pub gyro: Tensor,
    pub labels: Vec<u8>,
    pub mode: Mode,
}

impl Fragment for ModelFragment {
    fn slot_names(&mut self) -> Vec<String> {
        self.model.named_params().into_iter().map(|(n, _)| n).collect()
    }

    fn slot_mut(&mut self, index: usize) -> &mut Param {
        self.model
            .named_params_mut()
            .into_iter()
            .nth(index)
            .map(|(_, p)| p)
            .expect("slot index in range")
    }

    fn loss(&mut self) -> Result<f64, NnError> {
        let logits = self.model.forward(&self.accel, &self.gyro, self.mode)?;
        Ok(softmax_cross_entropy(&logits, &self.labels)?.0)
    }

    fn loss_and_grad(&mut self) -> Result<f64, NnError> {
        self.model.zero_grad();
        let logits = self.model.forward(&self.accel, &self.gyro, self.mode)?;
        let (loss, g) = softmax_cross_entropy(&logits, &self.labels)?;
        self.model.backward(&g)?;
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn inputs(b: usize, seed: u64) -> (Tensor, Tensor) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (
            Tensor::uniform(&[b, 3, 64], 2.0, &mut rng),
            Tensor::uniform(&[b, 3, 64], 2.0, &mut rng),
        )
    }

    #[test]
    fn default_shapes() {
        let mut m = UWashModel::new(ArchConfig::default(), 1).unwrap();
        let (a, g) = inputs(3, 0);
        let y = m.forward(&a, &g, Mode::Train).unwrap();
        assert_eq!(y.shape(), &[3, 10, 64]);
        assert_eq!(m.bottleneck_shapes().pre_ppm, vec![3, 64, 8]);
        assert_eq!(m.bottleneck_shapes().post_ppm, vec![3, 112, 8]);
    }

    #[test]
    fn nan_input_is_rejected() {
        let m = UWashModel::new(ArchConfig::default(), 1).unwrap();
        let (mut a, g) = inputs(1, 0);
        a.data_mut()[5] = f64::NAN;
        assert!(matches!(m.predict(&a, &g), Err(NnError::NonFinite(_))));
    }

    #[test]
    fn wrong_input_shape_is_rejected() {
        let m = UWashModel::new(ArchConfig::default(), 1).unwrap();
        let a = Tensor::zeros(&[1, 3, 32]);
        assert!(matches!(m.predict(&a, &a), Err(NnError::Shape { .. })));
    }

    #[test]
    fn checkpoint_round_trip_is_exact() {
        let m = UWashModel::new(ArchConfig::default(), 9).unwrap();
        let bytes = m.to_checkpoint_bytes().unwrap();
        let back = UWashModel::from_checkpoint_bytes(&bytes).unwrap();
        assert_eq!(back.to_checkpoint_bytes().unwrap(), bytes);
        let (a, g) = inputs(2, 3);
        assert_eq!(m.predict(&a, &g).unwrap(), back.predict(&a, &g).unwrap());
        assert_eq!(m.size_report().total_bits, 8 * bytes.len());
    }

    #[test]
    fn forward_backward_keeps_parameters() {
        let mut m = UWashModel::new(ArchConfig::default(), 2).unwrap();
        let before = m.to_checkpoint_bytes().unwrap();
        let (a, g) = inputs(2, 4);
        let y = m.forward(&a, &g, Mode::Train).unwrap();
        m.backward(&Tensor::filled(y.shape(), 0.01)).unwrap();
        let grads_nonzero = m.named_params().iter().any(|(_, p)| p.grad.data().iter().any(|&v| v != 0.0));
        assert!(grads_nonzero);
        // running stats move in train mode; trainable values do not
        let after = UWashModel::from_checkpoint_bytes(&before).unwrap();
        for ((n, p), (_, q)) in m.named_params().iter().zip(after.named_params()) {
            if p.trainable {
                assert_eq!(p.value, q.value, "{n}");
            }
        }
    }
}
