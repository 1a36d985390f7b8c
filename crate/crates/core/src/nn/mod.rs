//! Minimal dense-tensor layer library.
//!
//! Every layer owns its parameters together with same-shaped gradient slots,
//! caches what it needs during `forward`, and implements `backward` by hand.
//! Backward passes accumulate into gradient slots and never touch parameter
//! values; only [`adam::Adam`] mutates parameters.

pub mod activation;
pub mod adam;
pub mod checkpoint;
pub mod concat;
pub mod conv;
pub mod gradcheck;
pub mod linear;
pub mod loss;
pub mod norm;
pub mod pool;
pub mod ppm;
pub mod se;
pub mod tensor;

pub use activation::{LeakyRelu, Sigmoid};
pub use adam::{Adam, AdamConfig};
pub use concat::{concat_channels, split_channels};
pub use conv::{conv1d_backward, conv1d_forward, Conv1d};
pub use linear::Linear;
pub use loss::softmax_cross_entropy;
pub use norm::BatchNorm1d;
pub use pool::{AvgPool1d, MaxPool1d, Upsample1d};
pub use ppm::PpmBlock;
pub use se::SeBlock;
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("{op}: shape mismatch: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("{0}: backward called without a cached forward pass")]
    MissingCache(&'static str),
    #[error("{0}: non-finite value")]
    NonFinite(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("label {label} at position {index} is outside 0..{classes}")]
    LabelOutOfRange {
        label: usize,
        index: usize,
        classes: usize,
    },
}

/// Forward-pass mode. Only batch normalization behaves differently.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// A named parameter slot with its gradient.
///
/// Non-trainable slots (batch-norm running statistics) are stored in
/// checkpoints but skipped by the optimizer and the gradient checker.
#[derive(Clone, Debug, PartialEq)]
pub struct Param {
    pub value: Tensor,
    pub grad: Tensor,
    pub trainable: bool,
}

impl Param {
    pub fn new(value: Tensor) -> Self {
        let grad = Tensor::zeros(value.shape());
        Param {
            value,
            grad,
            trainable: true,
        }
    }

    pub fn frozen(value: Tensor) -> Self {
        Param {
            trainable: false,
            ..Param::new(value)
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

fn join(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

/// Anything that owns parameter slots, visited in a fixed order.
pub trait Module {
    fn params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Param)>);
    fn params_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Param)>);

    fn named_params(&self) -> Vec<(String, &Param)> {
        let mut out = Vec::new();
        self.params("", &mut out);
        out
    }

    fn named_params_mut(&mut self) -> Vec<(String, &mut Param)> {
        let mut out = Vec::new();
        self.params_mut("", &mut out);
        out
    }

    fn zero_grad(&mut self) {
        for (_, p) in self.named_params_mut() {
            p.zero_grad();
        }
    }

    /// Number of trainable scalars.
    fn parameter_count(&self) -> usize {
        self.named_params()
            .iter()
            .filter(|(_, p)| p.trainable)
            .map(|(_, p)| p.value.len())
            .sum()
    }
}

/// A single-input, single-output layer with a hand-written backward pass.
pub trait Layer: Module {
    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor, NnError>;
    /// Consumes the forward cache; returns the gradient w.r.t. the input.
    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError>;
}

/// Helper for implementing [`Module`] on structs of named sub-modules.
macro_rules! impl_module {
    ($ty:ty { $($field:ident),* $(,)? }) => {
        impl $crate::nn::Module for $ty {
            fn params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a $crate::nn::Param)>) {
                $( $crate::nn::Module::params(&self.$field, &$crate::nn::join_name(prefix, stringify!($field)), out); )*
            }
            fn params_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut $crate::nn::Param)>) {
                $( $crate::nn::Module::params_mut(&mut self.$field, &$crate::nn::join_name(prefix, stringify!($field)), out); )*
            }
        }
    };
}
pub(crate) use impl_module;

pub(crate) fn join_name(prefix: &str, name: &str) -> String {
    join(prefix, name)
}

/// Parameter-free layers.
macro_rules! impl_stateless_module {
    ($ty:ty) => {
        impl $crate::nn::Module for $ty {
            fn params<'a>(&'a self, _: &str, _: &mut Vec<(String, &'a $crate::nn::Param)>) {}
            fn params_mut<'a>(
                &'a mut self,
                _: &str,
                _: &mut Vec<(String, &'a mut $crate::nn::Param)>,
            ) {
            }
        }
    };
}
pub(crate) use impl_stateless_module;

impl Module for Param {
    fn params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Param)>) {
        out.push((prefix.to_string(), self));
    }
    fn params_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Param)>) {
        out.push((prefix.to_string(), self));
    }
}

impl<M: Module> Module for Vec<M> {
    fn params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Param)>) {
        for (i, m) in self.iter().enumerate() {
            m.params(&join(prefix, &i.to_string()), out);
        }
    }
    fn params_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Param)>) {
        for (i, m) in self.iter_mut().enumerate() {
            m.params_mut(&join(prefix, &i.to_string()), out);
        }
    }
}

/// Fan-in scaled uniform bound used for convolution and linear weights.
pub fn he_uniform_bound(fan_in: usize) -> f64 {
    (6.0 / fan_in as f64).sqrt()
}
