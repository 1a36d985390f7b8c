use super::{Module, NnError, Param, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moments are allocated lazily on the first
/// step and keyed by the order of trainable slots.
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Updates every trainable slot of `model` from its gradient.
    pub fn step_module<M: Module + ?Sized>(&mut self, model: &mut M) -> Result<(), NnError> {
        let mut params: Vec<&mut Param> = model
            .named_params_mut()
            .into_iter()
            .map(|(_, p)| p)
            .filter(|p| p.trainable)
            .collect();
        self.step(&mut params)
    }

    pub fn step(&mut self, params: &mut [&mut Param]) -> Result<(), NnError> {
        if self.first.is_empty() {
            self.first = params.iter().map(|p| Tensor::zeros(p.value.shape())).collect();
            self.second = self.first.clone();
        }
        if self.first.len() != params.len() {
            return Err(NnError::Shape {
                op: "adam",
                detail: format!("{} slots, optimizer holds {}", params.len(), self.first.len()),
            });
        }
        for (i, p) in params.iter().enumerate() {
            if p.value.shape() != self.first[i].shape() || p.grad.shape() != p.value.shape() {
                return Err(NnError::Shape {
                    op: "adam",
                    detail: format!(
                        "slot {i}: value {:?}, grad {:?}, moment {:?}",
                        p.value.shape(),
                        p.grad.shape(),
                        self.first[i].shape()
                    ),
                });
            }
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for ((p, m), v) in params.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            let g = p.grad.data();
            let (md, vd) = (m.data_mut(), v.data_mut());
            for (j, w) in p.value.data_mut().iter_mut().enumerate() {
                md[j] = beta1 * md[j] + (1.0 - beta1) * g[j];
                vd[j] = beta2 * vd[j] + (1.0 - beta2) * g[j] * g[j];
                let mhat = md[j] / c1;
                let vhat = vd[j] / c2;
                *w -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
