use super::{join_name, Layer, Mode, Module, NnError, Param, Tensor};

pub const DEFAULT_EPS: f64 = 1e-5;
pub const DEFAULT_MOMENTUM: f64 = 0.1;

#[derive(Clone, Debug)]
enum Cache {
    /// Normalized activations and per-channel inverse std of the batch.
    Train { xhat: Tensor, inv_std: Vec<f64> },
    Eval { xhat: Tensor, inv_std: Vec<f64> },
}

/// Per-channel batch normalization over the batch and time axes.
///
/// Running statistics use the unbiased batch variance and an exponential
/// update with `momentum`, the same convention as PyTorch.
#[derive(Clone, Debug)]
pub struct BatchNorm1d {
    pub gamma: Param,
    pub beta: Param,
    pub running_mean: Param,
    pub running_var: Param,
    pub eps: f64,
    pub momentum: f64,
    cache: Option<Cache>,
}

impl BatchNorm1d {
    pub fn new(channels: usize) -> Self {
        BatchNorm1d {
            gamma: Param::new(Tensor::filled(&[channels], 1.0)),
            beta: Param::new(Tensor::zeros(&[channels])),
            running_mean: Param::frozen(Tensor::zeros(&[channels])),
            running_var: Param::frozen(Tensor::filled(&[channels], 1.0)),
            eps: DEFAULT_EPS,
            momentum: DEFAULT_MOMENTUM,
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.value.len()
    }
}

impl Module for BatchNorm1d {
    fn params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Param)>) {
        out.push((join_name(prefix, "gamma"), &self.gamma));
        out.push((join_name(prefix, "beta"), &self.beta));
        out.push((join_name(prefix, "running_mean"), &self.running_mean));
        out.push((join_name(prefix, "running_var"), &self.running_var));
    }
    fn params_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Param)>) {
        out.push((join_name(prefix, "gamma"), &mut self.gamma));
        out.push((join_name(prefix, "beta"), &mut self.beta));
        out.push((join_name(prefix, "running_mean"), &mut self.running_mean));
        out.push((join_name(prefix, "running_var"), &mut self.running_var));
    }
}

impl Layer for BatchNorm1d {
    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor, NnError> {
        let (b, c, t) = x.dims3("batchnorm1d")?;
        if c != self.channels() {
            return Err(NnError::Shape {
                op: "batchnorm1d",
                detail: format!("input has {c} channels, layer has {}", self.channels()),
            });
        }
        let n = b * t;
        let xd = x.data();
        let (mean, var) = match mode {
            Mode::Train => {
                if n < 2 {
                    return Err(NnError::InvalidArgument(format!(
                        "batchnorm1d needs B·T ≥ 2 in train mode, got {n}"
                    )));
                }
                let mut mean = vec![0.0; c];
                let mut var = vec![0.0; c];
                for ch in 0..c {
                    let mut s = 0.0;
                    for bi in 0..b {
                        s += xd[(bi * c + ch) * t..][..t].iter().sum::<f64>();
                    }
                    let m = s / n as f64;
                    let mut ss = 0.0;
                    for bi in 0..b {
                        ss += xd[(bi * c + ch) * t..][..t]
                            .iter()
                            .map(|v| (v - m) * (v - m))
                            .sum::<f64>();
                    }
                    mean[ch] = m;
                    var[ch] = ss / n as f64;
                }
                let rm = self.running_mean.value.data_mut();
                let rv = self.running_var.value.data_mut();
                let unbias = n as f64 / (n - 1) as f64;
                for ch in 0..c {
                    rm[ch] = (1.0 - self.momentum) * rm[ch] + self.momentum * mean[ch];
                    rv[ch] = (1.0 - self.momentum) * rv[ch] + self.momentum * var[ch] * unbias;
                }
                (mean, var)
            }
            Mode::Eval => (
                self.running_mean.value.data().to_vec(),
                self.running_var.value.data().to_vec(),
            ),
        };
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + self.eps).sqrt()).collect();
        let mut xhat = Tensor::zeros(x.shape());
        let mut y = Tensor::zeros(x.shape());
        let g = self.gamma.value.data();
        let be = self.beta.value.data();
        {
            let xh = xhat.data_mut();
            let yd = y.data_mut();
            for bi in 0..b {
                for ch in 0..c {
                    let off = (bi * c + ch) * t;
                    for i in off..off + t {
                        let h = (xd[i] - mean[ch]) * inv_std[ch];
                        xh[i] = h;
                        yd[i] = g[ch] * h + be[ch];
                    }
                }
            }
        }
        self.cache = Some(match mode {
            Mode::Train => Cache::Train { xhat, inv_std },
            Mode::Eval => Cache::Eval { xhat, inv_std },
        });
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let cache = self.cache.take().ok_or(NnError::MissingCache("batchnorm1d"))?;
        let (xhat, inv_std, train) = match cache {
            Cache::Train { xhat, inv_std } => (xhat, inv_std, true),
            Cache::Eval { xhat, inv_std } => (xhat, inv_std, false),
        };
        grad_out.same_shape(&xhat, "batchnorm1d backward")?;
        let (b, c, t) = xhat.dims3("batchnorm1d")?;
        let n = (b * t) as f64;
        let dy = grad_out.data();
        let xh = xhat.data();
        let g = self.gamma.value.data().to_vec();
        let mut sum_dy = vec![0.0; c];
        let mut sum_dy_xh = vec![0.0; c];
        for bi in 0..b {
            for ch in 0..c {
                let off = (bi * c + ch) * t;
                for i in off..off + t {
                    sum_dy[ch] += dy[i];
                    sum_dy_xh[ch] += dy[i] * xh[i];
                }
            }
        }
        for ch in 0..c {
            self.gamma.grad.data_mut()[ch] += sum_dy_xh[ch];
            self.beta.grad.data_mut()[ch] += sum_dy[ch];
        }
        let mut dx = Tensor::zeros(xhat.shape());
        let dxd = dx.data_mut();
        for bi in 0..b {
            for ch in 0..c {
                let off = (bi * c + ch) * t;
                let scale = g[ch] * inv_std[ch];
                if train {
                    let m_dy = sum_dy[ch] / n;
                    let m_dy_xh = sum_dy_xh[ch] / n;
                    for i in off..off + t {
                        dxd[i] = scale * (dy[i] - m_dy - xh[i] * m_dy_xh);
                    }
                } else {
                    for i in off..off + t {
                        dxd[i] = scale * dy[i];
                    }
                }
            }
        }
        Ok(dx)
    }
}
