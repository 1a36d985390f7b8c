use rand::Rng;

use super::{he_uniform_bound, join_name, Layer, Mode, Module, NnError, Param, Tensor};

/// Dense map `y = x·Wᵀ + b` on `(B, in)` inputs, weight `(out, in)`.
#[derive(Clone, Debug)]
pub struct Linear {
    pub weight: Param,
    pub bias: Param,
    cache: Option<Tensor>,
}

impl Linear {
    pub fn new<R: Rng + ?Sized>(inputs: usize, outputs: usize, rng: &mut R) -> Self {
        let w = Tensor::uniform(&[outputs, inputs], he_uniform_bound(inputs), rng);
        Self::from_params(w, Tensor::zeros(&[outputs]))
    }

    pub fn from_params(weight: Tensor, bias: Tensor) -> Self {
        Linear {
            weight: Param::new(weight),
            bias: Param::new(bias),
            cache: None,
        }
    }

    fn dims(&self) -> (usize, usize) {
        let s = self.weight.value.shape();
        (s[0], s[1])
    }
}

impl Module for Linear {
    fn params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Param)>) {
        out.push((join_name(prefix, "weight"), &self.weight));
        out.push((join_name(prefix, "bias"), &self.bias));
    }
    fn params_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Param)>) {
        out.push((join_name(prefix, "weight"), &mut self.weight));
        out.push((join_name(prefix, "bias"), &mut self.bias));
    }
}

impl Layer for Linear {
    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor, NnError> {
        let (b, fin) = x.dims2("linear")?;
        let (fout, win) = self.dims();
        if fin != win {
            return Err(NnError::Shape {
                op: "linear",
                detail: format!("input width {fin}, weight expects {win}"),
            });
        }
        let w = self.weight.value.data();
        let bias = self.bias.value.data();
        let xd = x.data();
        let mut y = Tensor::zeros(&[b, fout]);
        for bi in 0..b {
            let xr = &xd[bi * fin..][..fin];
            for o in 0..fout {
                let wr = &w[o * fin..][..fin];
                y.data_mut()[bi * fout + o] =
                    bias[o] + wr.iter().zip(xr).map(|(a, c)| a * c).sum::<f64>();
            }
        }
        self.cache = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let x = self.cache.take().ok_or(NnError::MissingCache("linear"))?;
        let (b, fin) = x.dims2("linear")?;
        let (fout, _) = self.dims();
        if grad_out.shape() != [b, fout] {
            return Err(NnError::Shape {
                op: "linear backward",
                detail: format!("grad_out {:?}, expected {:?}", grad_out.shape(), [b, fout]),
            });
        }
        let g = grad_out.data();
        let xd = x.data();
        let w = self.weight.value.data().to_vec();
        let mut gx = Tensor::zeros(&[b, fin]);
        for bi in 0..b {
            for o in 0..fout {
                let go = g[bi * fout + o];
                self.bias.grad.data_mut()[o] += go;
                let gw = &mut self.weight.grad.data_mut()[o * fin..][..fin];
                for (a, &xv) in gw.iter_mut().zip(&xd[bi * fin..][..fin]) {
                    *a += go * xv;
                }
                let gxr = &mut gx.data_mut()[bi * fin..][..fin];
                for (a, &wv) in gxr.iter_mut().zip(&w[o * fin..][..fin]) {
                    *a += go * wv;
                }
            }
        }
        Ok(gx)
    }
}
