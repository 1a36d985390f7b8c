use rand::Rng;

use super::{
    impl_module, LeakyRelu, Layer, Linear, Mode, NnError, Sigmoid, Tensor,
};

/// Squeeze-and-excitation channel gate.
///
/// The temporal mean of each channel goes through a two-layer bottleneck
/// (`C → ⌈C/r⌉ → C`) and a sigmoid; the result rescales every channel.
#[derive(Clone, Debug)]
pub struct SeBlock {
    pub squeeze: Linear,
    pub act: LeakyRelu,
    pub excite: Linear,
    pub gate: Sigmoid,
    cache: Option<(Tensor, Tensor)>,
}

impl_module!(SeBlock { squeeze, excite });

impl SeBlock {
    pub fn new<R: Rng + ?Sized>(channels: usize, reduction: usize, slope: f64, rng: &mut R) -> Self {
        let hidden = Self::hidden_width(channels, reduction);
        SeBlock {
            squeeze: Linear::new(channels, hidden, rng),
            act: LeakyRelu::new(slope),
            excite: Linear::new(hidden, channels, rng),
            gate: Sigmoid::new(),
            cache: None,
        }
    }

    pub fn hidden_width(channels: usize, reduction: usize) -> usize {
        channels.div_ceil(reduction.max(1)).max(1)
    }

    /// Per-(batch, channel) gate values from the last forward pass.
    pub fn last_gate(&self) -> Option<&Tensor> {
        self.cache.as_ref().map(|(_, g)| g)
    }
}

impl Layer for SeBlock {
    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor, NnError> {
        let (b, c, t) = x.dims3("se_block")?;
        let pooled: Vec<f64> = x
            .data()
            .chunks(t)
            .map(|row| row.iter().sum::<f64>() / t as f64)
            .collect();
        let s = Tensor::from_vec(&[b, c], pooled)?;
        let z = self.squeeze.forward(&s, mode)?;
        let z = self.act.forward(&z, mode)?;
        let z = self.excite.forward(&z, mode)?;
        let g = self.gate.forward(&z, mode)?;
        let mut y = x.clone();
        for (row, &gv) in y.data_mut().chunks_mut(t).zip(g.data()) {
            for v in row {
                *v *= gv;
            }
        }
        self.cache = Some((x.clone(), g));
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let (x, g) = self.cache.take().ok_or(NnError::MissingCache("se_block"))?;
        grad_out.same_shape(&x, "se_block backward")?;
        let (b, c, t) = x.dims3("se_block")?;
        let mut dx = grad_out.clone();
        let mut dg = vec![0.0; b * c];
        for (i, ((dxr, xr), &gv)) in dx
            .data_mut()
            .chunks_mut(t)
            .zip(x.data().chunks(t))
            .zip(g.data())
            .enumerate()
        {
            dg[i] = dxr.iter().zip(xr).map(|(d, v)| d * v).sum();
            for d in dxr {
                *d *= gv;
            }
        }
        let dz = self.gate.backward(&Tensor::from_vec(&[b, c], dg)?)?;
        let dz = self.excite.backward(&dz)?;
        let dz = self.act.backward(&dz)?;
        let ds = self.squeeze.backward(&dz)?;
        for (dxr, &dsv) in dx.data_mut().chunks_mut(t).zip(ds.data()) {
            let add = dsv / t as f64;
            for d in dxr {
                *d += add;
            }
        }
        Ok(dx)
    }
}
