//! Temporal pooling and nearest-neighbour upsampling.

use super::{impl_stateless_module, Layer, Mode, NnError, Tensor};

fn pooled_len(t: usize, window: usize, stride: usize, op: &'static str) -> Result<usize, NnError> {
    if window == 0 || stride == 0 {
        return Err(NnError::InvalidArgument(format!("{op}: window and stride must be ≥ 1")));
    }
    if t < window {
        return Err(NnError::Shape {
            op,
            detail: format!("length {t} shorter than window {window}"),
        });
    }
    Ok((t - window) / stride + 1)
}

/// Max pool; returns the output and the flat input index of each maximum.
pub fn maxpool1d(x: &Tensor, window: usize, stride: usize) -> Result<(Tensor, Vec<usize>), NnError> {
    let (b, c, t) = x.dims3("maxpool1d")?;
    let to = pooled_len(t, window, stride, "maxpool1d")?;
    let mut y = Tensor::zeros(&[b, c, to]);
    let mut arg = vec![0; b * c * to];
    let xd = x.data();
    for row in 0..b * c {
        for o in 0..to {
            let start = row * t + o * stride;
            let mut best = start;
            for i in start + 1..start + window {
                if xd[i] > xd[best] {
                    best = i;
                }
            }
            y.data_mut()[row * to + o] = xd[best];
            arg[row * to + o] = best;
        }
    }
    Ok((y, arg))
}

pub fn avgpool1d(x: &Tensor, window: usize, stride: usize) -> Result<Tensor, NnError> {
    let (b, c, t) = x.dims3("avgpool1d")?;
    let to = pooled_len(t, window, stride, "avgpool1d")?;
    let mut y = Tensor::zeros(&[b, c, to]);
    let xd = x.data();
    let inv = 1.0 / window as f64;
    for row in 0..b * c {
        for o in 0..to {
            let start = row * t + o * stride;
            y.data_mut()[row * to + o] = xd[start..start + window].iter().sum::<f64>() * inv;
        }
    }
    Ok(y)
}

fn avgpool1d_backward(grad_out: &Tensor, t: usize, window: usize, stride: usize) -> Result<Tensor, NnError> {
    let (b, c, to) = grad_out.dims3("avgpool1d backward")?;
    let mut gx = Tensor::zeros(&[b, c, t]);
    let inv = 1.0 / window as f64;
    let gd = grad_out.data();
    for row in 0..b * c {
        for o in 0..to {
            let g = gd[row * to + o] * inv;
            let start = row * t + o * stride;
            for v in &mut gx.data_mut()[start..start + window] {
                *v += g;
            }
        }
    }
    Ok(gx)
}

/// Nearest-neighbour upsampling by an integer factor.
pub fn upsample1d(x: &Tensor, factor: usize) -> Result<Tensor, NnError> {
    if factor == 0 {
        return Err(NnError::InvalidArgument("upsample factor must be ≥ 1".into()));
    }
    let (b, c, t) = x.dims3("upsample1d")?;
    let mut y = Tensor::zeros(&[b, c, t * factor]);
    for (dst, &v) in y.data_mut().chunks_mut(factor).zip(x.data()) {
        dst.fill(v);
    }
    Ok(y)
}

fn upsample1d_backward(grad_out: &Tensor, factor: usize) -> Result<Tensor, NnError> {
    let (b, c, t) = grad_out.dims3("upsample1d backward")?;
    if t % factor != 0 {
        return Err(NnError::Shape {
            op: "upsample1d backward",
            detail: format!("length {t} not a multiple of {factor}"),
        });
    }
    let data = grad_out.data().chunks(factor).map(|c| c.iter().sum()).collect();
    Tensor::from_vec(&[b, c, t / factor], data)
}

#[derive(Clone, Debug)]
pub struct MaxPool1d {
    pub window: usize,
    pub stride: usize,
    cache: Option<(Vec<usize>, Vec<usize>)>,
}

impl MaxPool1d {
    pub fn new(window: usize, stride: usize) -> Self {
        MaxPool1d { window, stride, cache: None }
    }
}

impl_stateless_module!(MaxPool1d);

impl Layer for MaxPool1d {
    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor, NnError> {
        let (y, arg) = maxpool1d(x, self.window, self.stride)?;
        self.cache = Some((x.shape().to_vec(), arg));
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let (shape, arg) = self.cache.take().ok_or(NnError::MissingCache("maxpool1d"))?;
        if grad_out.len() != arg.len() {
            return Err(NnError::Shape {
                op: "maxpool1d backward",
                detail: format!("{} gradients for {} outputs", grad_out.len(), arg.len()),
            });
        }
        let mut gx = Tensor::zeros(&shape);
        for (&i, &g) in arg.iter().zip(grad_out.data()) {
            gx.data_mut()[i] += g;
        }
        Ok(gx)
    }
}

#[derive(Clone, Debug)]
pub struct AvgPool1d {
    pub window: usize,
    pub stride: usize,
    cache: Option<usize>,
}

impl AvgPool1d {
    pub fn new(window: usize, stride: usize) -> Self {
        AvgPool1d { window, stride, cache: None }
    }
}

impl_stateless_module!(AvgPool1d);

impl Layer for AvgPool1d {
    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor, NnError> {
        let y = avgpool1d(x, self.window, self.stride)?;
        self.cache = Some(x.shape()[2]);
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let t = self.cache.take().ok_or(NnError::MissingCache("avgpool1d"))?;
        avgpool1d_backward(grad_out, t, self.window, self.stride)
    }
}

#[derive(Clone, Debug)]
pub struct Upsample1d {
    pub factor: usize,
    cached: bool,
}

impl Upsample1d {
    pub fn new(factor: usize) -> Self {
        Upsample1d { factor, cached: false }
    }
}

impl_stateless_module!(Upsample1d);

impl Layer for Upsample1d {
    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor, NnError> {
        let y = upsample1d(x, self.factor)?;
        self.cached = true;
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        if !std::mem::take(&mut self.cached) {
            return Err(NnError::MissingCache("upsample1d"));
        }
        upsample1d_backward(grad_out, self.factor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(v: &[f64]) -> Tensor {
        Tensor::from_vec(&[1, 1, v.len()], v.to_vec()).unwrap()
    }

    #[test]
    fn avgpool_whole_window() {
        let y = avgpool1d(&row(&[1., 2., 3., 4., 5., 6., 7., 8.]), 8, 8).unwrap();
        assert_eq!(y.data(), &[4.5]);
    }

    #[test]
    fn upsample_nearest() {
        let y = upsample1d(&row(&[1., 2.]), 4).unwrap();
        assert_eq!(y.data(), &[1., 1., 1., 1., 2., 2., 2., 2.]);
    }

    #[test]
    fn maxpool_routes_gradient_to_argmax() {
        let mut p = MaxPool1d::new(2, 2);
        let y = p.forward(&row(&[1., 3., 5., 2.]), Mode::Train).unwrap();
        assert_eq!(y.data(), &[3., 5.]);
        let g = p.backward(&row(&[10., 20.])).unwrap();
        assert_eq!(g.data(), &[0., 10., 20., 0.]);
    }

    #[test]
    fn window_longer_than_input_is_an_error() {
        assert!(avgpool1d(&row(&[1., 2.]), 4, 4).is_err());
        assert!(maxpool1d(&row(&[1., 2.]), 4, 4).is_err());
    }
}
