use super::{impl_stateless_module, Layer, Mode, NnError, Tensor};

pub const DEFAULT_LEAKY_SLOPE: f64 = 0.01;

pub fn leaky_relu(x: &Tensor, slope: f64) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { slope * v })
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(sigmoid_scalar)
}

pub(crate) fn sigmoid_scalar(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

#[derive(Clone, Debug)]
pub struct LeakyRelu {
    pub slope: f64,
    cache: Option<Tensor>,
}

impl LeakyRelu {
    pub fn new(slope: f64) -> Self {
        LeakyRelu { slope, cache: None }
    }
}

impl_stateless_module!(LeakyRelu);

impl Layer for LeakyRelu {
    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor, NnError> {
        self.cache = Some(x.clone());
        Ok(leaky_relu(x, self.slope))
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let x = self.cache.take().ok_or(NnError::MissingCache("leaky_relu"))?;
        grad_out.same_shape(&x, "leaky_relu backward")?;
        let mut g = grad_out.clone();
        for (gv, &xv) in g.data_mut().iter_mut().zip(x.data()) {
            if xv <= 0.0 {
                *gv *= self.slope;
            }
        }
        Ok(g)
    }
}

#[derive(Clone, Debug, Default)]
pub struct Sigmoid {
    cache: Option<Tensor>,
}

impl Sigmoid {
    pub fn new() -> Self {
        Self::default()
    }
}

impl_stateless_module!(Sigmoid);

impl Layer for Sigmoid {
    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor, NnError> {
        let y = sigmoid(x);
        self.cache = Some(y.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let y = self.cache.take().ok_or(NnError::MissingCache("sigmoid"))?;
        grad_out.same_shape(&y, "sigmoid backward")?;
        let mut g = grad_out.clone();
        for (gv, &yv) in g.data_mut().iter_mut().zip(y.data()) {
            *gv *= yv * (1.0 - yv);
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leaky_relu_definition() {
        let x = Tensor::from_vec(&[2], vec![-1.0, 2.0]).unwrap();
        let y = leaky_relu(&x, 0.01);
        assert_eq!(y.data(), &[-0.01, 2.0]);
    }

    #[test]
    fn sigmoid_is_stable_at_extremes() {
        let x = Tensor::from_vec(&[3], vec![-800.0, 0.0, 800.0]).unwrap();
        let y = sigmoid(&x);
        assert_eq!(y.data(), &[0.0, 0.5, 1.0]);
    }
}
