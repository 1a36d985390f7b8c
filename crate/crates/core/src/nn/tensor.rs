use rand::Rng;

use super::NnError;

/// Dense row-major array of rank ≤ 3 holding 64-bit values.
///
/// Rank-3 tensors are laid out as `(batch, channels, time)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        assert!(shape.len() <= 3, "tensor rank must be ≤ 3");
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let mut t = Self::zeros(shape);
        t.data.fill(value);
        t
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self, NnError> {
        if shape.len() > 3 {
            return Err(NnError::InvalidArgument(format!(
                "tensor rank {} exceeds 3",
                shape.len()
            )));
        }
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(NnError::Shape {
                op: "tensor",
                detail: format!("shape {shape:?} needs {n} values, got {}", data.len()),
            });
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Uniform values in `[-bound, bound]`.
    pub fn uniform<R: Rng + ?Sized>(shape: &[usize], bound: f64, rng: &mut R) -> Self {
        let mut t = Self::zeros(shape);
        for v in &mut t.data {
            *v = rng.random_range(-bound..=bound);
        }
        t
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// `(batch, channels, time)` of a rank-3 tensor.
    pub fn dims3(&self, op: &'static str) -> Result<(usize, usize, usize), NnError> {
        match self.shape[..] {
            [b, c, t] => Ok((b, c, t)),
            _ => Err(NnError::Shape {
                op,
                detail: format!("expected rank-3 (B,C,T), got {:?}", self.shape),
            }),
        }
    }

    pub fn dims2(&self, op: &'static str) -> Result<(usize, usize), NnError> {
        match self.shape[..] {
            [b, f] => Ok((b, f)),
            _ => Err(NnError::Shape {
                op,
                detail: format!("expected rank-2 (B,F), got {:?}", self.shape),
            }),
        }
    }

    pub fn at3(&self, b: usize, c: usize, t: usize) -> f64 {
        let (_, cs, ts) = (self.shape[0], self.shape[1], self.shape[2]);
        self.data[(b * cs + c) * ts + t]
    }

    pub fn same_shape(&self, other: &Tensor, op: &'static str) -> Result<(), NnError> {
        if self.shape != other.shape {
            return Err(NnError::Shape {
                op,
                detail: format!("shape {:?} vs {:?}", self.shape, other.shape),
            });
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Errors with [`NnError::NonFinite`] if any value is NaN or infinite.
    pub fn check_finite(&self, op: &'static str) -> Result<(), NnError> {
        if self.all_finite() {
            Ok(())
        } else {
            Err(NnError::NonFinite(op))
        }
    }

    pub fn fill(&mut self, value: f64) {
        self.data.fill(value);
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        debug_assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn dot(&self, other: &Tensor) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    /// Copy of batch item `b` as a `(1, C, T)` tensor.
    pub fn batch_item(&self, b: usize) -> Tensor {
        let per: usize = self.shape[1..].iter().product();
        let mut shape = self.shape.clone();
        shape[0] = 1;
        Tensor {
            shape,
            data: self.data[b * per..(b + 1) * per].to_vec(),
        }
    }

    /// Stacks tensors along the batch axis.
    pub fn stack(items: &[Tensor]) -> Result<Tensor, NnError> {
        let first = items
            .first()
            .ok_or_else(|| NnError::InvalidArgument("stack of zero tensors".into()))?;
        let mut shape = first.shape.clone();
        let mut data = Vec::with_capacity(first.len() * items.len());
        let mut batch = 0;
        for t in items {
            if t.shape[1..] != first.shape[1..] {
                return Err(NnError::Shape {
                    op: "stack",
                    detail: format!("{:?} vs {:?}", t.shape, first.shape),
                });
            }
            batch += t.shape[0];
            data.extend_from_slice(&t.data);
        }
        shape[0] = batch;
        Ok(Tensor { shape, data })
    }

    /// Rounds every value to the nearest 32-bit float.
    pub fn round_to_f32(&mut self) {
        for v in &mut self.data {
            *v = *v as f32 as f64;
        }
    }
}
