//! 1D cross-correlation lowered onto GEMM through an im2col buffer.
//!
//! The batch is split into fixed-size chunks; each chunk is one GEMM. Chunk
//! boundaries do not depend on the thread count, and weight gradients are
//! summed chunk by chunk in order, so results are bit-identical between the
//! parallel and sequential paths.

use rand::Rng;

use super::{he_uniform_bound, Layer, Mode, Module, NnError, Param, Tensor};
use crate::par;

const CHUNK: usize = 16;

/// `c = a·b + beta·c` for row-major-ish operands described by strides.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_strides: (isize, isize),
    b: &[f64],
    b_strides: (isize, isize),
    beta: f64,
    c: &mut [f64],
    c_strides: (isize, isize),
) {
    let reach = |rows: usize, cols: usize, (rs, cs): (isize, isize)| {
        if rows == 0 || cols == 0 {
            0
        } else {
            (rows - 1) * rs as usize + (cols - 1) * cs as usize + 1
        }
    };
    assert!(reach(m, k, a_strides) <= a.len());
    assert!(reach(k, n, b_strides) <= b.len());
    assert!(reach(m, n, c_strides) <= c.len());
    // SAFETY: the asserts above bound every index the kernel touches.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            a_strides.0,
            a_strides.1,
            b.as_ptr(),
            b_strides.0,
            b_strides.1,
            beta,
            c.as_mut_ptr(),
            c_strides.0,
            c_strides.1,
        );
    }
}

#[derive(Clone, Copy, Debug)]
struct Geometry {
    batch: usize,
    cin: usize,
    t_in: usize,
    cout: usize,
    k: usize,
    t_out: usize,
    stride: usize,
    pad: usize,
}

impl Geometry {
    fn new(x: &Tensor, w: &Tensor, stride: usize, pad: usize) -> Result<Self, NnError> {
        let (batch, cin, t_in) = x.dims3("conv1d")?;
        let (cout, wcin, k) = w.dims3("conv1d")?;
        if wcin != cin {
            return Err(NnError::Shape {
                op: "conv1d",
                detail: format!("input has {cin} channels, weight expects {wcin}"),
            });
        }
        if stride == 0 {
            return Err(NnError::InvalidArgument("conv1d stride must be ≥ 1".into()));
        }
        if t_in + 2 * pad < k {
            return Err(NnError::Shape {
                op: "conv1d",
                detail: format!("padded length {} shorter than kernel {k}", t_in + 2 * pad),
            });
        }
        let t_out = (t_in + 2 * pad - k) / stride + 1;
        Ok(Geometry {
            batch,
            cin,
            t_in,
            cout,
            k,
            t_out,
            stride,
            pad,
        })
    }

    fn rows(&self) -> usize {
        self.cin * self.k
    }

    /// Fills `col` (rows × n·t_out) for batch items `b0..b0+n`.
    fn im2col(&self, x: &[f64], b0: usize, n: usize, col: &mut [f64]) {
        let cols = n * self.t_out;
        col.fill(0.0);
        for bl in 0..n {
            let xb = &x[(b0 + bl) * self.cin * self.t_in..][..self.cin * self.t_in];
            for ci in 0..self.cin {
                let xrow = &xb[ci * self.t_in..][..self.t_in];
                for kk in 0..self.k {
                    let dst = &mut col[(ci * self.k + kk) * cols + bl * self.t_out..][..self.t_out];
                    for (t, d) in dst.iter_mut().enumerate() {
                        let src = (t * self.stride + kk) as isize - self.pad as isize;
                        if src >= 0 && (src as usize) < self.t_in {
                            *d = xrow[src as usize];
                        }
                    }
                }
            }
        }
    }

    /// Scatter-adds `col` back into the input-gradient chunk.
    fn col2im(&self, col: &[f64], n: usize, gx: &mut [f64]) {
        let cols = n * self.t_out;
        for bl in 0..n {
            let gb = &mut gx[bl * self.cin * self.t_in..][..self.cin * self.t_in];
            for ci in 0..self.cin {
                let grow = &mut gb[ci * self.t_in..][..self.t_in];
                for kk in 0..self.k {
                    let src = &col[(ci * self.k + kk) * cols + bl * self.t_out..][..self.t_out];
                    for (t, &v) in src.iter().enumerate() {
                        let dst = (t * self.stride + kk) as isize - self.pad as isize;
                        if dst >= 0 && (dst as usize) < self.t_in {
                            grow[dst as usize] += v;
                        }
                    }
                }
            }
        }
    }

    fn chunks(&self) -> usize {
        self.batch.div_ceil(CHUNK)
    }

    fn chunk_span(&self, i: usize) -> (usize, usize) {
        let b0 = i * CHUNK;
        (b0, CHUNK.min(self.batch - b0))
    }
}

/// Zero-padded cross-correlation: `x (B,Cin,T)`, `w (Cout,Cin,K)`, `b (Cout)`.
pub fn conv1d_forward(
    x: &Tensor,
    w: &Tensor,
    b: &Tensor,
    stride: usize,
    pad: usize,
) -> Result<Tensor, NnError> {
    let g = Geometry::new(x, w, stride, pad)?;
    if b.shape() != [g.cout] {
        return Err(NnError::Shape {
            op: "conv1d",
            detail: format!("bias shape {:?}, expected [{}]", b.shape(), g.cout),
        });
    }
    let mut out = Tensor::zeros(&[g.batch, g.cout, g.t_out]);
    if g.batch == 0 {
        return Ok(out);
    }
    let per_item = g.cout * g.t_out;
    let xd = x.data();
    let wd = w.data();
    let bd = b.data();
    par::for_each_chunk_mut(out.data_mut(), CHUNK * per_item, |ci, dst| {
        let (b0, n) = g.chunk_span(ci);
        let cols = n * g.t_out;
        let mut col = vec![0.0; g.rows() * cols];
        g.im2col(xd, b0, n, &mut col);
        let mut tmp = vec![0.0; g.cout * cols];
        gemm(
            g.cout,
            g.rows(),
            cols,
            wd,
            (g.rows() as isize, 1),
            &col,
            (cols as isize, 1),
            0.0,
            &mut tmp,
            (cols as isize, 1),
        );
        for bl in 0..n {
            for co in 0..g.cout {
                let src = &tmp[co * cols + bl * g.t_out..][..g.t_out];
                let d = &mut dst[(bl * g.cout + co) * g.t_out..][..g.t_out];
                for (o, &s) in d.iter_mut().zip(src) {
                    *o = s + bd[co];
                }
            }
        }
    });
    Ok(out)
}

/// Gradients of [`conv1d_forward`]: returns `(grad_x, grad_w, grad_b)`.
pub fn conv1d_backward(
    grad_out: &Tensor,
    x: &Tensor,
    w: &Tensor,
    stride: usize,
    pad: usize,
) -> Result<(Tensor, Tensor, Tensor), NnError> {
    let g = Geometry::new(x, w, stride, pad)?;
    if grad_out.shape() != [g.batch, g.cout, g.t_out] {
        return Err(NnError::Shape {
            op: "conv1d backward",
            detail: format!(
                "grad_out {:?}, expected {:?}",
                grad_out.shape(),
                [g.batch, g.cout, g.t_out]
            ),
        });
    }
    let xd = x.data();
    let wd = w.data();
    let god = grad_out.data();
    let partials = par::map_range(g.chunks(), |ci| {
        let (b0, n) = g.chunk_span(ci);
        let cols = n * g.t_out;
        let mut go = vec![0.0; g.cout * cols];
        let mut gb = vec![0.0; g.cout];
        for bl in 0..n {
            for co in 0..g.cout {
                let src = &god[((b0 + bl) * g.cout + co) * g.t_out..][..g.t_out];
                go[co * cols + bl * g.t_out..][..g.t_out].copy_from_slice(src);
                gb[co] += src.iter().sum::<f64>();
            }
        }
        let mut col = vec![0.0; g.rows() * cols];
        g.im2col(xd, b0, n, &mut col);
        let mut gw = vec![0.0; g.cout * g.rows()];
        gemm(
            g.cout,
            cols,
            g.rows(),
            &go,
            (cols as isize, 1),
            &col,
            (1, cols as isize),
            0.0,
            &mut gw,
            (g.rows() as isize, 1),
        );
        gemm(
            g.rows(),
            g.cout,
            cols,
            wd,
            (1, g.rows() as isize),
            &go,
            (cols as isize, 1),
            0.0,
            &mut col,
            (cols as isize, 1),
        );
        let mut gx = vec![0.0; n * g.cin * g.t_in];
        g.col2im(&col, n, &mut gx);
        (gx, gw, gb)
    });
    let mut grad_x = Vec::with_capacity(x.len());
    let mut grad_w = Tensor::zeros(w.shape());
    let mut grad_b = Tensor::zeros(&[g.cout]);
    for (gx, gw, gb) in partials {
        grad_x.extend_from_slice(&gx);
        for (a, v) in grad_w.data_mut().iter_mut().zip(&gw) {
            *a += v;
        }
        for (a, v) in grad_b.data_mut().iter_mut().zip(&gb) {
            *a += v;
        }
    }
    Ok((Tensor::from_vec(x.shape(), grad_x)?, grad_w, grad_b))
}

/// Convolution layer with weight `(Cout, Cin, K)` and bias `(Cout)`.
#[derive(Clone, Debug)]
pub struct Conv1d {
    pub weight: Param,
    pub bias: Param,
    pub stride: usize,
    pub pad: usize,
    cache: Option<Tensor>,
}

impl Conv1d {
    /// Fan-in scaled uniform weights, zero bias.
    pub fn new<R: Rng + ?Sized>(
        cin: usize,
        cout: usize,
        kernel: usize,
        stride: usize,
        pad: usize,
        rng: &mut R,
    ) -> Self {
        let bound = he_uniform_bound(cin * kernel);
        Self::from_params(
            Tensor::uniform(&[cout, cin, kernel], bound, rng),
            Tensor::zeros(&[cout]),
            stride,
            pad,
        )
    }

    pub fn from_params(weight: Tensor, bias: Tensor, stride: usize, pad: usize) -> Self {
        Conv1d {
            weight: Param::new(weight),
            bias: Param::new(bias),
            stride,
            pad,
            cache: None,
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weight.value.shape()[0]
    }
}

impl Module for Conv1d {
    fn params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Param)>) {
        self.weight.params(&super::join_name(prefix, "weight"), out);
        self.bias.params(&super::join_name(prefix, "bias"), out);
    }
    fn params_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Param)>) {
        self.weight.params_mut(&super::join_name(prefix, "weight"), out);
        self.bias.params_mut(&super::join_name(prefix, "bias"), out);
    }
}

impl Layer for Conv1d {
    fn forward(&mut self, x: &Tensor, _mode: Mode) -> Result<Tensor, NnError> {
        let y = conv1d_forward(x, &self.weight.value, &self.bias.value, self.stride, self.pad)?;
        self.cache = Some(x.clone());
        Ok(y)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let x = self.cache.take().ok_or(NnError::MissingCache("conv1d"))?;
        let (gx, gw, gb) =
            conv1d_backward(grad_out, &x, &self.weight.value, self.stride, self.pad)?;
        self.weight.grad.add_assign(&gw);
        self.bias.grad.add_assign(&gb);
        Ok(gx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn t(shape: &[usize], v: &[f64]) -> Tensor {
        Tensor::from_vec(shape, v.to_vec()).unwrap()
    }

    #[test]
    fn difference_kernel_example() {
        let x = t(&[1, 1, 4], &[1., 2., 3., 4.]);
        let w = t(&[1, 1, 3], &[1., 0., -1.]);
        let y = conv1d_forward(&x, &w, &Tensor::zeros(&[1]), 1, 1).unwrap();
        assert_eq!(y.data(), &[-2., -2., -2., 3.]);
    }

    #[test]
    fn identity_kernel_reproduces_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Tensor::uniform(&[3, 2, 9], 1.0, &mut rng);
        let mut w = Tensor::zeros(&[2, 2, 3]);
        w.data_mut()[1] = 1.0; // out 0 <- in 0
        w.data_mut()[2 * 3 + 3 + 1] = 1.0; // out 1 <- in 1
        let y = conv1d_forward(&x, &w, &Tensor::zeros(&[2]), 1, 1).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn output_length_formula() {
        let x = Tensor::zeros(&[1, 1, 10]);
        let w = Tensor::zeros(&[1, 1, 3]);
        let y = conv1d_forward(&x, &w, &Tensor::zeros(&[1]), 2, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 4]);
    }

    #[test]
    fn channel_mismatch_is_an_error() {
        let x = Tensor::zeros(&[1, 2, 8]);
        let w = Tensor::zeros(&[1, 3, 3]);
        assert!(matches!(
            conv1d_forward(&x, &w, &Tensor::zeros(&[1]), 1, 1),
            Err(NnError::Shape { .. })
        ));
    }

    #[test]
    fn backward_without_forward_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut c = Conv1d::new(1, 1, 3, 1, 1, &mut rng);
        assert_eq!(
            c.backward(&Tensor::zeros(&[1, 1, 4])),
            Err(NnError::MissingCache("conv1d"))
        );
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Tensor::uniform(&[2, 3, 16], 1.0, &mut rng);
        let w = Tensor::uniform(&[4, 3, 3], 1.0, &mut rng);
        let (gx, gw, gb) =
            conv1d_backward(&Tensor::zeros(&[2, 4, 16]), &x, &w, 1, 1).unwrap();
        assert!(gx.data().iter().chain(gw.data()).chain(gb.data()).all(|&v| v == 0.0));
    }

    #[test]
    fn batch_gradient_is_sum_of_per_example_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Tensor::uniform(&[2, 3, 16], 1.0, &mut rng);
        let w = Tensor::uniform(&[4, 3, 3], 1.0, &mut rng);
        let go = Tensor::uniform(&[2, 4, 16], 1.0, &mut rng);
        let (_, gw, gb) = conv1d_backward(&go, &x, &w, 1, 1).unwrap();
        let (_, gw0, gb0) = conv1d_backward(&go.batch_item(0), &x.batch_item(0), &w, 1, 1).unwrap();
        let (_, gw1, gb1) = conv1d_backward(&go.batch_item(1), &x.batch_item(1), &w, 1, 1).unwrap();
        for i in 0..gw.len() {
            assert!((gw.data()[i] - gw0.data()[i] - gw1.data()[i]).abs() < 1e-12);
        }
        for i in 0..gb.len() {
            assert!((gb.data()[i] - gb0.data()[i] - gb1.data()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn sequential_and_parallel_paths_agree_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Tensor::uniform(&[37, 5, 20], 1.0, &mut rng);
        let w = Tensor::uniform(&[6, 5, 3], 1.0, &mut rng);
        let b = Tensor::uniform(&[6], 1.0, &mut rng);
        let go = Tensor::uniform(&[37, 6, 20], 1.0, &mut rng);
        let y1 = conv1d_forward(&x, &w, &b, 1, 1).unwrap();
        let y2 = par::sequential(|| conv1d_forward(&x, &w, &b, 1, 1).unwrap());
        assert_eq!(y1, y2);
        let g1 = conv1d_backward(&go, &x, &w, 1, 1).unwrap();
        let g2 = par::sequential(|| conv1d_backward(&go, &x, &w, 1, 1).unwrap());
        assert_eq!(g1, g2);
    }
}
