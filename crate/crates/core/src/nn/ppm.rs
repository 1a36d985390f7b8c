use rand::Rng;

use super::{
    concat_channels, join_name, split_channels, AvgPool1d, Conv1d, Layer, Mode, Module, NnError,
    Param, Tensor, Upsample1d,
};

/// Number of pooling scales; the windows are `T`, `T/2` and `T/4`.
pub const PPM_LEVELS: usize = 3;

#[derive(Clone, Debug)]
struct Level {
    pool: AvgPool1d,
    reduce: Conv1d,
    up: Upsample1d,
}

/// Pyramid pooling over the temporal axis.
///
/// For an input of length `T` (a multiple of 8), three average pools with
/// window = stride = `T`, `T/2`, `T/4` produce lengths 1, 2 and 4. Each is
/// reduced to `reduce` channels by a 1×1 convolution, upsampled back to `T`,
/// and concatenated after the untouched input.
#[derive(Clone, Debug)]
pub struct PpmBlock {
    levels: Vec<Level>,
    in_channels: usize,
    length: usize,
}

impl PpmBlock {
    pub fn new<R: Rng + ?Sized>(
        in_channels: usize,
        reduce: usize,
        length: usize,
        rng: &mut R,
    ) -> Result<Self, NnError> {
        Self::check_length(length)?;
        let levels = (0..PPM_LEVELS)
            .map(|i| {
                let window = length >> i;
                Level {
                    pool: AvgPool1d::new(window, window),
                    reduce: Conv1d::new(in_channels, reduce, 1, 1, 0, rng),
                    up: Upsample1d::new(window),
                }
            })
            .collect();
        Ok(PpmBlock {
            levels,
            in_channels,
            length,
        })
    }

    fn check_length(t: usize) -> Result<(), NnError> {
        if t == 0 || !t.is_multiple_of(8) {
            return Err(NnError::Shape {
                op: "ppm_block",
                detail: format!("temporal length {t} is not a multiple of 8"),
            });
        }
        Ok(())
    }

    pub fn out_channels(&self) -> usize {
        self.in_channels + self.levels.iter().map(|l| l.reduce.out_channels()).sum::<usize>()
    }

    /// The 1×1 reduction convolutions, coarsest first.
    pub fn reductions_mut(&mut self) -> impl Iterator<Item = &mut Conv1d> {
        self.levels.iter_mut().map(|l| &mut l.reduce)
    }

    fn widths(&self) -> Vec<usize> {
        std::iter::once(self.in_channels)
            .chain(self.levels.iter().map(|l| l.reduce.out_channels()))
            .collect()
    }
}

impl Module for PpmBlock {
    fn params<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Param)>) {
        for (i, l) in self.levels.iter().enumerate() {
            l.reduce.params(&join_name(prefix, &format!("level{i}")), out);
        }
    }
    fn params_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Param)>) {
        for (i, l) in self.levels.iter_mut().enumerate() {
            l.reduce.params_mut(&join_name(prefix, &format!("level{i}")), out);
        }
    }
}

impl Layer for PpmBlock {
    fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor, NnError> {
        let (_, c, t) = x.dims3("ppm_block")?;
        Self::check_length(t)?;
        if c != self.in_channels || t != self.length {
            return Err(NnError::Shape {
                op: "ppm_block",
                detail: format!(
                    "input (C={c}, T={t}), block built for (C={}, T={})",
                    self.in_channels, self.length
                ),
            });
        }
        let mut outs = Vec::with_capacity(PPM_LEVELS);
        for l in &mut self.levels {
            let p = l.pool.forward(x, mode)?;
            let r = l.reduce.forward(&p, mode)?;
            outs.push(l.up.forward(&r, mode)?);
        }
        let mut parts: Vec<&Tensor> = vec![x];
        parts.extend(outs.iter());
        concat_channels(&parts)
    }

    fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor, NnError> {
        let widths = self.widths();
        let mut parts = split_channels(grad_out, &widths)?.into_iter();
        let mut gx = parts.next().expect("split yields the identity part");
        for (l, g) in self.levels.iter_mut().zip(parts) {
            let g = l.up.backward(&g)?;
            let g = l.reduce.backward(&g)?;
            gx.add_assign(&l.pool.backward(&g)?);
        }
        Ok(gx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn widens_64_to_112_channels() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ppm = PpmBlock::new(64, 16, 8, &mut rng).unwrap();
        let x = Tensor::uniform(&[3, 64, 8], 1.0, &mut rng);
        let y = ppm.forward(&x, Mode::Train).unwrap();
        assert_eq!(y.shape(), &[3, 112, 8]);
        assert_eq!(ppm.out_channels(), 112);
    }

    #[test]
    fn constant_input_passes_through_and_pools_flat() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut ppm = PpmBlock::new(4, 2, 8, &mut rng).unwrap();
        let x = Tensor::filled(&[1, 4, 8], 2.5);
        let y = ppm.forward(&x, Mode::Eval).unwrap();
        assert_eq!(&y.data()[..32], x.data());
        // each reduced channel is constant across time because every pool saw c
        for ch in 4..10 {
            let row = &y.data()[ch * 8..][..8];
            assert!(row.iter().all(|&v| v == row[0]));
        }
    }

    #[test]
    fn rejects_length_not_multiple_of_8() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!(PpmBlock::new(4, 2, 12, &mut rng).is_err());
        let mut ppm = PpmBlock::new(4, 2, 8, &mut rng).unwrap();
        assert!(ppm.forward(&Tensor::zeros(&[1, 4, 12]), Mode::Eval).is_err());
    }
}
