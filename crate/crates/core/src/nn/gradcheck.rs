//! Central finite-difference checks of hand-written backward passes.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Layer, Mode, NnError, Param, Tensor};

/// A differentiable computation ending in a scalar.
///
/// Slots are addressed by index so the checker can perturb one while the
/// fragment re-evaluates the loss.
pub trait Fragment {
    fn slot_names(&mut self) -> Vec<String>;
    fn slot_mut(&mut self, index: usize) -> &mut Param;
    fn loss(&mut self) -> Result<f64, NnError>;
    /// Zeroes all gradients, then runs forward and backward.
    fn loss_and_grad(&mut self) -> Result<f64, NnError>;
}

#[derive(Clone, Copy, Debug)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Check at most this many entries per slot (chosen at random); `None`
    /// checks every entry.
    pub max_entries_per_slot: Option<usize>,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-5,
            max_entries_per_slot: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlotReport {
    pub name: String,
    pub checked: usize,
    pub max_abs_err: f64,
    /// Largest analytic or numeric gradient magnitude among the checked
    /// entries.
    pub scale: f64,
    /// `max_abs_err` divided by the largest gradient magnitude seen anywhere
    /// in the fragment, so slots whose true gradient is zero (a bias feeding
    /// batch norm) are judged against the fragment's gradient scale rather
    /// than their own round-off.
    pub max_rel_err: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct GradCheckReport {
    pub slots: Vec<SlotReport>,
}

impl GradCheckReport {
    pub fn max_rel_err(&self) -> f64 {
        self.slots.iter().map(|s| s.max_rel_err).fold(0.0, f64::max)
    }

    pub fn passes(&self, tolerance: f64) -> bool {
        self.slots.iter().all(|s| s.max_rel_err < tolerance)
    }

    pub fn failures(&self, tolerance: f64) -> Vec<&SlotReport> {
        self.slots.iter().filter(|s| !(s.max_rel_err < tolerance)).collect()
    }
}

/// Compares analytic gradients of every trainable slot with central
/// differences. Frozen slots are skipped and do not appear in the report.
pub fn grad_check<F: Fragment + ?Sized>(
    fragment: &mut F,
    options: GradCheckOptions,
) -> Result<GradCheckReport, NnError> {
    fragment.loss_and_grad()?;
    let names = fragment.slot_names();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut report = GradCheckReport::default();
    for (i, name) in names.into_iter().enumerate() {
        let (analytic, n) = {
            let p = fragment.slot_mut(i);
            if !p.trainable {
                continue;
            }
            (p.grad.clone(), p.value.len())
        };
        let entries: Vec<usize> = match options.max_entries_per_slot {
            Some(k) if k < n => {
                let mut e = sample(&mut rng, n, k).into_vec();
                e.sort_unstable();
                e
            }
            _ => (0..n).collect(),
        };
        let mut max_abs = 0.0f64;
        let mut scale = 0.0f64;
        for &j in &entries {
            let orig = fragment.slot_mut(i).value.data()[j];
            fragment.slot_mut(i).value.data_mut()[j] = orig + options.step;
            let plus = fragment.loss()?;
            fragment.slot_mut(i).value.data_mut()[j] = orig - options.step;
            let minus = fragment.loss()?;
            fragment.slot_mut(i).value.data_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * options.step);
            let a = analytic.data()[j];
            max_abs = max_abs.max((a - numeric).abs());
            scale = scale.max(a.abs()).max(numeric.abs());
        }
        report.slots.push(SlotReport {
            name,
            checked: entries.len(),
            max_abs_err: max_abs,
            scale,
            max_rel_err: 0.0,
        });
    }
    let scale = report.slots.iter().map(|s| s.scale).fold(0.0, f64::max);
    if scale > 0.0 {
        for s in &mut report.slots {
            s.max_rel_err = s.max_abs_err / scale;
        }
    }
    Ok(report)
}

/// `loss = Σ probe ⊙ layer(input)`, exposing the input as slot `input`.
pub struct LayerFragment<L: Layer> {
    pub layer: L,
    pub input: Param,
    pub probe: Tensor,
    pub mode: Mode,
}

impl<L: Layer> LayerFragment<L> {
    pub fn new(layer: L, input: Tensor, probe: Tensor, mode: Mode) -> Self {
        LayerFragment {
            layer,
            input: Param::new(input),
            probe,
            mode,
        }
    }
}

impl<L: Layer> Fragment for LayerFragment<L> {
    fn slot_names(&mut self) -> Vec<String> {
        std::iter::once("input".to_string())
            .chain(self.layer.named_params().into_iter().map(|(n, _)| n))
            .collect()
    }

    fn slot_mut(&mut self, index: usize) -> &mut Param {
        if index == 0 {
            &mut self.input
        } else {
            self.layer
                .named_params_mut()
                .into_iter()
                .nth(index - 1)
                .map(|(_, p)| p)
                .expect("slot index in range")
        }
    }

    fn loss(&mut self) -> Result<f64, NnError> {
        let y = self.layer.forward(&self.input.value, self.mode)?;
        y.same_shape(&self.probe, "layer fragment")?;
        Ok(y.dot(&self.probe))
    }

    fn loss_and_grad(&mut self) -> Result<f64, NnError> {
        self.layer.zero_grad();
        self.input.zero_grad();
        let loss = self.loss()?;
        let gx = self.layer.backward(&self.probe)?;
        self.input.grad.add_assign(&gx);
        Ok(loss)
    }
}
