use super::{NnError, Tensor};

/// Mean sample-wise cross-entropy of `logits (B,K,T)` against `labels`
/// (flattened `B·T`, batch-major). Returns the loss and `∂loss/∂logits`.
pub fn softmax_cross_entropy(logits: &Tensor, labels: &[u8]) -> Result<(f64, Tensor), NnError> {
    let (b, k, t) = logits.dims3("softmax_cross_entropy")?;
    if labels.len() != b * t {
        return Err(NnError::Shape {
            op: "softmax_cross_entropy",
            detail: format!("{} labels for {} samples", labels.len(), b * t),
        });
    }
    if let Some((index, &label)) = labels.iter().enumerate().find(|(_, &l)| l as usize >= k) {
        return Err(NnError::LabelOutOfRange {
            label: label as usize,
            index,
            classes: k,
        });
    }
    let n = (b * t) as f64;
    let ld = logits.data();
    let mut grad = Tensor::zeros(logits.shape());
    let gd = grad.data_mut();
    let mut loss = 0.0;
    let mut probs = vec![0.0; k];
    for bi in 0..b {
        let base = bi * k * t;
        for ti in 0..t {
            let max = (0..k).map(|c| ld[base + c * t + ti]).fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for (c, p) in probs.iter_mut().enumerate() {
                *p = (ld[base + c * t + ti] - max).exp();
                z += *p;
            }
            let y = labels[bi * t + ti] as usize;
            loss += z.ln() - (ld[base + y * t + ti] - max);
            for (c, p) in probs.iter().enumerate() {
                let onehot = if c == y { 1.0 } else { 0.0 };
                gd[base + c * t + ti] = (p / z - onehot) / n;
            }
        }
    }
    Ok((loss / n, grad))
}

/// Class with the largest logit at each sample; ties go to the lower class.
pub fn argmax_classes(logits: &Tensor) -> Result<Vec<u8>, NnError> {
    let (b, k, t) = logits.dims3("argmax")?;
    let ld = logits.data();
    let mut out = Vec::with_capacity(b * t);
    for bi in 0..b {
        let base = bi * k * t;
        for ti in 0..t {
            let mut best = 0;
            for c in 1..k {
                if ld[base + c * t + ti] > ld[base + best * t + ti] {
                    best = c;
                }
            }
            out.push(best as u8);
        }
    }
    Ok(out)
}
