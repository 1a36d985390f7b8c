use super::{NnError, Tensor};

/// Concatenates rank-3 tensors along the channel axis.
pub fn concat_channels(xs: &[&Tensor]) -> Result<Tensor, NnError> {
    let first = xs
        .first()
        .ok_or_else(|| NnError::InvalidArgument("concat of zero tensors".into()))?;
    let (b, _, t) = first.dims3("concat")?;
    let mut widths = Vec::with_capacity(xs.len());
    for x in xs {
        let (xb, xc, xt) = x.dims3("concat")?;
        if xb != b || xt != t {
            return Err(NnError::Shape {
                op: "concat",
                detail: format!("{:?} vs {:?}", x.shape(), first.shape()),
            });
        }
        widths.push(xc);
    }
    let c: usize = widths.iter().sum();
    let mut data = Vec::with_capacity(b * c * t);
    for bi in 0..b {
        for (x, &w) in xs.iter().zip(&widths) {
            data.extend_from_slice(&x.data()[bi * w * t..][..w * t]);
        }
    }
    Tensor::from_vec(&[b, c, t], data)
}

/// Inverse of [`concat_channels`]: splits the channel axis into `widths`.
pub fn split_channels(x: &Tensor, widths: &[usize]) -> Result<Vec<Tensor>, NnError> {
    let (b, c, t) = x.dims3("split")?;
    if widths.iter().sum::<usize>() != c {
        return Err(NnError::Shape {
            op: "split",
            detail: format!("widths {widths:?} do not sum to {c} channels"),
        });
    }
    let mut parts: Vec<Vec<f64>> = widths.iter().map(|w| Vec::with_capacity(b * w * t)).collect();
    for bi in 0..b {
        let mut off = bi * c * t;
        for (p, &w) in parts.iter_mut().zip(widths) {
            p.extend_from_slice(&x.data()[off..off + w * t]);
            off += w * t;
        }
    }
    parts
        .into_iter()
        .zip(widths)
        .map(|(p, &w)| Tensor::from_vec(&[b, w, t], p))
        .collect()
}
