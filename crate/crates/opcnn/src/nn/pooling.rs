//! Word order-preserving k-max pooling.

use crate::{Error, Result};

/// Selects the k largest values of a 1-D feature map and returns them in
/// their original sequence order (not sorted by magnitude), together with
/// their source indices. Ties break toward the lower index. When the input
/// is shorter than k, all values are kept in order and the tail is
/// zero-padded with `None` indices.
pub fn kmax_order_pool(s: &[f64], k: usize) -> Result<(Vec<f64>, Vec<Option<usize>>)> {
    if k == 0 {
        return Err(Error::InvalidArgument("pooling k must be >= 1".into()));
    }
    if s.len() <= k {
        let mut values: Vec<f64> = s.to_vec();
        let mut indices: Vec<Option<usize>> = (0..s.len()).map(Some).collect();
        values.resize(k, 0.0);
        indices.resize(k, None);
        return Ok((values, indices));
    }
    let mut order: Vec<usize> = (0..s.len()).collect();
    // Stable sort by value descending keeps lower indices first among ties.
    order.sort_by(|&a, &b| s[b].partial_cmp(&s[a]).unwrap_or(std::cmp::Ordering::Equal));
    let mut top: Vec<usize> = order[..k].to_vec();
    top.sort_unstable();
    let values = top.iter().map(|&i| s[i]).collect();
    let indices = top.into_iter().map(Some).collect();
    Ok((values, indices))
}

/// Elementwise σ(β·v + c) over the pooled values.
pub fn pool_affine(values: &[f64], beta: f64, c: f64, activation: super::Activation) -> Vec<f64> {
    values.iter().map(|&v| activation.apply(beta * v + c)).collect()
}
