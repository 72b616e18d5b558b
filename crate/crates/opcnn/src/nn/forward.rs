//! Forward pass: embedding lookup, valid convolution with ReLU,
//! order-preserving pooling, pooling affine, dropout, output affine, softmax.

use crate::corpus::PAD_ID;
use crate::tensor::{Matrix, Vector};
use crate::{Error, Result};

use super::pooling::{kmax_order_pool, pool_affine};
use super::OpcnnModel;

/// Per-layer activations and pooling selections recorded for the backward
/// pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    pub ids: Vec<usize>,
    /// n x m sentence matrix.
    pub sentence: Matrix,
    pub per_filter: Vec<FilterTrace>,
    /// 0/1 entries; present only in training mode.
    pub dropout_mask: Option<Vec<f64>>,
    /// Concatenated pooled activations before dropout.
    pub concat: Vec<f64>,
    /// After inverted dropout (equal to `concat` in inference mode).
    pub dropped: Vec<f64>,
    pub logits: [f64; 2],
    pub probs: [f64; 2],
}

#[derive(Debug, Clone)]
pub struct FilterTrace {
    /// Convolution output before ReLU.
    pub pre_activation: Vector,
    /// Post-ReLU feature map.
    pub feature_map: Vector,
    /// Source index per pooled slot; `None` marks a zero-padded slot.
    pub pool_indices: Vec<Option<usize>>,
    /// Pooled values before the pooling affine.
    pub pooled: Vec<f64>,
    /// β·d + c per slot (empty when the pooling affine is disabled).
    pub pool_pre: Vec<f64>,
    /// Filter output entering the concat vector.
    pub activated: Vec<f64>,
}

/// Gathers embedding rows into the n x m sentence matrix.
pub fn embed_lookup(ids: &[usize], embedding: &Matrix) -> Result<Matrix> {
    let mut out = Matrix::zeros(ids.len(), embedding.cols());
    for (t, &id) in ids.iter().enumerate() {
        if id >= embedding.rows() {
            return Err(Error::InvalidArgument(format!(
                "token id {} out of range for vocabulary of {}",
                id,
                embedding.rows()
            )));
        }
        out.row_mut(t).copy_from_slice(embedding.row(id));
    }
    Ok(out)
}

/// Valid convolution of one kernel down the sentence matrix, returning the
/// raw pre-activation vector of length n - h + 1.
pub fn conv_valid_pre(a: &Matrix, kernel: &Matrix, bias: f64) -> Result<Vector> {
    if kernel.cols() != a.cols() {
        return Err(Error::Shape(format!(
            "conv: kernel width {} vs sentence width {}",
            kernel.cols(),
            a.cols()
        )));
    }
    if kernel.rows() > a.rows() {
        return Err(Error::Shape(format!(
            "conv: kernel height {} taller than sentence length {}",
            kernel.rows(),
            a.rows()
        )));
    }
    let len = a.rows() - kernel.rows() + 1;
    let mut out = Vector::zeros(len);
    for j in 0..len {
        out[j] = a.frobenius_window_dot(kernel, j)? + bias;
    }
    Ok(out)
}

/// Valid convolution with ReLU activation: the Eq. 2 feature map.
pub fn conv_valid(a: &Matrix, kernel: &Matrix, bias: f64) -> Result<Vector> {
    let mut v = conv_valid_pre(a, kernel, bias)?;
    for x in v.data_mut() {
        *x = x.max(0.0);
    }
    Ok(v)
}

/// Numerically stable two-class softmax.
pub fn softmax2(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let z = e0 + e1;
    [e0 / z, e1 / z]
}

/// Cross-entropy loss −ln p[label], with p clamped to ≥ 1e-12.
pub fn cross_entropy(probs: &[f64; 2], label: u8) -> f64 {
    -probs[label as usize].max(1e-12).ln()
}

/// Full forward pass. `dropout_mask` (0/1 per concat slot) is present only
/// in training mode; surviving activations are scaled by 1/(1−p).
pub fn forward(
    model: &OpcnnModel,
    ids: &[usize],
    dropout_mask: Option<&[f64]>,
) -> Result<ForwardTrace> {
    let hyper = &model.hyper;
    if ids.len() != hyper.n {
        return Err(Error::Shape(format!(
            "input has {} ids, model expects n = {}",
            ids.len(),
            hyper.n
        )));
    }
    let sentence = embed_lookup(ids, &model.embedding)?;

    let mut per_filter = Vec::with_capacity(model.filters.len());
    let mut concat = Vec::with_capacity(hyper.concat_dim());
    for filter in &model.filters {
        let pre = conv_valid_pre(&sentence, &filter.kernel, filter.bias)?;
        let mut feature_map = pre.clone();
        for x in feature_map.data_mut() {
            *x = x.max(0.0);
        }
        let (pooled, pool_indices) = kmax_order_pool(feature_map.data(), hyper.k)?;
        let (pool_pre, activated) = if hyper.pooling_affine_enabled {
            let pool_pre: Vec<f64> = pooled
                .iter()
                .map(|&v| filter.beta * v + filter.pool_bias)
                .collect();
            let activated = pool_affine(
                &pooled,
                filter.beta,
                filter.pool_bias,
                hyper.pooling_activation,
            );
            (pool_pre, activated)
        } else {
            (Vec::new(), pooled.clone())
        };
        concat.extend_from_slice(&activated);
        per_filter.push(FilterTrace {
            pre_activation: pre,
            feature_map,
            pool_indices,
            pooled,
            pool_pre,
            activated,
        });
    }

    let dropped = match dropout_mask {
        Some(mask) => {
            if mask.len() != concat.len() {
                return Err(Error::Shape(format!(
                    "dropout mask length {} vs concat length {}",
                    mask.len(),
                    concat.len()
                )));
            }
            let scale = 1.0 / (1.0 - hyper.dropout_p);
            concat
                .iter()
                .zip(mask)
                .map(|(&v, &m)| v * m * scale)
                .collect()
        }
        None => concat.clone(),
    };

    let mut logits = [0.0f64; 2];
    for (i, logit) in logits.iter_mut().enumerate() {
        let mut acc = 0.0;
        let row = model.w_out.row(i);
        for (w, q) in row.iter().zip(&dropped) {
            acc += w * q;
        }
        *logit = acc + model.b_out[i];
    }
    let probs = softmax2(logits);

    Ok(ForwardTrace {
        ids: ids.to_vec(),
        sentence,
        per_filter,
        dropout_mask: dropout_mask.map(<[f64]>::to_vec),
        concat,
        dropped,
        logits,
        probs,
    })
}

/// True when every non-pad token of the encoded input is the pad id — the
/// degenerate all-padding case flagged by the prediction surface.
pub fn is_all_pad(ids: &[usize]) -> bool {
    ids.iter().all(|&id| id == PAD_ID)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Hyperparams;

    fn tiny_hyper() -> Hyperparams {
        Hyperparams {
            m: 2,
            filter_widths: vec![2],
            filters_per_width: 1,
            k: 2,
            n: 3,
            dropout_p: 0.5,
            ..Hyperparams::default()
        }
    }

    #[test]
    fn embed_lookup_gathers_rows() {
        let mut e = Matrix::zeros(3, 2);
        e.row_mut(2).copy_from_slice(&[1.0, 2.0]);
        let a = embed_lookup(&[2, 0], &e).unwrap();
        assert_eq!(a.row(0), &[1.0, 2.0]);
        assert_eq!(a.row(1), &[0.0, 0.0]);

        let zeroes = embed_lookup(&[0, 0, 0], &e).unwrap();
        assert!(zeroes.data().iter().all(|&v| v == 0.0));

        assert!(embed_lookup(&[3], &e).is_err());
    }

    #[test]
    fn conv_valid_spec_examples() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]).unwrap();
        let k = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(conv_valid(&a, &k, 0.0).unwrap().data(), &[2.0, 3.0]);
        assert_eq!(conv_valid(&a, &k, -2.5).unwrap().data(), &[0.0, 0.5]);

        let a1 = Matrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let k1 = Matrix::from_rows(&[vec![0.0, 1.0]]).unwrap();
        assert_eq!(conv_valid(&a1, &k1, 0.0).unwrap().data(), &[2.0]);

        let tall = Matrix::zeros(4, 2);
        assert!(conv_valid(&a1, &tall, 0.0).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        assert!((cross_entropy(&[0.5, 0.5], 0) - 2.0f64.ln()).abs() < 1e-12);
        assert_eq!(cross_entropy(&[1.0, 0.0], 0), 0.0);
        let clamped = cross_entropy(&[1.0, 0.0], 1);
        assert!((clamped - (-(1e-12f64).ln())).abs() < 1e-9);
        assert!((clamped - 27.63).abs() < 0.01);
    }

    #[test]
    fn zero_weights_give_uniform_probs() {
        let mut model = crate::nn::OpcnnModel::init(4, tiny_hyper(), 1).unwrap();
        for v in model.w_out.data_mut() {
            *v = 0.0;
        }
        model.b_out.data_mut().fill(0.0);
        let trace = forward(&model, &[2, 3, 1], None).unwrap();
        assert_eq!(trace.probs, [0.5, 0.5]);
    }

    #[test]
    fn shapes_at_published_config() {
        let h = Hyperparams {
            n: 9,
            ..Hyperparams::default()
        };
        assert_eq!(h.concat_dim(), 576);
        let model = crate::nn::OpcnnModel::init(6, h, 2).unwrap();
        let trace = forward(&model, &[2, 3, 4, 5, 1, 2, 3, 4, 5], None).unwrap();
        // Feature-map lengths for a nine-token sentence at widths 3/4/5.
        assert_eq!(trace.per_filter[0].feature_map.len(), 7);
        assert_eq!(trace.per_filter[64].feature_map.len(), 6);
        assert_eq!(trace.per_filter[128].feature_map.len(), 5);
        assert_eq!(trace.concat.len(), 576);
        assert!((trace.probs[0] + trace.probs[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn softmax_normalizes_extreme_logits() {
        for logits in [[-50.0, 50.0], [50.0, -50.0], [37.5, 41.2], [0.0, 0.0]] {
            let p = softmax2(logits);
            assert!((p[0] + p[1] - 1.0).abs() < 1e-9);
            assert!(p[0] >= 0.0 && p[1] >= 0.0);
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let model = crate::nn::OpcnnModel::init(5, tiny_hyper(), 9).unwrap();
        let mask = vec![1.0, 0.0];
        let a = forward(&model, &[2, 3, 4], Some(&mask)).unwrap();
        let b = forward(&model, &[2, 3, 4], Some(&mask)).unwrap();
        assert_eq!(a.probs, b.probs);
        assert_eq!(a.logits, b.logits);
        assert_eq!(a.dropped, b.dropped);
    }

    // The motivating property: token reversal changes the concat vector even
    // though every filter's maximum value is unchanged.
    #[test]
    fn reversal_changes_concat_but_not_maxima() {
        let h = Hyperparams {
            m: 2,
            filter_widths: vec![1],
            filters_per_width: 1,
            k: 2,
            n: 2,
            pooling_affine_enabled: false,
            ..Hyperparams::default()
        };
        let mut model = crate::nn::OpcnnModel::init(4, h, 0).unwrap();
        // Token 2 embeds to (1,0), token 3 to (0,1); the kernel responds
        // with 1.0 to token 2 and 0.5 to token 3.
        model.embedding.row_mut(2).copy_from_slice(&[1.0, 0.0]);
        model.embedding.row_mut(3).copy_from_slice(&[0.0, 1.0]);
        model.filters[0].kernel.row_mut(0).copy_from_slice(&[1.0, 0.5]);
        model.filters[0].bias = 0.0;

        let fwd = forward(&model, &[2, 3], None).unwrap();
        let rev = forward(&model, &[3, 2], None).unwrap();
        assert_eq!(fwd.concat, vec![1.0, 0.5]);
        assert_eq!(rev.concat, vec![0.5, 1.0]);
        let max = |t: &ForwardTrace| {
            t.per_filter[0]
                .feature_map
                .data()
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max)
        };
        assert_eq!(max(&fwd), max(&rev));
        assert_ne!(fwd.concat, rev.concat);
    }
}
