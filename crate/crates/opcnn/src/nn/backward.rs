//! Hand-derived backward pass: softmax/cross-entropy delta, output affine
//! gradients, dropout routing, pooling affine gradients, sparse k-max
//! routing, ReLU gating, convolution kernel/bias gradients, and embedding
//! accumulation with a frozen pad row.

use crate::corpus::PAD_ID;
use crate::tensor::Matrix;
use crate::{Error, Result};

use super::{ForwardTrace, Gradients, OpcnnModel};

/// Intermediate deltas kept around for inspection in tests.
#[derive(Debug, Clone)]
pub struct BackwardDetail {
    pub gradients: Gradients,
    /// Output-layer delta p − onehot(label).
    pub output_delta: [f64; 2],
    /// Per-filter delta routed back onto the feature map.
    pub feature_map_deltas: Vec<Vec<f64>>,
}

/// Gradients of the cross-entropy loss for one sample.
pub fn backward(model: &OpcnnModel, trace: &ForwardTrace, label: u8) -> Result<Gradients> {
    Ok(backward_detailed(model, trace, label)?.gradients)
}

pub fn backward_detailed(
    model: &OpcnnModel,
    trace: &ForwardTrace,
    label: u8,
) -> Result<BackwardDetail> {
    let hyper = &model.hyper;
    if trace.per_filter.len() != model.filters.len()
        || trace.concat.len() != hyper.concat_dim()
        || trace.ids.len() != hyper.n
    {
        return Err(Error::Shape(
            "trace does not match model dimensions".into(),
        ));
    }
    if label > 1 {
        return Err(Error::InvalidArgument(format!("label {label} not in {{0,1}}")));
    }

    let mut grads = Gradients::zeros_like(model);

    // Softmax + cross-entropy: delta = p − onehot(label).
    let mut output_delta = trace.probs;
    output_delta[label as usize] -= 1.0;

    // Connection layer: dW = delta · q^T, db = delta, delta_q = W^T delta.
    let q = &trace.dropped;
    let mut delta_q = vec![0.0f64; q.len()];
    for (i, &delta) in output_delta.iter().enumerate() {
        let w_row = model.w_out.row(i);
        let g_row = grads.w_out.row_mut(i);
        for j in 0..q.len() {
            g_row[j] = delta * q[j];
        }
        grads.b_out[i] = delta;
        for j in 0..q.len() {
            delta_q[j] += w_row[j] * delta;
        }
    }

    // Dropout: re-apply the recorded mask and inverted scale.
    if let Some(mask) = &trace.dropout_mask {
        let scale = 1.0 / (1.0 - hyper.dropout_p);
        for (d, &m) in delta_q.iter_mut().zip(mask) {
            *d *= m * scale;
        }
    }

    let k = hyper.k;
    let mut feature_map_deltas = Vec::with_capacity(model.filters.len());
    let mut delta_sentence = Matrix::zeros(hyper.n, hyper.m);

    for (f, (filter, ft)) in model.filters.iter().zip(&trace.per_filter).enumerate() {
        let seg = &delta_q[f * k..(f + 1) * k];

        // Pooling affine: dβ = Σ δ∘d, dc = Σ δ, through σ'.
        let delta_pooled: Vec<f64> = if hyper.pooling_affine_enabled {
            let mut d_beta = 0.0;
            let mut d_c = 0.0;
            let mut delta_pooled = vec![0.0f64; k];
            for j in 0..k {
                let gate = hyper.pooling_activation.derivative(ft.pool_pre[j]);
                let delta_pa = seg[j] * gate;
                d_beta += delta_pa * ft.pooled[j];
                d_c += delta_pa;
                delta_pooled[j] = filter.beta * delta_pa;
            }
            grads.filters[f].beta = d_beta;
            grads.filters[f].pool_bias = d_c;
            delta_pooled
        } else {
            seg.to_vec()
        };

        // k-max routing: each pooled slot sends its delta only to its
        // recorded source index; pad slots route nowhere.
        let map_len = ft.feature_map.len();
        let mut fm_delta = vec![0.0f64; map_len];
        for (j, idx) in ft.pool_indices.iter().enumerate() {
            if let Some(t) = idx {
                fm_delta[*t] += delta_pooled[j];
            }
        }

        // ReLU gate on the convolution pre-activation, then kernel/bias
        // gradients and the delta pushed into the sentence matrix.
        let width = filter.width;
        let d_kernel = grads.filters[f].kernel.data_mut();
        let mut d_bias = 0.0;
        for (j, &fm_d) in fm_delta.iter().enumerate() {
            if fm_d == 0.0 {
                continue;
            }
            let gate = if ft.pre_activation[j] > 0.0 { 1.0 } else { 0.0 };
            let delta_conv = fm_d * gate;
            if delta_conv == 0.0 {
                continue;
            }
            d_bias += delta_conv;
            for r in 0..width {
                let a_row = trace.sentence.row(j + r);
                let k_row = filter.kernel.row(r);
                let d_row = &mut d_kernel[r * hyper.m..(r + 1) * hyper.m];
                let s_row = delta_sentence.row_mut(j + r);
                for c in 0..hyper.m {
                    d_row[c] += delta_conv * a_row[c];
                    s_row[c] += delta_conv * k_row[c];
                }
            }
        }
        grads.filters[f].bias = d_bias;
        feature_map_deltas.push(fm_delta);
    }

    // Embedding rows accumulate the sentence delta; the pad row never learns.
    if hyper.embeddings_trainable {
        for (t, &id) in trace.ids.iter().enumerate() {
            if id == PAD_ID {
                continue;
            }
            let src = delta_sentence.row(t);
            let dst = grads.embedding.row_mut(id);
            for c in 0..hyper.m {
                dst[c] += src[c];
            }
        }
    }

    Ok(BackwardDetail {
        gradients: grads,
        output_delta,
        feature_map_deltas,
    })
}
