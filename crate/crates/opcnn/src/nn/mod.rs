//! The OPCNN model: parameter container, forward pass, hand-derived backward
//! pass, and the word order-preserving k-max pooling primitive.

mod backward;
mod checkpoint;
mod embeddings;
mod forward;
mod gradcheck;
mod pooling;

pub use backward::{backward, backward_detailed, BackwardDetail};
pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_FORMAT_VERSION};
pub use embeddings::load_word2vec_text;
pub use forward::{
    conv_valid, conv_valid_pre, cross_entropy, embed_lookup, forward, is_all_pad, softmax2,
    FilterTrace, ForwardTrace,
};
pub use gradcheck::{grad_check, GradCheckReport, GradFault, GroupResult};
pub use pooling::{kmax_order_pool, pool_affine};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seeds;
use crate::tensor::{Matrix, Vector};
use crate::{Error, Result};

/// Activation applied after the pooling affine map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Subgradient at 0 taken as 0.
    pub fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Model hyperparameters. Defaults follow the published configuration:
/// 100-dim word vectors, filter widths 3/4/5 with 64 filters each, k = 3,
/// dropout 0.5, L2 0.5, mini-batch 50.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub m: usize,
    pub filter_widths: Vec<usize>,
    pub filters_per_width: usize,
    pub k: usize,
    pub dropout_p: f64,
    pub l2_lambda: f64,
    pub minibatch: usize,
    pub n: usize,
    pub pooling_affine_enabled: bool,
    pub pooling_activation: Activation,
    pub embeddings_trainable: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            m: 100,
            filter_widths: vec![3, 4, 5],
            filters_per_width: 64,
            k: 3,
            dropout_p: 0.5,
            l2_lambda: 0.5,
            minibatch: 50,
            n: 64,
            pooling_affine_enabled: true,
            pooling_activation: Activation::Relu,
            embeddings_trainable: true,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.m < 1 {
            return Err(Error::InvalidArgument("m must be >= 1".into()));
        }
        if self.n < 1 {
            return Err(Error::InvalidArgument("n must be >= 1".into()));
        }
        if self.filter_widths.is_empty() {
            return Err(Error::InvalidArgument("filter_widths must be non-empty".into()));
        }
        if !self.filter_widths.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidArgument(
                "filter_widths must be strictly ascending".into(),
            ));
        }
        if *self.filter_widths.last().unwrap() > self.n {
            return Err(Error::InvalidArgument(format!(
                "max filter width {} exceeds sentence length {}",
                self.filter_widths.last().unwrap(),
                self.n
            )));
        }
        if self.filters_per_width < 1 {
            return Err(Error::InvalidArgument("filters_per_width must be >= 1".into()));
        }
        if self.k < 1 {
            return Err(Error::InvalidArgument("k must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::InvalidArgument("dropout_p must be in [0, 1)".into()));
        }
        if self.minibatch < 1 {
            return Err(Error::InvalidArgument("minibatch must be >= 1".into()));
        }
        Ok(())
    }

    /// Length of the concatenated pooled vector.
    pub fn concat_dim(&self) -> usize {
        self.filter_widths.len() * self.filters_per_width * self.k
    }
}

/// One convolution filter with its pooling-stage scalars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Filter {
    pub width: usize,
    /// width x m kernel.
    pub kernel: Matrix,
    pub bias: f64,
    /// Pooling affine scale (β in the pooling stage).
    pub beta: f64,
    /// Pooling affine bias.
    pub pool_bias: f64,
}

/// All trainable parameters. Filters are stored in ascending width order,
/// then filter index — the fixed concatenation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpcnnModel {
    pub hyper: Hyperparams,
    /// V x m embedding table; row 0 is the all-zero pad row.
    pub embedding: Matrix,
    pub filters: Vec<Filter>,
    /// 2 x concat_dim output weights.
    pub w_out: Matrix,
    /// Length-2 output bias.
    pub b_out: Vector,
}

impl OpcnnModel {
    /// Fresh model with Xavier-initialized weights, β = 1, biases 0, and a
    /// zeroed pad embedding row. All draws come from one seeded stream.
    pub fn init(vocab_size: usize, hyper: Hyperparams, seed: u64) -> Result<Self> {
        hyper.validate()?;
        let mut rng = seeds::rng_for(seed, seeds::INIT);
        let mut embedding = Matrix::xavier_from_rng(vocab_size, hyper.m, &mut rng);
        embedding.row_mut(crate::corpus::PAD_ID).fill(0.0);

        let mut filters = Vec::new();
        for &width in &hyper.filter_widths {
            for _ in 0..hyper.filters_per_width {
                filters.push(Filter {
                    width,
                    kernel: Matrix::xavier_from_rng(width, hyper.m, &mut rng),
                    bias: 0.0,
                    beta: 1.0,
                    pool_bias: 0.0,
                });
            }
        }
        let w_out = Matrix::xavier_from_rng(2, hyper.concat_dim(), &mut rng);
        let b_out = Vector::zeros(2);
        Ok(OpcnnModel {
            hyper,
            embedding,
            filters,
            w_out,
            b_out,
        })
    }

    /// Like [`OpcnnModel::init`], but rows for tokens present in the
    /// pretrained table are copied in instead of randomly initialized.
    pub fn init_with_pretrained(
        vocab: &crate::corpus::Vocab,
        hyper: Hyperparams,
        seed: u64,
        pretrained: &std::collections::HashMap<String, Vec<f64>>,
    ) -> Result<Self> {
        let mut model = Self::init(vocab.size(), hyper, seed)?;
        let m = model.hyper.m;
        for id in 2..vocab.size() {
            let token = vocab.token_of(id).unwrap_or("");
            if let Some(vec) = pretrained.get(token) {
                if vec.len() != m {
                    return Err(Error::Shape(format!(
                        "pretrained vector for '{token}' has dim {}, model needs {m}",
                        vec.len()
                    )));
                }
                model.embedding.row_mut(id).copy_from_slice(vec);
            }
        }
        Ok(model)
    }

    pub fn vocab_size(&self) -> usize {
        self.embedding.rows()
    }

    /// Binary prediction: label 1 (deceptive) wins ties at p = 0.5.
    pub fn predict(&self, ids: &[usize]) -> Result<(u8, f64)> {
        let trace = forward(self, ids, None)?;
        let p1 = trace.probs[1];
        Ok((u8::from(p1 >= 0.5), p1))
    }

    /// Generates a fresh inverted-dropout mask (0/1 entries) for one sample.
    pub fn sample_dropout_mask(&self, rng: &mut impl Rng) -> Vec<f64> {
        let p = self.hyper.dropout_p;
        (0..self.hyper.concat_dim())
            .map(|_| f64::from(rng.random_range(0.0..1.0) >= p))
            .collect()
    }
}

/// Per-parameter gradients, shape-congruent with [`OpcnnModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub embedding: Matrix,
    pub filters: Vec<FilterGrads>,
    pub w_out: Matrix,
    pub b_out: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterGrads {
    pub kernel: Matrix,
    pub bias: f64,
    pub beta: f64,
    pub pool_bias: f64,
}

impl Gradients {
    pub fn zeros_like(model: &OpcnnModel) -> Self {
        Gradients {
            embedding: Matrix::zeros(model.embedding.rows(), model.embedding.cols()),
            filters: model
                .filters
                .iter()
                .map(|f| FilterGrads {
                    kernel: Matrix::zeros(f.kernel.rows(), f.kernel.cols()),
                    bias: 0.0,
                    beta: 0.0,
                    pool_bias: 0.0,
                })
                .collect(),
            w_out: Matrix::zeros(model.w_out.rows(), model.w_out.cols()),
            b_out: Vector::zeros(model.b_out.len()),
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.embedding.data_mut().iter_mut().zip(other.embedding.data()) {
            *a += b;
        }
        for (fa, fb) in self.filters.iter_mut().zip(&other.filters) {
            for (a, b) in fa.kernel.data_mut().iter_mut().zip(fb.kernel.data()) {
                *a += b;
            }
            fa.bias += fb.bias;
            fa.beta += fb.beta;
            fa.pool_bias += fb.pool_bias;
        }
        for (a, b) in self.w_out.data_mut().iter_mut().zip(other.w_out.data()) {
            *a += b;
        }
        for (a, b) in self.b_out.data_mut().iter_mut().zip(other.b_out.data()) {
            *a += b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for v in self.embedding.data_mut() {
            *v *= factor;
        }
        for f in &mut self.filters {
            for v in f.kernel.data_mut() {
                *v *= factor;
            }
            f.bias *= factor;
            f.beta *= factor;
            f.pool_bias *= factor;
        }
        for v in self.w_out.data_mut() {
            *v *= factor;
        }
        for v in self.b_out.data_mut() {
            *v *= factor;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hyperparams_defaults_match_published_values() {
        let h = Hyperparams::default();
        assert_eq!(h.m, 100);
        assert_eq!(h.filter_widths, vec![3, 4, 5]);
        assert_eq!(h.filters_per_width, 64);
        assert_eq!(h.k, 3);
        assert_eq!(h.dropout_p, 0.5);
        assert_eq!(h.l2_lambda, 0.5);
        assert_eq!(h.minibatch, 50);
        assert_eq!(h.concat_dim(), 576);
    }

    #[test]
    fn validate_rejects_bad_configs() {
        let h = Hyperparams {
            n: 4,
            ..Hyperparams::default()
        };
        assert!(h.validate().is_err()); // width 5 > n

        let h = Hyperparams {
            dropout_p: 1.0,
            ..Hyperparams::default()
        };
        assert!(h.validate().is_err());

        let h = Hyperparams {
            filter_widths: vec![3, 3],
            ..Hyperparams::default()
        };
        assert!(h.validate().is_err());
    }

    #[test]
    fn init_is_deterministic_with_zero_pad_row() {
        let h = Hyperparams {
            m: 4,
            filter_widths: vec![2, 3],
            filters_per_width: 2,
            k: 2,
            n: 7,
            ..Hyperparams::default()
        };
        let a = OpcnnModel::init(10, h.clone(), 3).unwrap();
        let b = OpcnnModel::init(10, h, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.embedding.row(0).iter().all(|&v| v == 0.0));
        assert_eq!(a.filters.len(), 4);
        assert_eq!(a.filters[0].width, 2);
        assert_eq!(a.filters[3].width, 3);
        assert_eq!(a.w_out.cols(), 2 * 2 * 2);
    }
}
