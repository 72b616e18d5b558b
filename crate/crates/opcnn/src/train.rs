//! Mini-batch SGD with L2 weight decay, seeded shuffling and dropout,
//! per-epoch metric logging, and k-fold cross-validated sweeps.

use std::fmt::Write as _;

use rand::seq::SliceRandom;

use crate::corpus::{self, Dataset, Encoded, TokenizeMode, PAD_ID};
use crate::nn::{backward, cross_entropy, forward, Gradients, Hyperparams, OpcnnModel};
use crate::seeds;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub l2_lambda: f64,
    pub seed: u64,
    pub shuffle_per_epoch: bool,
    /// Stop after this many epochs without held-out accuracy improvement.
    pub early_stopping_patience: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            epochs: 20,
            minibatch: 50,
            l2_lambda: 0.5,
            seed: 0,
            shuffle_per_epoch: true,
            early_stopping_patience: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::InvalidArgument("learning_rate must be > 0".into()));
        }
        if self.minibatch < 1 {
            return Err(Error::InvalidArgument("minibatch must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub valid_acc: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochStats>,
}

impl TrainHistory {
    pub const CSV_HEADER: &'static str = "epoch,loss,train_acc,valid_acc";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for e in &self.epochs {
            let valid = e
                .valid_acc
                .map_or_else(String::new, |v| format!("{v:.6}"));
            let _ = writeln!(
                out,
                "{},{:.6},{:.6},{}",
                e.epoch, e.train_loss, e.train_acc, valid
            );
        }
        out
    }
}

/// One SGD step with L2 decay: θ ← θ − lr·(g + λ·θ) for weight tensors
/// (kernels, β, output weights, embeddings). Biases are not decayed and the
/// pad embedding row is never touched.
pub fn sgd_step(model: &mut OpcnnModel, grads: &Gradients, lr: f64, l2_lambda: f64) -> Result<()> {
    if grads.filters.len() != model.filters.len()
        || grads.w_out.rows() != model.w_out.rows()
        || grads.w_out.cols() != model.w_out.cols()
        || grads.embedding.rows() != model.embedding.rows()
    {
        return Err(Error::Shape("gradient shapes do not match model".into()));
    }
    for (f, g) in model.filters.iter_mut().zip(&grads.filters) {
        for (w, dw) in f.kernel.data_mut().iter_mut().zip(g.kernel.data()) {
            *w -= lr * (dw + l2_lambda * *w);
        }
        f.bias -= lr * g.bias;
        f.beta -= lr * (g.beta + l2_lambda * f.beta);
        f.pool_bias -= lr * g.pool_bias;
    }
    for (w, dw) in model.w_out.data_mut().iter_mut().zip(grads.w_out.data()) {
        *w -= lr * (dw + l2_lambda * *w);
    }
    for (b, db) in model.b_out.data_mut().iter_mut().zip(grads.b_out.data()) {
        *b -= lr * db;
    }
    if model.hyper.embeddings_trainable {
        let m = model.hyper.m;
        for row in 0..model.embedding.rows() {
            if row == PAD_ID {
                continue;
            }
            let w_row = model.embedding.row_mut(row);
            let g_row = &grads.embedding.data()[row * m..(row + 1) * m];
            for (w, dw) in w_row.iter_mut().zip(g_row) {
                *w -= lr * (dw + l2_lambda * *w);
            }
        }
    }
    Ok(())
}

/// Accuracy and predictions on an encoded set (inference mode, no dropout).
pub fn evaluate(model: &OpcnnModel, data: &Encoded) -> Result<(f64, Vec<u8>)> {
    let mut preds = Vec::with_capacity(data.len());
    let mut correct = 0usize;
    for (ids, &label) in data.ids.iter().zip(&data.labels) {
        let (pred, _) = model.predict(ids)?;
        if pred == label {
            correct += 1;
        }
        preds.push(pred);
    }
    let acc = if data.is_empty() {
        0.0
    } else {
        correct as f64 / data.len() as f64
    };
    Ok((acc, preds))
}

/// Trains for `config.epochs` epochs of mini-batch SGD. Per epoch: seeded
/// shuffle, mini-batches (last partial batch kept), per-batch mean gradient
/// accumulated in sample-index order, one step per batch, then metrics.
pub fn train(
    mut model: OpcnnModel,
    train_set: &Encoded,
    valid_set: Option<&Encoded>,
    config: &TrainConfig,
) -> Result<(OpcnnModel, TrainHistory)> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    let mut shuffle_rng = seeds::rng_for(config.seed, seeds::SHUFFLE);
    let mut dropout_rng = seeds::rng_for(config.seed, seeds::DROPOUT);
    let use_dropout = model.hyper.dropout_p > 0.0;

    let mut history = TrainHistory::default();
    let mut best_valid = f64::NEG_INFINITY;
    let mut stale_epochs = 0usize;

    for epoch in 0..config.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        if config.shuffle_per_epoch {
            order.shuffle(&mut shuffle_rng);
        }

        let mut epoch_loss = 0.0;
        let mut epoch_correct = 0usize;
        for batch in order.chunks(config.minibatch) {
            let mut batch_grads = Gradients::zeros_like(&model);
            for &i in batch {
                let mask = if use_dropout {
                    Some(model.sample_dropout_mask(&mut dropout_rng))
                } else {
                    None
                };
                let trace = forward(&model, &train_set.ids[i], mask.as_deref())?;
                let label = train_set.labels[i];
                epoch_loss += cross_entropy(&trace.probs, label);
                let pred = u8::from(trace.probs[1] >= 0.5);
                if pred == label {
                    epoch_correct += 1;
                }
                let grads = backward(&model, &trace, label)?;
                batch_grads.add_assign(&grads);
            }
            batch_grads.scale(1.0 / batch.len() as f64);
            sgd_step(&mut model, &batch_grads, config.learning_rate, config.l2_lambda)?;
        }

        let valid_acc = match valid_set {
            Some(v) => Some(evaluate(&model, v)?.0),
            None => None,
        };
        history.epochs.push(EpochStats {
            epoch,
            train_loss: epoch_loss / train_set.len() as f64,
            train_acc: epoch_correct as f64 / train_set.len() as f64,
            valid_acc,
        });

        if let (Some(patience), Some(acc)) = (config.early_stopping_patience, valid_acc) {
            if acc > best_valid {
                best_valid = acc;
                stale_epochs = 0;
            } else {
                stale_epochs += 1;
                if stale_epochs >= patience {
                    break;
                }
            }
        }
    }
    Ok((model, history))
}

/// One grid point of a cross-validated sweep.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub label: String,
    pub fold_accuracies: Vec<f64>,
    pub mean_acc: f64,
    pub sd: f64,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("hyper,mean_acc,sd\n");
    for r in rows {
        let _ = writeln!(out, "{},{:.6},{:.6}", r.label, r.mean_acc, r.sd);
    }
    out
}

/// k-fold cross-validated sweep over a hyperparameter grid. For each grid
/// point every fold is held out once; the vocabulary is rebuilt from the
/// training folds each time so no statistics leak from held-out data.
pub fn cv_sweep(
    dataset: &Dataset,
    grid: &[(String, Hyperparams)],
    config: &TrainConfig,
    folds: usize,
    seed: u64,
    mode: TokenizeMode,
    min_count: usize,
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("hyperparameter grid is empty".into()));
    }
    let fold_indices = corpus::kfold_split(dataset, folds, seed)?;
    let mut rows = Vec::with_capacity(grid.len());
    for (label, hyper) in grid {
        let mut fold_accuracies = Vec::with_capacity(folds);
        for held_out in 0..folds {
            let train_idx: Vec<usize> = fold_indices
                .iter()
                .enumerate()
                .filter(|(f, _)| *f != held_out)
                .flat_map(|(_, idx)| idx.iter().copied())
                .collect();
            let train_ds = dataset.select(&train_idx);
            let valid_ds = dataset.select(&fold_indices[held_out]);
            let vocab = corpus::build_vocab(&[&train_ds], mode, min_count)?;
            let train_enc = corpus::encode_dataset(&train_ds, &vocab, mode, hyper.n)?;
            let valid_enc = corpus::encode_dataset(&valid_ds, &vocab, mode, hyper.n)?;
            let model = OpcnnModel::init(
                vocab.size(),
                hyper.clone(),
                seeds::derive_seed(config.seed, &format!("fold{held_out}")),
            )?;
            let (model, _) = train(model, &train_enc, None, config)?;
            fold_accuracies.push(evaluate(&model, &valid_enc)?.0);
        }
        let mean = fold_accuracies.iter().sum::<f64>() / folds as f64;
        let var = fold_accuracies
            .iter()
            .map(|a| (a - mean).powi(2))
            .sum::<f64>()
            / folds as f64;
        rows.push(SweepRow {
            label: label.clone(),
            fold_accuracies,
            mean_acc: mean,
            sd: var.sqrt(),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocab, encode_dataset, gen_order_task};

    fn small_hyper(n: usize) -> Hyperparams {
        Hyperparams {
            m: 8,
            filter_widths: vec![2, 3],
            filters_per_width: 4,
            k: 2,
            n,
            dropout_p: 0.0,
            l2_lambda: 0.0,
            minibatch: 10,
            ..Hyperparams::default()
        }
    }

    #[test]
    fn sgd_step_arithmetic() {
        let mut model = OpcnnModel::init(4, small_hyper(5), 1).unwrap();
        // θ=1.0, g=0.5, lr=0.1, λ=0 → 0.95
        model.filters[0].kernel.set(0, 0, 1.0);
        let mut grads = Gradients::zeros_like(&model);
        grads.filters[0].kernel.set(0, 0, 0.5);
        let mut m1 = model.clone();
        sgd_step(&mut m1, &grads, 0.1, 0.0).unwrap();
        assert!((m1.filters[0].kernel.get(0, 0) - 0.95).abs() < 1e-12);

        // θ=1.0, g=0, lr=0.1, λ=0.5 → 0.95
        let zero = Gradients::zeros_like(&model);
        let mut m2 = model.clone();
        sgd_step(&mut m2, &zero, 0.1, 0.5).unwrap();
        assert!((m2.filters[0].kernel.get(0, 0) - 0.95).abs() < 1e-12);

        // Biases are not decayed.
        let mut m3 = model.clone();
        m3.filters[0].bias = 1.0;
        m3.b_out[0] = 1.0;
        sgd_step(&mut m3, &zero, 0.1, 0.5).unwrap();
        assert_eq!(m3.filters[0].bias, 1.0);
        assert_eq!(m3.b_out[0], 1.0);
    }

    #[test]
    fn decay_shrinks_weights_geometrically() {
        let mut model = OpcnnModel::init(4, small_hyper(5), 2).unwrap();
        let zero = Gradients::zeros_like(&model);
        let before = model.w_out.get(0, 0);
        sgd_step(&mut model, &zero, 0.1, 0.5).unwrap();
        assert!((model.w_out.get(0, 0) - before * 0.95).abs() < 1e-12);
        assert!(model.w_out.get(0, 0).abs() < before.abs());
    }

    #[test]
    fn zero_lr_is_rejected_but_null_gradient_preserves_model() {
        let model = OpcnnModel::init(4, small_hyper(5), 3).unwrap();
        let cfg = TrainConfig {
            learning_rate: 0.0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());

        // λ=0 with all-zero gradients: parameters unchanged.
        let mut m = model.clone();
        let zero = Gradients::zeros_like(&model);
        sgd_step(&mut m, &zero, 0.1, 0.0).unwrap();
        assert_eq!(m, model);
    }

    #[test]
    fn training_is_deterministic() {
        let data = gen_order_task(40, 6, 2, 11).unwrap();
        let vocab = build_vocab(&[&data], TokenizeMode::Whitespace, 1).unwrap();
        let enc = encode_dataset(&data, &vocab, TokenizeMode::Whitespace, 12).unwrap();
        let hyper = Hyperparams {
            n: 12,
            dropout_p: 0.5,
            ..small_hyper(12)
        };
        let cfg = TrainConfig {
            epochs: 3,
            l2_lambda: 0.0,
            seed: 4,
            ..TrainConfig::default()
        };
        let run = || {
            let model = OpcnnModel::init(vocab.size(), hyper.clone(), 5).unwrap();
            train(model, &enc, Some(&enc), &cfg).unwrap()
        };
        let (m1, h1) = run();
        let (m2, h2) = run();
        assert_eq!(m1, m2);
        assert_eq!(h1, h2);
    }

    // Batch mean gradient equals the average of per-sample backward results.
    #[test]
    fn batch_mean_gradient_oracle() {
        let data = gen_order_task(3, 6, 2, 13).unwrap();
        let vocab = build_vocab(&[&data], TokenizeMode::Whitespace, 1).unwrap();
        let enc = encode_dataset(&data, &vocab, TokenizeMode::Whitespace, 10).unwrap();
        let model = OpcnnModel::init(vocab.size(), small_hyper(10), 6).unwrap();

        let mut acc = Gradients::zeros_like(&model);
        let mut per_sample = Vec::new();
        for i in 0..3 {
            let trace = forward(&model, &enc.ids[i], None).unwrap();
            let g = backward(&model, &trace, enc.labels[i]).unwrap();
            acc.add_assign(&g);
            per_sample.push(g);
        }
        acc.scale(1.0 / 3.0);
        for (idx, v) in acc.w_out.data().iter().enumerate() {
            let mean = per_sample.iter().map(|g| g.w_out.data()[idx]).sum::<f64>() / 3.0;
            assert!((v - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn loss_decreases_on_small_set() {
        // Median first-epoch improvement over 5 seeds.
        let data = gen_order_task(30, 6, 2, 17).unwrap();
        let vocab = build_vocab(&[&data], TokenizeMode::Whitespace, 1).unwrap();
        let enc = encode_dataset(&data, &vocab, TokenizeMode::Whitespace, 12).unwrap();
        let mut improvements = Vec::new();
        for seed in 0..5u64 {
            let model = OpcnnModel::init(vocab.size(), small_hyper(12), seed).unwrap();
            let cfg = TrainConfig {
                epochs: 2,
                learning_rate: 0.05,
                l2_lambda: 0.0,
                seed,
                ..TrainConfig::default()
            };
            let (_, hist) = train(model, &enc, None, &cfg).unwrap();
            improvements.push(hist.epochs[0].train_loss - hist.epochs[1].train_loss);
        }
        improvements.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!(improvements[2] > 0.0, "median improvement {improvements:?}");
    }

    #[test]
    fn empty_training_set_is_an_error() {
        let model = OpcnnModel::init(4, small_hyper(5), 1).unwrap();
        let empty = Encoded {
            ids: vec![],
            labels: vec![],
        };
        assert!(train(model, &empty, None, &TrainConfig::default()).is_err());
    }

    #[test]
    fn cv_sweep_table_shape() {
        let data = gen_order_task(30, 6, 2, 23).unwrap();
        let hyper = small_hyper(12);
        let grid = vec![
            ("k=1".to_owned(), Hyperparams { k: 1, ..hyper.clone() }),
            ("k=2".to_owned(), Hyperparams { k: 2, ..hyper.clone() }),
        ];
        let cfg = TrainConfig {
            epochs: 2,
            l2_lambda: 0.0,
            minibatch: 10,
            ..TrainConfig::default()
        };
        let rows = cv_sweep(&data, &grid, &cfg, 3, 1, TokenizeMode::Whitespace, 1).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].fold_accuracies.len(), 3);
        let mean = rows[0].fold_accuracies.iter().sum::<f64>() / 3.0;
        assert!((rows[0].mean_acc - mean).abs() < 1e-12);
        let csv = sweep_csv(&rows);
        assert!(csv.starts_with("hyper,mean_acc,sd\n"));
        assert_eq!(csv.lines().count(), 3);
    }
}
