//! Flat key=value run configuration with strict unknown-key rejection.
//!
//! Defaults match the published hyperparameter block (100-dim vectors,
//! widths 3/4/5 with 64 filters each, k = 3, dropout 0.5, L2 0.5,
//! mini-batch 50). `n = auto` picks the 95th-percentile training-set token
//! length. Environment variables are never consulted.

use std::collections::BTreeMap;
use std::path::Path;

use opcnn::corpus::TokenizeMode;
use opcnn::nn::{Activation, Hyperparams};
use opcnn::train::TrainConfig;

use crate::{CliError, CliResult};

/// Sentence length: fixed or derived from the training split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SentenceLen {
    Auto,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: String,
    // data
    pub data: Option<String>,
    pub format: DataFormat,
    pub tokenizer: TokenizeMode,
    pub min_count: usize,
    pub balance: bool,
    pub valid_fraction: f64,
    // synthetic task
    pub synth_samples: usize,
    pub synth_filler_vocab: usize,
    pub synth_min_gap: usize,
    // model
    pub m: usize,
    pub widths: Vec<usize>,
    pub filters_per_width: usize,
    pub k: usize,
    pub dropout: f64,
    pub l2: f64,
    pub n: SentenceLen,
    pub pooling_affine: bool,
    pub embedding_file: Option<String>,
    // training
    pub lr: f64,
    pub epochs: usize,
    pub minibatch: usize,
    pub patience: Option<usize>,
    // baselines / experiments
    pub svm_lambda: f64,
    pub svm_epochs: usize,
    pub folds: usize,
    pub bench_sweep: bool,
    pub bench_sizes: Vec<usize>,
    pub ksweep_ks: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataFormat {
    Jsonl,
    Ott,
    Synthetic,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            out_dir: "out".into(),
            data: None,
            format: DataFormat::Synthetic,
            tokenizer: TokenizeMode::Whitespace,
            min_count: 1,
            balance: false,
            valid_fraction: 0.2,
            synth_samples: 1000,
            synth_filler_vocab: 20,
            synth_min_gap: 6,
            m: 100,
            widths: vec![3, 4, 5],
            filters_per_width: 64,
            k: 3,
            dropout: 0.5,
            l2: 0.5,
            n: SentenceLen::Auto,
            pooling_affine: true,
            embedding_file: None,
            lr: 0.01,
            epochs: 20,
            minibatch: 50,
            patience: None,
            svm_lambda: 1e-4,
            svm_epochs: 50,
            folds: 3,
            bench_sweep: false,
            bench_sizes: vec![250, 500, 1000, 2000, 3000],
            ksweep_ks: vec![1, 2, 3, 4, 5],
        }
    }
}

fn bad(key: &str, value: &str) -> CliError {
    CliError::Config(format!("invalid value '{value}' for key '{key}'"))
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> CliResult<T> {
    value.parse().map_err(|_| bad(key, value))
}

fn parse_list(key: &str, value: &str) -> CliResult<Vec<usize>> {
    value
        .split(',')
        .map(|s| s.trim().parse().map_err(|_| bad(key, value)))
        .collect()
}

fn parse_bool(key: &str, value: &str) -> CliResult<bool> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(bad(key, value)),
    }
}

impl RunConfig {
    pub fn from_file(path: impl AsRef<Path>) -> CliResult<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> CliResult<Self> {
        let mut cfg = RunConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected key=value", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            cfg.apply(key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&mut self, key: &str, value: &str) -> CliResult<()> {
        match key {
            "seed" => self.seed = parse(key, value)?,
            "out_dir" => self.out_dir = value.to_owned(),
            "data" => self.data = Some(value.to_owned()),
            "format" => {
                self.format = match value {
                    "jsonl" => DataFormat::Jsonl,
                    "ott" => DataFormat::Ott,
                    "synthetic" => DataFormat::Synthetic,
                    _ => return Err(bad(key, value)),
                }
            }
            "tokenizer" => {
                self.tokenizer = value
                    .parse()
                    .map_err(|_| bad(key, value))?
            }
            "min_count" => self.min_count = parse(key, value)?,
            "balance" => self.balance = parse_bool(key, value)?,
            "valid_fraction" => self.valid_fraction = parse(key, value)?,
            "synth_samples" => self.synth_samples = parse(key, value)?,
            "synth_filler_vocab" => self.synth_filler_vocab = parse(key, value)?,
            "synth_min_gap" => self.synth_min_gap = parse(key, value)?,
            "m" => self.m = parse(key, value)?,
            "widths" => self.widths = parse_list(key, value)?,
            "filters_per_width" => self.filters_per_width = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "dropout" => self.dropout = parse(key, value)?,
            "l2" => self.l2 = parse(key, value)?,
            "n" => {
                self.n = if value == "auto" {
                    SentenceLen::Auto
                } else {
                    SentenceLen::Fixed(parse(key, value)?)
                }
            }
            "pooling_affine" => self.pooling_affine = parse_bool(key, value)?,
            "embedding_file" => self.embedding_file = Some(value.to_owned()),
            "lr" => self.lr = parse(key, value)?,
            "epochs" => self.epochs = parse(key, value)?,
            "minibatch" => self.minibatch = parse(key, value)?,
            "patience" => self.patience = Some(parse(key, value)?),
            "svm_lambda" => self.svm_lambda = parse(key, value)?,
            "svm_epochs" => self.svm_epochs = parse(key, value)?,
            "folds" => self.folds = parse(key, value)?,
            "bench_sweep" => self.bench_sweep = parse_bool(key, value)?,
            "bench_sizes" => self.bench_sizes = parse_list(key, value)?,
            "ksweep_ks" => self.ksweep_ks = parse_list(key, value)?,
            _ => return Err(CliError::Config(format!("unknown key '{key}'"))),
        }
        Ok(())
    }

    fn validate(&self) -> CliResult<()> {
        if !(0.0..1.0).contains(&self.valid_fraction) {
            return Err(CliError::Config("valid_fraction must be in [0, 1)".into()));
        }
        if matches!(self.format, DataFormat::Jsonl | DataFormat::Ott) && self.data.is_none() {
            return Err(CliError::Config(format!(
                "format {:?} requires a data path",
                self.format
            )));
        }
        Ok(())
    }

    /// Model hyperparameters for a resolved sentence length.
    pub fn hyperparams(&self, n: usize) -> Hyperparams {
        Hyperparams {
            m: self.m,
            filter_widths: self.widths.clone(),
            filters_per_width: self.filters_per_width,
            k: self.k,
            dropout_p: self.dropout,
            l2_lambda: self.l2,
            minibatch: self.minibatch,
            n,
            pooling_affine_enabled: self.pooling_affine,
            pooling_activation: Activation::Relu,
            // Pretrained vectors are frozen; random init trains.
            embeddings_trainable: self.embedding_file.is_none(),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            epochs: self.epochs,
            minibatch: self.minibatch,
            l2_lambda: self.l2,
            seed: self.seed,
            shuffle_per_epoch: true,
            early_stopping_patience: self.patience,
        }
    }

    /// Key-sorted echo of every effective setting, for the run manifest.
    pub fn echo(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            map.insert(k.to_owned(), v);
        };
        put("seed", self.seed.to_string());
        put("out_dir", self.out_dir.clone());
        put("data", self.data.clone().unwrap_or_default());
        put(
            "format",
            match self.format {
                DataFormat::Jsonl => "jsonl",
                DataFormat::Ott => "ott",
                DataFormat::Synthetic => "synthetic",
            }
            .to_owned(),
        );
        put(
            "tokenizer",
            match self.tokenizer {
                TokenizeMode::Whitespace => "whitespace",
                TokenizeMode::Char => "char",
            }
            .to_owned(),
        );
        put("min_count", self.min_count.to_string());
        put("balance", self.balance.to_string());
        put("valid_fraction", self.valid_fraction.to_string());
        put("synth_samples", self.synth_samples.to_string());
        put("synth_filler_vocab", self.synth_filler_vocab.to_string());
        put("synth_min_gap", self.synth_min_gap.to_string());
        put("m", self.m.to_string());
        put(
            "widths",
            self.widths
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        put("filters_per_width", self.filters_per_width.to_string());
        put("k", self.k.to_string());
        put("dropout", self.dropout.to_string());
        put("l2", self.l2.to_string());
        put(
            "n",
            match self.n {
                SentenceLen::Auto => "auto".to_owned(),
                SentenceLen::Fixed(n) => n.to_string(),
            },
        );
        put("pooling_affine", self.pooling_affine.to_string());
        put(
            "embedding_file",
            self.embedding_file.clone().unwrap_or_default(),
        );
        put("lr", self.lr.to_string());
        put("epochs", self.epochs.to_string());
        put("minibatch", self.minibatch.to_string());
        put(
            "patience",
            self.patience.map(|p| p.to_string()).unwrap_or_default(),
        );
        put("svm_lambda", self.svm_lambda.to_string());
        put("svm_epochs", self.svm_epochs.to_string());
        put("folds", self.folds.to_string());
        put("bench_sweep", self.bench_sweep.to_string());
        put(
            "bench_sizes",
            self.bench_sizes
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        put(
            "ksweep_ks",
            self.ksweep_ks
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join(","),
        );
        map
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_known_keys() {
        let cfg = RunConfig::from_text("seed = 7\nwidths = 2,3\nk = 2\nn = 12\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.widths, vec![2, 3]);
        assert_eq!(cfg.n, SentenceLen::Fixed(12));
    }

    #[test]
    fn rejects_unknown_key_by_name() {
        let err = RunConfig::from_text("learning_rte = 0.1\n").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("learning_rte"));
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let cfg = RunConfig::from_text("# a comment\n\nseed = 3\n").unwrap();
        assert_eq!(cfg.seed, 3);
    }

    #[test]
    fn jsonl_format_requires_data_path() {
        assert!(RunConfig::from_text("format = jsonl\n").is_err());
    }
}
