//! Command implementations behind the binary's subcommands. Each command
//! returns the text it would print so integration tests can assert on output
//! without spawning processes; artifacts are written under `out_dir`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use sha2::{Digest, Sha256};

use opcnn::baselines::{
    svm_predict, svm_train, to_svm_label, BigramExtractor, BigramWeighting, SparseVector,
    TfidfExtractor,
};
use opcnn::corpus::{self, Dataset, Encoded, Vocab};
use opcnn::metrics::{accuracy_gain, confusion, MethodReport};
use opcnn::nn::{
    grad_check, is_all_pad, load_checkpoint, load_word2vec_text, save_checkpoint, GradFault,
    Hyperparams, OpcnnModel,
};
use opcnn::seeds;
use opcnn::train::{self, sweep_csv, TrainConfig};

use crate::config::{DataFormat, RunConfig, SentenceLen};
use crate::{CliError, CliResult};

/// Loads the corpus named by the config, applying balancing if requested.
pub fn load_data(cfg: &RunConfig) -> CliResult<Dataset> {
    let data = match cfg.format {
        DataFormat::Synthetic => corpus::gen_order_task(
            cfg.synth_samples,
            cfg.synth_filler_vocab,
            cfg.synth_min_gap,
            seeds::derive_seed(cfg.seed, seeds::DATA),
        )?,
        DataFormat::Jsonl => corpus::load_jsonl(cfg.data.as_ref().unwrap())?,
        DataFormat::Ott => corpus::load_ott(cfg.data.as_ref().unwrap())?,
    };
    if data.is_empty() {
        return Err(CliError::Data("corpus contains no documents".into()));
    }
    Ok(if cfg.balance {
        data.balanced(cfg.seed)
    } else {
        data
    })
}

/// Seeded shuffle split into (train, held-out). Both halves keep the
/// original document order.
pub fn split_train_valid(ds: &Dataset, fraction: f64, seed: u64) -> (Dataset, Dataset) {
    let mut idx: Vec<usize> = (0..ds.len()).collect();
    idx.shuffle(&mut seeds::rng_for(seed, "split"));
    let n_valid = (ds.len() as f64 * fraction).round() as usize;
    let (mut valid_idx, mut train_idx) = {
        let (v, t) = idx.split_at(n_valid.min(ds.len()));
        (v.to_vec(), t.to_vec())
    };
    valid_idx.sort_unstable();
    train_idx.sort_unstable();
    (ds.select(&train_idx), ds.select(&valid_idx))
}

/// Resolves the sentence length: fixed from the config, or the training-set
/// 95th percentile, never below the widest filter.
pub fn resolve_n(cfg: &RunConfig, train: &Dataset) -> usize {
    let max_width = cfg.widths.iter().copied().max().unwrap_or(1);
    match cfg.n {
        SentenceLen::Fixed(n) => n,
        SentenceLen::Auto => corpus::suggest_sentence_len(train, cfg.tokenizer).max(max_width),
    }
}

fn ensure_out_dir(cfg: &RunConfig) -> CliResult<PathBuf> {
    let dir = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

fn write_text(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
}

fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::Data(format!("cannot read {}: {e}", path.display())))?;
    Ok(format!("{:x}", Sha256::digest(&bytes)))
}

fn build_model(cfg: &RunConfig, vocab: &Vocab, hyper: Hyperparams) -> CliResult<OpcnnModel> {
    match &cfg.embedding_file {
        Some(path) => {
            let (table, dim) = load_word2vec_text(path)?;
            if dim != cfg.m {
                return Err(CliError::Config(format!(
                    "embedding file has dimension {dim}, config sets m = {}",
                    cfg.m
                )));
            }
            Ok(OpcnnModel::init_with_pretrained(
                vocab, hyper, cfg.seed, &table,
            )?)
        }
        None => Ok(OpcnnModel::init(vocab.size(), hyper, cfg.seed)?),
    }
}

/// Run manifest: effective config, derived per-purpose seeds, input file
/// checksums, and resolved quantities — everything needed to reproduce or
/// audit the run. Keys are sorted so manifests diff cleanly.
fn write_manifest(
    cfg: &RunConfig,
    out_dir: &Path,
    resolved: BTreeMap<String, serde_json::Value>,
) -> CliResult<PathBuf> {
    let mut seeds_map = BTreeMap::new();
    seeds_map.insert("root".to_owned(), cfg.seed);
    for label in [
        seeds::INIT,
        seeds::SHUFFLE,
        seeds::DROPOUT,
        seeds::DATA,
        "split",
    ] {
        seeds_map.insert(label.to_owned(), seeds::derive_seed(cfg.seed, label));
    }
    let mut inputs = BTreeMap::new();
    for path in [cfg.data.as_ref(), cfg.embedding_file.as_ref()]
        .into_iter()
        .flatten()
    {
        inputs.insert(path.clone(), sha256_file(Path::new(path))?);
    }
    let manifest = serde_json::json!({
        "config": cfg.echo(),
        "inputs": inputs,
        "resolved": resolved,
        "seeds": seeds_map,
    });
    let path = out_dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| CliError::Data(format!("manifest serialization: {e}")))?;
    write_text(&path, &text)?;
    Ok(path)
}

/// Trains a model per the config and writes checkpoint.json, history.csv
/// and manifest.json under `out_dir`.
pub fn cmd_train(cfg: &RunConfig) -> CliResult<String> {
    let out_dir = ensure_out_dir(cfg)?;
    let data = load_data(cfg)?;
    let (train_ds, valid_ds) = split_train_valid(&data, cfg.valid_fraction, cfg.seed);
    if train_ds.is_empty() {
        return Err(CliError::Data("training split is empty".into()));
    }
    let n = resolve_n(cfg, &train_ds);
    let vocab = corpus::build_vocab(&[&train_ds], cfg.tokenizer, cfg.min_count)?;
    let train_enc = corpus::encode_dataset(&train_ds, &vocab, cfg.tokenizer, n)?;
    let valid_enc = if valid_ds.is_empty() {
        None
    } else {
        Some(corpus::encode_dataset(&valid_ds, &vocab, cfg.tokenizer, n)?)
    };

    let model = build_model(cfg, &vocab, cfg.hyperparams(n))?;
    let (model, history) = train::train(model, &train_enc, valid_enc.as_ref(), &cfg.train_config())?;

    let ckpt_path = out_dir.join("checkpoint.json");
    save_checkpoint(&model, &vocab, &ckpt_path)?;
    write_text(&out_dir.join("history.csv"), &history.to_csv())?;

    let mut resolved = BTreeMap::new();
    resolved.insert("n".to_owned(), serde_json::json!(n));
    resolved.insert("vocab_size".to_owned(), serde_json::json!(vocab.size()));
    resolved.insert("train_docs".to_owned(), serde_json::json!(train_ds.len()));
    resolved.insert("valid_docs".to_owned(), serde_json::json!(valid_ds.len()));
    write_manifest(cfg, &out_dir, resolved)?;

    let last = history.epochs.last().expect("at least one epoch");
    let mut out = String::new();
    let _ = writeln!(out, "trained {} epochs on {} documents", history.epochs.len(), train_ds.len());
    let _ = writeln!(out, "final train_acc {:.6} loss {:.6}", last.train_acc, last.train_loss);
    if let Some(v) = last.valid_acc {
        let _ = writeln!(out, "final valid_acc {v:.6}");
    }
    let _ = writeln!(out, "checkpoint {}", ckpt_path.display());
    Ok(out)
}

/// Evaluates a checkpoint on the configured corpus and writes metrics.csv.
pub fn cmd_eval(cfg: &RunConfig, checkpoint: &Path) -> CliResult<String> {
    let out_dir = ensure_out_dir(cfg)?;
    let (model, vocab) = load_checkpoint(checkpoint)?;
    let data = load_data(cfg)?;
    let enc = corpus::encode_dataset(&data, &vocab, cfg.tokenizer, model.hyper.n)?;
    let (_, preds) = train::evaluate(&model, &enc)?;
    let counts = confusion(&preds, &enc.labels)?;
    let report = MethodReport::from_counts("opcnn", &counts);
    let csv = format!("{}\n{}\n", MethodReport::CSV_HEADER, report.csv_row());
    write_text(&out_dir.join("metrics.csv"), &csv)?;
    Ok(csv)
}

/// Classifies one document per input line: `label<TAB>p(deceptive)` to six
/// decimals, with an ALL_PAD marker when no token is in-vocabulary.
pub fn cmd_predict(cfg: &RunConfig, checkpoint: &Path, input: &str) -> CliResult<String> {
    let (model, vocab) = load_checkpoint(checkpoint)?;
    let mut out = String::new();
    for line in input.lines() {
        let tokens = corpus::tokenize(line, cfg.tokenizer);
        let ids = corpus::encode(&tokens, &vocab, model.hyper.n)?;
        let (label, p) = model.predict(&ids)?;
        let _ = write!(out, "{label}\t{p:.6}");
        if is_all_pad(&ids) {
            out.push_str("\tALL_PAD");
        }
        out.push('\n');
    }
    Ok(out)
}

/// Sentence length, embedding width, filter widths, filters per width, and
/// pooling k of the small model the gradient check runs on.
pub const GRADCHECK_MODEL: (usize, usize, &[usize], usize, usize) = (7, 4, &[2, 3], 2, 2);

/// Compares analytic gradients on a small fully-featured model against
/// central finite differences (ε = 1e-5) and reports the worst relative
/// error per parameter group. Fails (exit 4) above tolerance 1e-4.
pub fn cmd_gradcheck(seed: u64, inject_fault: bool) -> CliResult<String> {
    let (n, m, widths, filters_per_width, k) = GRADCHECK_MODEL;
    let hyper = Hyperparams {
        m,
        filter_widths: widths.to_vec(),
        filters_per_width,
        k,
        n,
        ..Hyperparams::default()
    };
    let vocab_size = 9;
    let model = OpcnnModel::init(vocab_size, hyper, seed)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let ids: Vec<usize> = (2..2 + n).collect();
    let fault = inject_fault.then_some(GradFault::ScaleKernelGrads(2.0));
    let report = grad_check(&model, &ids, 1, 1e-5, fault)?;

    let tolerance = 1e-4;
    let mut out = String::from("group,params,max_rel_err\n");
    for g in &report.groups {
        let _ = writeln!(out, "{},{},{:.3e}", g.name, g.params_checked, g.max_rel_err);
    }
    if report.passed(tolerance) {
        let _ = writeln!(out, "PASS max_rel_err {:.3e} < {tolerance:.0e}", report.max_rel_err());
        Ok(out)
    } else {
        let _ = writeln!(out, "FAIL max_rel_err {:.3e} >= {tolerance:.0e}", report.max_rel_err());
        Err(CliError::Numeric(out))
    }
}

fn svm_baseline(
    name: &str,
    train_feats: &[SparseVector],
    train_labels: &[u8],
    test_feats: &[SparseVector],
    test_labels: &[u8],
    dim: usize,
    cfg: &RunConfig,
) -> CliResult<MethodReport> {
    let labels: Vec<i8> = train_labels.iter().map(|&l| to_svm_label(l)).collect();
    let model = svm_train(
        dim,
        train_feats,
        &labels,
        cfg.svm_lambda,
        cfg.svm_epochs,
        seeds::derive_seed(cfg.seed, name),
    )?;
    let mut preds = Vec::with_capacity(test_feats.len());
    for x in test_feats {
        let (y, _) = svm_predict(&model, x)?;
        preds.push(u8::from(y == 1));
    }
    Ok(MethodReport::from_counts(
        name,
        &confusion(&preds, test_labels)?,
    ))
}

fn cnn_method(
    name: &str,
    hyper: Hyperparams,
    train_enc: &Encoded,
    test_enc: &Encoded,
    vocab_size: usize,
    train_cfg: &TrainConfig,
    seed: u64,
) -> CliResult<MethodReport> {
    let model = OpcnnModel::init(vocab_size, hyper, seeds::derive_seed(seed, name))?;
    let (model, _) = train::train(model, train_enc, None, train_cfg)?;
    let (_, preds) = train::evaluate(&model, test_enc)?;
    Ok(MethodReport::from_counts(
        name,
        &confusion(&preds, &test_enc.labels)?,
    ))
}

/// Trains and scores all four methods on one train/test split.
fn bench_on(cfg: &RunConfig, train_ds: &Dataset, test_ds: &Dataset) -> CliResult<Vec<MethodReport>> {
    let train_labels: Vec<u8> = train_ds.docs.iter().map(|d| d.label).collect();
    let test_labels: Vec<u8> = test_ds.docs.iter().map(|d| d.label).collect();

    let tfidf = TfidfExtractor::fit(train_ds, cfg.tokenizer, cfg.min_count)?;
    let tfidf_report = svm_baseline(
        "tfidf_svm",
        &tfidf.features(train_ds),
        &train_labels,
        &tfidf.features(test_ds),
        &test_labels,
        tfidf.dim(),
        cfg,
    )?;

    let bigram = BigramExtractor::fit(
        train_ds,
        cfg.tokenizer,
        cfg.min_count,
        BigramWeighting::Counts,
    )?;
    let bigram_report = svm_baseline(
        "bigram_svm",
        &bigram.features(train_ds),
        &train_labels,
        &bigram.features(test_ds),
        &test_labels,
        bigram.dim(),
        cfg,
    )?;

    let n = resolve_n(cfg, train_ds);
    let vocab = corpus::build_vocab(&[train_ds], cfg.tokenizer, cfg.min_count)?;
    let train_enc = corpus::encode_dataset(train_ds, &vocab, cfg.tokenizer, n)?;
    let test_enc = corpus::encode_dataset(test_ds, &vocab, cfg.tokenizer, n)?;
    let train_cfg = cfg.train_config();

    // Conventional max-pool CNN control: plain 1-max pooling, no affine.
    let cnn_hyper = Hyperparams {
        k: 1,
        pooling_affine_enabled: false,
        ..cfg.hyperparams(n)
    };
    let cnn_report = cnn_method(
        "cnn",
        cnn_hyper,
        &train_enc,
        &test_enc,
        vocab.size(),
        &train_cfg,
        cfg.seed,
    )?;
    let opcnn_report = cnn_method(
        "opcnn",
        cfg.hyperparams(n),
        &train_enc,
        &test_enc,
        vocab.size(),
        &train_cfg,
        cfg.seed,
    )?;

    Ok(vec![tfidf_report, bigram_report, cnn_report, opcnn_report])
}

/// Benchmarks the four methods (tf-idf+SVM control, bigram+SVM, max-pool
/// CNN, OPCNN) on one shared split, reporting per-method metrics and the
/// accuracy-gain ratio of each method against the tf-idf control. With
/// `bench_sweep = true` the comparison is repeated at increasing training
/// sizes. Writes bench.csv, alpha.csv and optionally bench_sweep.csv.
pub fn cmd_bench(cfg: &RunConfig) -> CliResult<String> {
    let out_dir = ensure_out_dir(cfg)?;
    let data = load_data(cfg)?;
    let (train_ds, test_ds) = split_train_valid(&data, cfg.valid_fraction, cfg.seed);
    if train_ds.is_empty() || test_ds.is_empty() {
        return Err(CliError::Data(
            "benchmark needs non-empty train and test splits".into(),
        ));
    }

    let reports = bench_on(cfg, &train_ds, &test_ds)?;
    let mut bench_csv = String::from(MethodReport::CSV_HEADER);
    bench_csv.push('\n');
    for r in &reports {
        let _ = writeln!(bench_csv, "{}", r.csv_row());
    }

    let control_acc = reports[0].accuracy.value;
    let mut alpha_csv = String::from("method,alpha\n");
    for r in &reports[1..] {
        let _ = writeln!(
            alpha_csv,
            "{},{:.6}",
            r.method,
            accuracy_gain(r.accuracy.value, control_acc)?
        );
    }

    write_text(&out_dir.join("bench.csv"), &bench_csv)?;
    write_text(&out_dir.join("alpha.csv"), &alpha_csv)?;

    let mut out = format!("{bench_csv}\n{alpha_csv}");
    if cfg.bench_sweep {
        let mut sweep_csv = String::from("train_size,method,accuracy\n");
        let mut idx: Vec<usize> = (0..train_ds.len()).collect();
        idx.shuffle(&mut seeds::rng_for(cfg.seed, "sweep"));
        for &size in &cfg.bench_sizes {
            let take = size.min(train_ds.len());
            let mut subset: Vec<usize> = idx[..take].to_vec();
            subset.sort_unstable();
            let sub_train = train_ds.select(&subset);
            for r in bench_on(cfg, &sub_train, &test_ds)? {
                let _ = writeln!(sweep_csv, "{take},{},{:.6}", r.method, r.accuracy.value);
            }
        }
        write_text(&out_dir.join("bench_sweep.csv"), &sweep_csv)?;
        let _ = write!(out, "\n{sweep_csv}");
    }
    Ok(out)
}

/// Cross-validated sweep over pooling sizes k; writes ksweep.csv.
pub fn cmd_ksweep(cfg: &RunConfig) -> CliResult<String> {
    let out_dir = ensure_out_dir(cfg)?;
    let data = load_data(cfg)?;
    let n = resolve_n(cfg, &data);
    let grid: Vec<(String, Hyperparams)> = cfg
        .ksweep_ks
        .iter()
        .map(|&k| {
            (
                format!("k={k}"),
                Hyperparams {
                    k,
                    ..cfg.hyperparams(n)
                },
            )
        })
        .collect();
    let rows = train::cv_sweep(
        &data,
        &grid,
        &cfg.train_config(),
        cfg.folds,
        cfg.seed,
        cfg.tokenizer,
        cfg.min_count,
    )?;
    let csv = sweep_csv(&rows);
    write_text(&out_dir.join("ksweep.csv"), &csv)?;
    Ok(csv)
}
