//! Tokenization, vocabulary construction, dataset loading (JSONL and the
//! public four-way opinion-corpus layout), deterministic splits, and a
//! synthetic word-order-sensitive task generator.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::seeds;
use crate::{Error, Result};

/// Reserved id for padding.
pub const PAD_ID: usize = 0;
/// Reserved id for out-of-vocabulary tokens.
pub const UNK_ID: usize = 1;

/// One labeled opinion. Label 0 = truthful, 1 = deceptive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub text: String,
    pub label: u8,
    /// Fold id from the on-disk layout, when the source provides one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fold: Option<usize>,
}

impl Document {
    pub fn new(text: impl Into<String>, label: u8) -> Self {
        Document {
            text: text.into(),
            label,
            fold: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Jsonl,
    Ott,
    Synthetic,
}

/// An ordered, immutable collection of documents.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub docs: Vec<Document>,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.docs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.docs.is_empty()
    }

    /// Deceptive (label 1) count.
    pub fn positives(&self) -> usize {
        self.docs.iter().filter(|d| d.label == 1).count()
    }

    /// Subset by index list, preserving the given order.
    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            docs: idx.iter().map(|&i| self.docs[i].clone()).collect(),
            provenance: self.provenance,
        }
    }

    /// Deterministic balanced downsampling: keeps all of the minority class
    /// and a seeded sample of the majority class of equal size.
    pub fn balanced(&self, seed: u64) -> Dataset {
        let pos: Vec<usize> = (0..self.len()).filter(|&i| self.docs[i].label == 1).collect();
        let neg: Vec<usize> = (0..self.len()).filter(|&i| self.docs[i].label == 0).collect();
        let (mut minority, mut majority) = if pos.len() <= neg.len() {
            (pos, neg)
        } else {
            (neg, pos)
        };
        let mut rng = seeds::rng_for(seed, "balance");
        majority.shuffle(&mut rng);
        majority.truncate(minority.len());
        minority.extend(majority);
        minority.sort_unstable();
        self.select(&minority)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenizeMode {
    /// Split on runs of Unicode whitespace (pre-segmented or English text).
    Whitespace,
    /// One token per non-whitespace character (unsegmented Chinese).
    Char,
}

impl std::str::FromStr for TokenizeMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "whitespace" => Ok(TokenizeMode::Whitespace),
            "char" => Ok(TokenizeMode::Char),
            other => Err(Error::InvalidArgument(format!(
                "unknown tokenizer mode '{other}' (expected whitespace|char)"
            ))),
        }
    }
}

pub fn tokenize(text: &str, mode: TokenizeMode) -> Vec<String> {
    match mode {
        TokenizeMode::Whitespace => text.split_whitespace().map(str::to_owned).collect(),
        TokenizeMode::Char => text
            .chars()
            .filter(|c| !c.is_whitespace())
            .map(String::from)
            .collect(),
    }
}

/// Token-to-id map with dense ids; 0 is padding, 1 is unknown.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocab {
    /// id -> token for ids >= 2; slots 0 and 1 hold reserved markers.
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl Vocab {
    fn from_tokens(tokens: Vec<String>) -> Self {
        let index = tokens
            .iter()
            .enumerate()
            .skip(2)
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Vocab { tokens, index }
    }

    /// Rebuilds the token index after deserialization.
    pub fn reindex(self) -> Self {
        Vocab::from_tokens(self.tokens)
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    /// Id of a token; out-of-vocabulary tokens map to [`UNK_ID`].
    pub fn id_of(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_ID)
    }

    pub fn token_of(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Builds a vocabulary from training datasets. Tokens with frequency of at
/// least `min_count` get ids from 2 upward in descending-frequency order,
/// ties broken by first occurrence.
pub fn build_vocab(datasets: &[&Dataset], mode: TokenizeMode, min_count: usize) -> Result<Vocab> {
    if min_count < 1 {
        return Err(Error::InvalidArgument("min_count must be >= 1".into()));
    }
    let mut counts: HashMap<String, (usize, usize)> = HashMap::new(); // token -> (count, first_seen)
    let mut next_seen = 0usize;
    for ds in datasets {
        for doc in &ds.docs {
            for tok in tokenize(&doc.text, mode) {
                let e = counts.entry(tok).or_insert_with(|| {
                    let s = next_seen;
                    next_seen += 1;
                    (0, s)
                });
                e.0 += 1;
            }
        }
    }
    let mut kept: Vec<(String, usize, usize)> = counts
        .into_iter()
        .filter(|(_, (c, _))| *c >= min_count)
        .map(|(t, (c, s))| (t, c, s))
        .collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));

    let mut tokens = vec!["<pad>".to_owned(), "<unk>".to_owned()];
    tokens.extend(kept.into_iter().map(|(t, _, _)| t));
    Ok(Vocab::from_tokens(tokens))
}

/// Encodes tokens to a fixed-length id sequence: pad-right with 0,
/// truncate the tail beyond `n`.
pub fn encode(tokens: &[String], vocab: &Vocab, n: usize) -> Result<Vec<usize>> {
    if n < 1 {
        return Err(Error::InvalidArgument("sentence length n must be >= 1".into()));
    }
    let mut ids = vec![PAD_ID; n];
    for (slot, tok) in ids.iter_mut().zip(tokens.iter()) {
        *slot = vocab.id_of(tok);
    }
    Ok(ids)
}

/// A dataset encoded to fixed-length id sequences, ready for the model.
#[derive(Debug, Clone)]
pub struct Encoded {
    pub ids: Vec<Vec<usize>>,
    pub labels: Vec<u8>,
}

impl Encoded {
    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

pub fn encode_dataset(
    dataset: &Dataset,
    vocab: &Vocab,
    mode: TokenizeMode,
    n: usize,
) -> Result<Encoded> {
    let mut ids = Vec::with_capacity(dataset.len());
    let mut labels = Vec::with_capacity(dataset.len());
    for doc in &dataset.docs {
        ids.push(encode(&tokenize(&doc.text, mode), vocab, n)?);
        labels.push(doc.label);
    }
    Ok(Encoded { ids, labels })
}

/// 95th-percentile token length of a dataset, rounded up, min 1.
pub fn suggest_sentence_len(dataset: &Dataset, mode: TokenizeMode) -> usize {
    let mut lens: Vec<usize> = dataset
        .docs
        .iter()
        .map(|d| tokenize(&d.text, mode).len())
        .collect();
    if lens.is_empty() {
        return 1;
    }
    lens.sort_unstable();
    let idx = ((lens.len() as f64) * 0.95).ceil() as usize;
    lens[idx.saturating_sub(1).min(lens.len() - 1)].max(1)
}

#[derive(Deserialize)]
struct JsonlRecord {
    text: String,
    label: i64,
}

/// Loads a JSONL corpus: one object per line with "text" and "label".
pub fn load_jsonl(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let content =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    parse_jsonl(&content).map_err(|e| {
        Error::Data(format!("{}: {e}", path.display()))
    })
}

fn parse_jsonl(content: &str) -> Result<Dataset> {
    let mut docs = Vec::new();
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: JsonlRecord = serde_json::from_str(line)
            .map_err(|e| Error::Data(format!("line {}: {e}", i + 1)))?;
        if rec.label != 0 && rec.label != 1 {
            return Err(Error::Data(format!(
                "line {}: label {} not in {{0,1}}",
                i + 1,
                rec.label
            )));
        }
        docs.push(Document::new(rec.text, rec.label as u8));
    }
    Ok(Dataset {
        docs,
        provenance: Provenance::Jsonl,
    })
}

/// Writes a dataset in the JSONL corpus format.
pub fn write_jsonl(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    for doc in &dataset.docs {
        let rec = serde_json::json!({"text": doc.text, "label": doc.label});
        let _ = writeln!(out, "{rec}");
    }
    std::fs::write(path, out).map_err(|e| Error::io(path.display().to_string(), e))
}

/// Loads the public four-way opinion corpus:
/// `<root>/<polarity>_polarity/<class>_from_<source>/fold<1..5>/*.txt`,
/// collapsed to binary truthful(0)/deceptive(1). Fold ids are retained.
pub fn load_ott(root: impl AsRef<Path>) -> Result<Dataset> {
    let root = root.as_ref();
    let mut docs = Vec::new();
    for polarity in ["negative_polarity", "positive_polarity"] {
        let pol_dir = root.join(polarity);
        if !pol_dir.is_dir() {
            return Err(Error::Data(format!(
                "missing directory {}",
                pol_dir.display()
            )));
        }
        // Class dirs are named e.g. truthful_from_TripAdvisor, deceptive_from_MTurk.
        let mut class_dirs: Vec<(u8, std::path::PathBuf)> = Vec::new();
        let mut entries: Vec<_> = std::fs::read_dir(&pol_dir)
            .map_err(|e| Error::io(pol_dir.display().to_string(), e))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        entries.sort();
        for p in entries {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            if name.starts_with("truthful") {
                class_dirs.push((0, p));
            } else if name.starts_with("deceptive") {
                class_dirs.push((1, p));
            }
        }
        if class_dirs.len() != 2 {
            return Err(Error::Data(format!(
                "{}: expected one truthful_* and one deceptive_* directory, found {}",
                pol_dir.display(),
                class_dirs.len()
            )));
        }
        for (label, class_dir) in class_dirs {
            for fold in 1..=5usize {
                let fold_dir = class_dir.join(format!("fold{fold}"));
                if !fold_dir.is_dir() {
                    return Err(Error::Data(format!(
                        "missing directory {}",
                        fold_dir.display()
                    )));
                }
                let mut files: Vec<_> = std::fs::read_dir(&fold_dir)
                    .map_err(|e| Error::io(fold_dir.display().to_string(), e))?
                    .filter_map(|e| e.ok().map(|e| e.path()))
                    .filter(|p| p.extension().is_some_and(|e| e == "txt"))
                    .collect();
                files.sort();
                for file in files {
                    let text = std::fs::read_to_string(&file)
                        .map_err(|e| Error::io(file.display().to_string(), e))?;
                    docs.push(Document {
                        text: text.trim().to_owned(),
                        label,
                        fold: Some(fold),
                    });
                }
            }
        }
    }
    Ok(Dataset {
        docs,
        provenance: Provenance::Ott,
    })
}

/// Deterministic k-fold partition of document indices. Fold sizes differ by
/// at most one; the shuffle is a pure function of the seed.
pub fn kfold_split(dataset: &Dataset, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidArgument("k must be >= 2".into()));
    }
    if k > dataset.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {} exceeds dataset size {}",
            k,
            dataset.len()
        )));
    }
    let mut idx: Vec<usize> = (0..dataset.len()).collect();
    let mut rng = seeds::rng_for(seed, "kfold");
    idx.shuffle(&mut rng);

    let base = dataset.len() / k;
    let rem = dataset.len() % k;
    let mut folds = Vec::with_capacity(k);
    let mut cursor = 0;
    for f in 0..k {
        let size = base + usize::from(f < rem);
        folds.push(idx[cursor..cursor + size].to_vec());
        cursor += size;
    }
    Ok(folds)
}

/// Marker tokens used by the synthetic order task.
pub const MARKER_A: &str = "MA";
pub const MARKER_B: &str = "MB";

/// Generates the synthetic word-order task: each document contains the two
/// marker tokens exactly once, separated by at least `min_gap` fillers;
/// label 1 iff MA precedes MB. Class balance is exact to ±1.
///
/// Every document has the same length (`min_gap` + 13 tokens) and both
/// markers stay at least four tokens from either end. Marker positions and
/// filler draws are sampled independently of the label, so neither padding
/// nor matrix boundaries carry class information — only the relative order
/// of the two markers does.
pub fn gen_order_task(
    n_samples: usize,
    filler_vocab_size: usize,
    min_gap: usize,
    seed: u64,
) -> Result<Dataset> {
    if min_gap < 1 {
        return Err(Error::InvalidArgument("min_gap must be >= 1".into()));
    }
    if filler_vocab_size < 1 {
        return Err(Error::InvalidArgument(
            "filler_vocab_size must be >= 1".into(),
        ));
    }
    // One less than the widest default filter: a window that touches a
    // boundary can then never contain a marker.
    const MARGIN: usize = 4;
    let len = min_gap + 3 + 2 + 2 * MARGIN;
    let mut rng = seeds::rng_for(seed, seeds::DATA);
    let filler = |rng: &mut rand_chacha::ChaCha8Rng| -> String {
        format!("f{}", rng.random_range(0..filler_vocab_size))
    };
    let mut docs = Vec::with_capacity(n_samples);
    for i in 0..n_samples {
        let label = (i % 2 == 0) as u8; // alternating labels keep balance exact
        let gap = rng.random_range(min_gap..=min_gap + 3);
        let slack = min_gap + 3 - gap;
        let prefix = MARGIN + rng.random_range(0..=slack);
        let suffix = len - prefix - gap - 2;
        let (first, second) = if label == 1 {
            (MARKER_A, MARKER_B)
        } else {
            (MARKER_B, MARKER_A)
        };
        let mut toks: Vec<String> = Vec::with_capacity(len);
        for _ in 0..prefix {
            toks.push(filler(&mut rng));
        }
        toks.push(first.to_owned());
        for _ in 0..gap {
            toks.push(filler(&mut rng));
        }
        toks.push(second.to_owned());
        for _ in 0..suffix {
            toks.push(filler(&mut rng));
        }
        debug_assert_eq!(toks.len(), len);
        docs.push(Document::new(toks.join(" "), label));
    }
    Ok(Dataset {
        docs,
        provenance: Provenance::Synthetic,
    })
}
