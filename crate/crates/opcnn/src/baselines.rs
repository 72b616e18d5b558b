//! Classical baselines: tf-idf and bigram features feeding a linear SVM
//! trained by primal stochastic subgradient descent (Pegasos-style steps
//! with learning rate 1/(λ·t), final iterate returned).

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;

use crate::corpus::{tokenize, Dataset, TokenizeMode};
use crate::seeds;
use crate::{Error, Result};

/// Ordered (feature id, value) pairs with strictly increasing ids and
/// nonzero finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVector {
    entries: Vec<(usize, f64)>,
}

impl SparseVector {
    pub fn new(mut entries: Vec<(usize, f64)>) -> Result<Self> {
        entries.retain(|&(_, v)| v != 0.0);
        entries.sort_by_key(|&(id, _)| id);
        for w in entries.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::InvalidArgument(format!(
                    "duplicate feature id {}",
                    w[0].0
                )));
            }
        }
        for &(id, v) in &entries {
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("feature {id} is {v}")));
            }
        }
        Ok(SparseVector { entries })
    }

    pub fn empty() -> Self {
        SparseVector { entries: vec![] }
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn l2_norm(&self) -> f64 {
        self.entries.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt()
    }

    pub fn l2_normalized(mut self) -> Self {
        let norm = self.l2_norm();
        if norm > 0.0 {
            for e in &mut self.entries {
                e.1 /= norm;
            }
        }
        self
    }

    fn from_counts(counts: HashMap<usize, f64>) -> Self {
        let mut entries: Vec<(usize, f64)> = counts.into_iter().collect();
        entries.sort_by_key(|&(id, _)| id);
        SparseVector { entries }
    }
}

/// tf-idf feature extractor. idf is fit on the training split only:
/// idf = ln((1+N)/(1+df)) + 1, tf is the raw in-document count, and every
/// nonzero vector is L2-normalized.
#[derive(Debug, Clone)]
pub struct TfidfExtractor {
    vocab: HashMap<String, usize>,
    idf: Vec<f64>,
    mode: TokenizeMode,
}

impl TfidfExtractor {
    pub fn fit(train: &Dataset, mode: TokenizeMode, min_count: usize) -> Result<Self> {
        if min_count < 1 {
            return Err(Error::InvalidArgument("min_count must be >= 1".into()));
        }
        let mut counts: HashMap<String, usize> = HashMap::new();
        let mut df: HashMap<String, usize> = HashMap::new();
        for doc in &train.docs {
            let toks = tokenize(&doc.text, mode);
            let mut seen: Vec<&String> = Vec::new();
            for t in &toks {
                *counts.entry(t.clone()).or_insert(0) += 1;
            }
            for t in &toks {
                if !seen.contains(&t) {
                    seen.push(t);
                    *df.entry(t.clone()).or_insert(0) += 1;
                }
            }
        }
        let mut kept: Vec<String> = counts
            .iter()
            .filter(|(_, &c)| c >= min_count)
            .map(|(t, _)| t.clone())
            .collect();
        kept.sort();
        let n = train.len() as f64;
        let mut vocab = HashMap::with_capacity(kept.len());
        let mut idf = Vec::with_capacity(kept.len());
        for (i, tok) in kept.into_iter().enumerate() {
            let d = df.get(&tok).copied().unwrap_or(0) as f64;
            idf.push(((1.0 + n) / (1.0 + d)).ln() + 1.0);
            vocab.insert(tok, i);
        }
        Ok(TfidfExtractor { vocab, idf, mode })
    }

    pub fn dim(&self) -> usize {
        self.idf.len()
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn features(&self, docs: &Dataset) -> Vec<SparseVector> {
        docs.docs
            .iter()
            .map(|doc| {
                let mut counts: HashMap<usize, f64> = HashMap::new();
                for tok in tokenize(&doc.text, self.mode) {
                    if let Some(&id) = self.vocab.get(&tok) {
                        *counts.entry(id).or_insert(0.0) += 1.0;
                    }
                }
                for (id, v) in counts.iter_mut() {
                    *v *= self.idf[*id];
                }
                SparseVector::from_counts(counts).l2_normalized()
            })
            .collect()
    }
}

/// How bigram features are weighted before L2 normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BigramWeighting {
    #[default]
    Counts,
    Presence,
}

/// Adjacent-token-pair features, fit on the training split.
#[derive(Debug, Clone)]
pub struct BigramExtractor {
    vocab: HashMap<String, usize>,
    mode: TokenizeMode,
    weighting: BigramWeighting,
}

pub fn bigrams(tokens: &[String]) -> Vec<String> {
    tokens.windows(2).map(|w| format!("{}_{}", w[0], w[1])).collect()
}

impl BigramExtractor {
    pub fn fit(
        train: &Dataset,
        mode: TokenizeMode,
        min_count: usize,
        weighting: BigramWeighting,
    ) -> Result<Self> {
        if min_count < 1 {
            return Err(Error::InvalidArgument("min_count must be >= 1".into()));
        }
        let mut counts: HashMap<String, usize> = HashMap::new();
        for doc in &train.docs {
            for bg in bigrams(&tokenize(&doc.text, mode)) {
                *counts.entry(bg).or_insert(0) += 1;
            }
        }
        let mut kept: Vec<String> = counts
            .into_iter()
            .filter(|&(_, c)| c >= min_count)
            .map(|(t, _)| t)
            .collect();
        kept.sort();
        let vocab = kept.into_iter().enumerate().map(|(i, t)| (t, i)).collect();
        Ok(BigramExtractor {
            vocab,
            mode,
            weighting,
        })
    }

    pub fn dim(&self) -> usize {
        self.vocab.len()
    }

    pub fn features(&self, docs: &Dataset) -> Vec<SparseVector> {
        docs.docs
            .iter()
            .map(|doc| {
                let toks = tokenize(&doc.text, self.mode);
                let mut counts: HashMap<usize, f64> = HashMap::new();
                for bg in bigrams(&toks) {
                    if let Some(&id) = self.vocab.get(&bg) {
                        match self.weighting {
                            BigramWeighting::Counts => *counts.entry(id).or_insert(0.0) += 1.0,
                            BigramWeighting::Presence => {
                                counts.entry(id).or_insert(1.0);
                            }
                        }
                    }
                }
                SparseVector::from_counts(counts).l2_normalized()
            })
            .collect()
    }
}

/// Dense-weight linear classifier over a fixed sparse feature space.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }
}

fn sparse_dot(w: &[f64], x: &SparseVector) -> Result<f64> {
    let mut acc = 0.0;
    for &(id, v) in x.entries() {
        if id >= w.len() {
            return Err(Error::InvalidArgument(format!(
                "feature id {} out of range for model dimension {}",
                id,
                w.len()
            )));
        }
        acc += w[id] * v;
    }
    Ok(acc)
}

/// Primal hinge-loss stochastic subgradient training. Step size 1/(λ·t);
/// the bias is updated on margin violations but not regularized.
pub fn svm_train(
    dim: usize,
    features: &[SparseVector],
    labels: &[i8],
    lambda: f64,
    epochs: usize,
    seed: u64,
) -> Result<LinearModel> {
    if lambda <= 0.0 {
        return Err(Error::InvalidArgument("lambda must be > 0".into()));
    }
    if features.is_empty() {
        return Err(Error::InvalidArgument("no training features".into()));
    }
    if features.len() != labels.len() {
        return Err(Error::InvalidArgument(format!(
            "{} features vs {} labels",
            features.len(),
            labels.len()
        )));
    }
    if labels.iter().any(|&y| y != 1 && y != -1) {
        return Err(Error::InvalidArgument("labels must be -1 or +1".into()));
    }

    let mut w = vec![0.0f64; dim];
    let mut b = 0.0f64;
    let mut rng = seeds::rng_for(seed, seeds::SHUFFLE);
    let mut t = 0u64;
    for _ in 0..epochs {
        let mut order: Vec<usize> = (0..features.len()).collect();
        order.shuffle(&mut rng);
        for i in order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64);
            let y = labels[i] as f64;
            let margin = y * (sparse_dot(&w, &features[i])? + b);
            let shrink = 1.0 - eta * lambda; // = 1 - 1/t
            for v in &mut w {
                *v *= shrink;
            }
            if margin < 1.0 {
                for &(id, x) in features[i].entries() {
                    w[id] += eta * y * x;
                }
                b += eta * y;
            }
        }
    }
    Ok(LinearModel { weights: w, bias: b })
}

/// sign(w·x + b) with ties (score exactly 0) resolved to +1; the raw margin
/// score is returned alongside.
pub fn svm_predict(model: &LinearModel, x: &SparseVector) -> Result<(i8, f64)> {
    let score = sparse_dot(&model.weights, x)? + model.bias;
    Ok((if score >= 0.0 { 1 } else { -1 }, score))
}

/// Pegasos objective λ/2·‖w‖² + mean hinge loss.
pub fn svm_objective(
    model: &LinearModel,
    features: &[SparseVector],
    labels: &[i8],
    lambda: f64,
) -> Result<f64> {
    let norm_sq: f64 = model.weights.iter().map(|w| w * w).sum();
    let mut hinge = 0.0;
    for (x, &y) in features.iter().zip(labels) {
        let margin = y as f64 * (sparse_dot(&model.weights, x)? + model.bias);
        hinge += (1.0 - margin).max(0.0);
    }
    Ok(lambda / 2.0 * norm_sq + hinge / features.len() as f64)
}

/// Mean hinge loss only.
pub fn hinge_loss(model: &LinearModel, features: &[SparseVector], labels: &[i8]) -> Result<f64> {
    let mut hinge = 0.0;
    for (x, &y) in features.iter().zip(labels) {
        let margin = y as f64 * (sparse_dot(&model.weights, x)? + model.bias);
        hinge += (1.0 - margin).max(0.0);
    }
    Ok(hinge / features.len() as f64)
}

/// Maps corpus labels {0,1} to SVM labels {−1,+1} (1 = deceptive = +1).
pub fn to_svm_label(label: u8) -> i8 {
    if label == 1 {
        1
    } else {
        -1
    }
}

/// Sparse text dump: one line per document, `label id:value id:value ...`.
pub fn dump_features(features: &[SparseVector], labels: &[i8]) -> String {
    let mut out = String::new();
    for (x, y) in features.iter().zip(labels) {
        let _ = write!(out, "{y}");
        for &(id, v) in x.entries() {
            let _ = write!(out, " {id}:{v:.6}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Provenance};

    fn ds(texts: &[&str]) -> Dataset {
        Dataset {
            docs: texts.iter().map(|t| Document::new(*t, 0)).collect(),
            provenance: Provenance::Jsonl,
        }
    }

    #[test]
    fn sparse_vector_rejects_duplicates() {
        assert!(SparseVector::new(vec![(1, 1.0), (1, 2.0)]).is_err());
        let v = SparseVector::new(vec![(3, 1.0), (1, 2.0), (2, 0.0)]).unwrap();
        assert_eq!(v.entries(), &[(1, 2.0), (3, 1.0)]);
    }

    #[test]
    fn tfidf_idf_formula() {
        let train = ds(&["a b", "b"]);
        let ex = TfidfExtractor::fit(&train, TokenizeMode::Whitespace, 1).unwrap();
        // "a": df=1, N=2 -> ln(3/2)+1
        let a_id = *ex.vocab.get("a").unwrap();
        assert!((ex.idf[a_id] - ((3.0f64 / 2.0).ln() + 1.0)).abs() < 1e-9);
        assert!((ex.idf[a_id] - 1.405465).abs() < 1e-6);

        // OOV tokens contribute nothing.
        let test = ds(&["z z z"]);
        let feats = ex.features(&test);
        assert!(feats[0].is_empty());

        // Nonzero vectors are unit length.
        let feats = ex.features(&train);
        assert!((feats[0].l2_norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn tfidf_no_leakage_from_test_split() {
        let train = ds(&["a b c", "b c", "c"]);
        let ex = TfidfExtractor::fit(&train, TokenizeMode::Whitespace, 1).unwrap();
        let idf_before = ex.idf().to_vec();
        let test = ds(&["a a a b", "totally new tokens"]);
        let _ = ex.features(&test);
        assert_eq!(ex.idf(), &idf_before[..]);
    }

    #[test]
    fn bigram_adjacency() {
        assert_eq!(
            bigrams(&["a".into(), "b".into(), "c".into()]),
            vec!["a_b", "b_c"]
        );
        assert!(bigrams(&["a".into()]).is_empty());

        let train = ds(&["a b a b"]);
        let ex = BigramExtractor::fit(&train, TokenizeMode::Whitespace, 1, BigramWeighting::Counts)
            .unwrap();
        let feats = ex.features(&train);
        // pairs: a_b, b_a, a_b -> a_b count 2, b_a count 1, then L2 norm.
        let ab = *ex.vocab.get("a_b").unwrap();
        let ba = *ex.vocab.get("b_a").unwrap();
        let get = |id: usize| {
            feats[0]
                .entries()
                .iter()
                .find(|&&(i, _)| i == id)
                .map(|&(_, v)| v)
                .unwrap()
        };
        assert!((get(ab) / get(ba) - 2.0).abs() < 1e-12);

        // Distinct bigram count bounded by len(tokens) - 1.
        assert!(feats[0].len() <= 3);

        let single = ds(&["a"]);
        assert!(ex.features(&single)[0].is_empty());
    }

    #[test]
    fn svm_separable_toy_set() {
        let features = vec![
            SparseVector::new(vec![(0, 1.0)]).unwrap(),
            SparseVector::new(vec![(1, 1.0)]).unwrap(),
        ];
        let labels = vec![1, -1];
        let init = LinearModel {
            weights: vec![0.0, 0.0],
            bias: 0.0,
        };
        let initial_obj = svm_objective(&init, &features, &labels, 0.1).unwrap();
        let model = svm_train(2, &features, &labels, 0.1, 100, 1).unwrap();
        assert_eq!(hinge_loss(&model, &features, &labels).unwrap(), 0.0);
        assert!(svm_objective(&model, &features, &labels, 0.1).unwrap() < initial_obj);
        assert_eq!(svm_predict(&model, &features[0]).unwrap().0, 1);
        assert_eq!(svm_predict(&model, &features[1]).unwrap().0, -1);
    }

    #[test]
    fn margin_violation_free_step_is_pure_shrinkage() {
        // One sample with huge margin after the first step: the second epoch
        // at t=2 only shrinks w by (1 - 1/t) = 0.5.
        let features = vec![SparseVector::new(vec![(0, 10.0)]).unwrap()];
        let labels = vec![1];
        let after_one = svm_train(1, &features, &labels, 1.0, 1, 0).unwrap();
        assert_eq!(after_one.weights[0], 10.0);
        let after_two = svm_train(1, &features, &labels, 1.0, 2, 0).unwrap();
        assert_eq!(after_two.weights[0], 5.0);
        assert_eq!(after_two.bias, after_one.bias);
    }

    #[test]
    fn svm_determinism_and_errors() {
        let features = vec![
            SparseVector::new(vec![(0, 1.0), (2, -1.0)]).unwrap(),
            SparseVector::new(vec![(1, 0.5)]).unwrap(),
        ];
        let labels = vec![1, -1];
        let a = svm_train(3, &features, &labels, 0.01, 10, 7).unwrap();
        let b = svm_train(3, &features, &labels, 0.01, 10, 7).unwrap();
        assert_eq!(a, b);

        assert!(svm_train(3, &features, &[1, 0], 0.01, 10, 7).is_err());

        let model = LinearModel {
            weights: vec![1.0, -1.0],
            bias: 0.0,
        };
        let x = SparseVector::new(vec![(0, 2.0)]).unwrap();
        assert_eq!(svm_predict(&model, &x).unwrap(), (1, 2.0));
        let zero = LinearModel {
            weights: vec![0.0, 0.0],
            bias: 0.0,
        };
        assert_eq!(svm_predict(&zero, &x).unwrap().0, 1); // tie -> +1
        let oob = SparseVector::new(vec![(5, 1.0)]).unwrap();
        assert!(svm_predict(&model, &oob).is_err());
    }

    #[test]
    fn feature_dump_format() {
        let features = vec![SparseVector::new(vec![(0, 1.0), (3, 0.5)]).unwrap()];
        let dump = dump_features(&features, &[-1]);
        assert_eq!(dump, "-1 0:1.000000 3:0.500000\n");
    }
}
