//! Self-describing checkpoint: format version, hyperparameters, vocabulary,
//! and every parameter tensor with explicit shape, as key-ordered JSON so
//! checkpoints diff cleanly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Vocab;
use crate::{Error, Result};

use super::OpcnnModel;

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub vocab: Vocab,
    pub model: OpcnnModel,
}

pub fn save_checkpoint(model: &OpcnnModel, vocab: &Vocab, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ckpt = Checkpoint {
        format_version: CHECKPOINT_FORMAT_VERSION,
        vocab: vocab.clone(),
        model: model.clone(),
    };
    let text = serde_json::to_string_pretty(&ckpt)
        .map_err(|e| Error::Data(format!("checkpoint serialization: {e}")))?;
    std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(OpcnnModel, Vocab)> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let ckpt: Checkpoint = serde_json::from_str(&text)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    if ckpt.format_version != CHECKPOINT_FORMAT_VERSION {
        return Err(Error::Data(format!(
            "{}: unsupported checkpoint format version {}",
            path.display(),
            ckpt.format_version
        )));
    }
    let vocab = ckpt.vocab.reindex();
    let model = ckpt.model;
    model.hyper.validate()?;
    if model.embedding.rows() != vocab.size() {
        return Err(Error::Data(format!(
            "{}: embedding has {} rows but vocabulary has {} entries",
            path.display(),
            model.embedding.rows(),
            vocab.size()
        )));
    }
    if model.w_out.cols() != model.hyper.concat_dim() {
        return Err(Error::Data(format!(
            "{}: output weights have {} cols, hyperparameters imply {}",
            path.display(),
            model.w_out.cols(),
            model.hyper.concat_dim()
        )));
    }
    Ok((model, vocab))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_vocab, Dataset, Document, Provenance, TokenizeMode};
    use crate::nn::Hyperparams;

    #[test]
    fn roundtrip_preserves_model_and_vocab() {
        let ds = Dataset {
            docs: vec![Document::new("good hotel near park", 0)],
            provenance: Provenance::Jsonl,
        };
        let vocab = build_vocab(&[&ds], TokenizeMode::Whitespace, 1).unwrap();
        let h = Hyperparams {
            m: 3,
            filter_widths: vec![2],
            filters_per_width: 2,
            k: 2,
            n: 5,
            ..Hyperparams::default()
        };
        let model = OpcnnModel::init(vocab.size(), h, 5).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        save_checkpoint(&model, &vocab, &path).unwrap();
        let (loaded, loaded_vocab) = load_checkpoint(&path).unwrap();
        assert_eq!(loaded, model);
        assert_eq!(loaded_vocab.id_of("hotel"), vocab.id_of("hotel"));

        // Byte-identical re-serialization.
        let path2 = dir.path().join("model2.json");
        save_checkpoint(&loaded, &loaded_vocab, &path2).unwrap();
        assert_eq!(
            std::fs::read(&path).unwrap(),
            std::fs::read(&path2).unwrap()
        );
    }

    #[test]
    fn rejects_wrong_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        let ds = Dataset {
            docs: vec![Document::new("a b", 0)],
            provenance: Provenance::Jsonl,
        };
        let vocab = build_vocab(&[&ds], TokenizeMode::Whitespace, 1).unwrap();
        let h = Hyperparams {
            m: 2,
            filter_widths: vec![1],
            filters_per_width: 1,
            k: 1,
            n: 2,
            ..Hyperparams::default()
        };
        let model = OpcnnModel::init(vocab.size(), h, 1).unwrap();
        save_checkpoint(&model, &vocab, &path).unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"format_version\": 1", "\"format_version\": 99");
        std::fs::write(&path, text).unwrap();
        assert!(load_checkpoint(&path).is_err());
    }
}
