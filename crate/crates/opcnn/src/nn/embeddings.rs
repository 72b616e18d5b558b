//! Loader for the word2vec text format: header line "V m", then one line
//! per word with m space-separated decimal floats.

use std::collections::HashMap;
use std::path::Path;

use crate::{Error, Result};

/// Returns (token -> vector, dimension).
pub fn load_word2vec_text(path: impl AsRef<Path>) -> Result<(HashMap<String, Vec<f64>>, usize)> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Data(format!("{}: empty embedding file", path.display())))?;
    let mut parts = header.split_whitespace();
    let count: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Data(format!("{}: bad header '{header}'", path.display())))?;
    let dim: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Data(format!("{}: bad header '{header}'", path.display())))?;

    let mut table = HashMap::with_capacity(count);
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = line.split_whitespace();
        let token = fields
            .next()
            .ok_or_else(|| Error::Data(format!("{}: line {}: empty", path.display(), i + 2)))?;
        let vec: Vec<f64> = fields
            .map(|f| {
                f.parse::<f64>().map_err(|e| {
                    Error::Data(format!("{}: line {}: {e}", path.display(), i + 2))
                })
            })
            .collect::<Result<_>>()?;
        if vec.len() != dim {
            return Err(Error::Data(format!(
                "{}: line {}: expected {dim} values, got {}",
                path.display(),
                i + 2,
                vec.len()
            )));
        }
        table.insert(token.to_owned(), vec);
    }
    if table.len() != count {
        return Err(Error::Data(format!(
            "{}: header promises {count} words, file holds {}",
            path.display(),
            table.len()
        )));
    }
    Ok((table, dim))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_word2vec_text() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vecs.txt");
        std::fs::write(&p, "2 3\nhotel 0.1 0.2 0.3\ngood -1 0 1\n").unwrap();
        let (table, dim) = load_word2vec_text(&p).unwrap();
        assert_eq!(dim, 3);
        assert_eq!(table["hotel"], vec![0.1, 0.2, 0.3]);
        assert_eq!(table["good"], vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("vecs.txt");
        std::fs::write(&p, "1 3\nhotel 0.1 0.2\n").unwrap();
        assert!(load_word2vec_text(&p).is_err());
    }
}
