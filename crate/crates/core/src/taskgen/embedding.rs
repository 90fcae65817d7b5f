//! Word-embedding tables in the whitespace-separated text format
//! (`token v1 v2 ... vd` per line).

use std::collections::{HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f32>>,
}

impl EmbeddingTable {
    pub fn from_vectors(dim: usize, vectors: HashMap<String, Vec<f32>>) -> Result<Self> {
        for v in vectors.values() {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: v.len(),
                });
            }
        }
        Ok(Self { dim, vectors })
    }

    /// Reads a table. The dimension is taken from the first record; a
    /// leading `count dim` header line is skipped. When `keep` is given only
    /// those tokens are retained.
    pub fn read<R: BufRead>(reader: R, source: &Path, keep: Option<&HashSet<String>>) -> Result<Self> {
        let mut dim = 0usize;
        let mut vectors = HashMap::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| Error::io(source, e))?;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse {
                path: source.to_path_buf(),
                line: lineno + 1,
                column: 1,
                message,
            };
            if lineno == 0 && fields.len() == 2 && fields.iter().all(|f| f.parse::<u64>().is_ok()) {
                continue;
            }
            if dim == 0 {
                if fields.len() < 2 {
                    return Err(err("embedding record without values".into()));
                }
                dim = fields.len() - 1;
            }
            if fields.len() != dim + 1 {
                return Err(err(format!(
                    "dimension mismatch: expected {dim} values, found {}",
                    fields.len().saturating_sub(1)
                )));
            }
            let token = fields[0];
            if keep.is_some_and(|k| !k.contains(token)) {
                continue;
            }
            let values = fields[1..]
                .iter()
                .map(|f| match f.parse::<f32>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(err(format!("invalid value {f:?}"))),
                })
                .collect::<Result<Vec<f32>>>()?;
            vectors.insert(token.to_string(), values);
        }
        Ok(Self { dim, vectors })
    }

    pub fn load(path: &Path, keep: Option<&HashSet<String>>) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(std::io::BufReader::new(file), path, keep)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f32]> {
        self.vectors.get(word).map(Vec::as_slice)
    }

    /// Mean of the in-vocabulary constituent vectors of a (possibly
    /// multiword) surface; `None` when no constituent is known.
    pub fn embed_keyword(&self, surface: &str) -> Option<Vec<f64>> {
        let mut sum = vec![0.0f64; self.dim];
        let mut hits = 0usize;
        for word in surface.split_whitespace() {
            if let Some(v) = self.get(word) {
                for (s, x) in sum.iter_mut().zip(v) {
                    *s += f64::from(*x);
                }
                hits += 1;
            }
        }
        if hits == 0 {
            return None;
        }
        sum.iter_mut().for_each(|s| *s /= hits as f64);
        Some(sum)
    }
}
