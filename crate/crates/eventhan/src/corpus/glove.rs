use std::collections::HashMap;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::CorpusError;

/// What an [`EmbeddingTable`] returns for tokens it has never seen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OovPolicy {
    /// The zero vector.
    #[default]
    Zero,
    /// The mean of all loaded vectors.
    Mean,
}

/// Token-to-vector map loaded from a GloVe-format text file.
#[derive(Debug, Clone)]
pub struct EmbeddingTable {
    dim: usize,
    vectors: HashMap<String, Vec<f64>>,
    order: Vec<String>,
    oov: OovPolicy,
    fallback: Vec<f64>,
}

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Vector for `token`, or the policy fallback when absent.
    pub fn get(&self, token: &str) -> &[f64] {
        self.vectors
            .get(token)
            .map(Vec::as_slice)
            .unwrap_or(&self.fallback)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vectors.contains_key(token)
    }

    /// Entries in file order, for seeding a trainable table.
    pub fn entries(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.order
            .iter()
            .map(move |t| (t.as_str(), self.vectors[t].as_slice()))
    }
}

/// Load `token v1 … vd` lines. The dimension is inferred from the first
/// line; any later line with a different width is an error naming its line
/// number. Duplicate tokens keep the first occurrence.
pub fn load_glove(path: &Path, oov: OovPolicy) -> Result<EmbeddingTable, CorpusError> {
    let file = std::fs::File::open(path).map_err(|e| CorpusError::io(path, e))?;
    let reader = BufReader::new(file);

    let mut dim = 0usize;
    let mut vectors: HashMap<String, Vec<f64>> = HashMap::new();
    let mut order = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CorpusError::io(path, e))?;
        let lineno = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().expect("non-empty line").to_string();
        let values: Vec<f64> = parts
            .map(|p| p.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| CorpusError::Malformed {
                path: path.display().to_string(),
                line: lineno,
                message: format!("bad float: {e}"),
            })?;
        if dim == 0 {
            if values.is_empty() {
                return Err(CorpusError::Malformed {
                    path: path.display().to_string(),
                    line: lineno,
                    message: "first line has no vector values".into(),
                });
            }
            dim = values.len();
        } else if values.len() != dim {
            return Err(CorpusError::Malformed {
                path: path.display().to_string(),
                line: lineno,
                message: format!("dimension {} does not match {}", values.len(), dim),
            });
        }
        if !vectors.contains_key(&token) {
            order.push(token.clone());
            vectors.insert(token, values);
        }
    }

    let fallback = match oov {
        OovPolicy::Zero => vec![0.0; dim],
        OovPolicy::Mean => {
            let mut mean = vec![0.0; dim];
            for v in vectors.values() {
                for (m, x) in mean.iter_mut().zip(v) {
                    *m += x;
                }
            }
            let n = vectors.len().max(1) as f64;
            for m in &mut mean {
                *m /= n;
            }
            mean
        }
    };

    Ok(EmbeddingTable {
        dim,
        vectors,
        order,
        oov,
        fallback,
    })
}

impl EmbeddingTable {
    pub fn policy(&self) -> OovPolicy {
        self.oov
    }
}
