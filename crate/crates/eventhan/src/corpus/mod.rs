//! External data: price series, word-embedding files, precomputed event
//! vectors, and model checkpoints. Loaders reject malformed input rather
//! than repairing it; the one documented exception is the out-of-vocabulary
//! policy on embedding lookups.

mod checkpoint;
mod container;
mod glove;
mod prices;
mod vectors;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use glove::{load_glove, EmbeddingTable, OovPolicy};
pub use prices::{load_prices, PriceSeries};
pub use vectors::EventVectorStore;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Malformed {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{path}: bad magic, not a recognized container")]
    BadMagic { path: String },
    #[error("{path}: unsupported container version {version}")]
    BadVersion { path: String, version: u32 },
    #[error("{path}: truncated or corrupt container: {message}")]
    Corrupt { path: String, message: String },
    #[error("checkpoint carries unknown tensor {name}")]
    UnknownTensor { name: String },
    #[error("checkpoint is missing tensor {name}")]
    MissingTensor { name: String },
    #[error("checkpoint tensor {name} has shape {got:?}, expected {expected:?}")]
    TensorShape {
        name: String,
        got: Vec<usize>,
        expected: Vec<usize>,
    },
}

impl CorpusError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}
