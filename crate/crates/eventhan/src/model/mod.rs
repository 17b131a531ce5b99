//! Hierarchical attention network over event streams.
//!
//! Events are embedded (composed from word vectors or fetched precomputed),
//! pooled per news by an event-level bi-GRU + attention block, pooled per day
//! by a news-level block, and pooled across the day window by a temporal
//! block; an MLP head maps the window vector to class logits.

mod attention;
mod forward;
mod gru;
mod params;

pub use attention::attention_pool;
pub use forward::{explain, forward, forward_graph, AttentionTrace, ExplainedEvent, ForwardPass};
pub use gru::bigru;
pub use params::{
    AttentionParams, DenseParams, EmbeddingParams, GruParams, HanParams, LevelParams, MlpParams,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::AutodiffError;

/// How raw event tuples become vectors at the bottom of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmbedderMode {
    /// Tokenize `a1 ∥ p ∥ a2`, truncate to `max_words`, look word vectors up
    /// in a trainable table, and pool them with a word-level bi-GRU +
    /// attention block.
    WordCompose,
    /// Fetch a precomputed vector per event from an external store.
    Precomputed,
}

/// Shape of the network. `event_dim` is derived for word-compose mode
/// (the pooled word state is `2 * hidden` wide) and equals the store
/// dimension in precomputed mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HanConfig {
    pub mode: EmbedderMode,
    pub word_dim: usize,
    pub event_dim: usize,
    pub hidden: usize,
    pub attention_dim: usize,
    pub classes: usize,
    pub mlp_hidden: Vec<usize>,
    pub max_words: usize,
}

impl HanConfig {
    /// Small dimensions that train in seconds on a single core.
    pub fn desk(classes: usize) -> Self {
        let hidden = 64;
        HanConfig {
            mode: EmbedderMode::WordCompose,
            word_dim: 50,
            event_dim: 2 * hidden,
            hidden,
            attention_dim: 64,
            classes,
            mlp_hidden: vec![64],
            max_words: 20,
        }
    }

    /// Full-scale preset: 1,024-wide recurrent and attention states,
    /// 20-word events.
    pub fn paper(classes: usize) -> Self {
        let hidden = 1024;
        HanConfig {
            mode: EmbedderMode::WordCompose,
            word_dim: 100,
            event_dim: 2 * hidden,
            hidden,
            attention_dim: 1024,
            classes,
            mlp_hidden: vec![1024],
            max_words: 20,
        }
    }

    pub fn with_word_dim(mut self, word_dim: usize) -> Self {
        self.word_dim = word_dim;
        self
    }

    pub fn with_hidden(mut self, hidden: usize, attention_dim: usize) -> Self {
        self.hidden = hidden;
        self.attention_dim = attention_dim;
        if self.mode == EmbedderMode::WordCompose {
            self.event_dim = 2 * hidden;
        }
        self
    }

    pub fn with_mlp_hidden(mut self, sizes: Vec<usize>) -> Self {
        self.mlp_hidden = sizes;
        self
    }

    pub fn precomputed(mut self, event_dim: usize) -> Self {
        self.mode = EmbedderMode::Precomputed;
        self.event_dim = event_dim;
        self
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = self.hidden > 0
            && self.attention_dim > 0
            && self.classes >= 2
            && self.event_dim > 0
            && self.max_words > 0
            && (self.mode == EmbedderMode::Precomputed
                || (self.word_dim > 0 && self.event_dim == 2 * self.hidden));
        if ok {
            Ok(())
        } else {
            Err(ModelError::BadConfig(format!("{self:?}")))
        }
    }
}

/// Identity of one extracted event within the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EventKey {
    pub news_id: String,
    pub sentence_idx: usize,
    pub ordinal: usize,
}

impl std::fmt::Display for EventKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/{}/{}", self.news_id, self.sentence_idx, self.ordinal)
    }
}

/// One event as the network consumes it: tokens for word-compose mode, or a
/// resolved vector for precomputed mode, plus display text for explanations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventInput {
    pub key: EventKey,
    pub text: String,
    pub tokens: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsInput {
    pub id: String,
    pub events: Vec<EventInput>,
}

/// One day bucket; an empty `news` list is a fully masked day.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DayInput {
    pub news: Vec<NewsInput>,
}

/// A K-day window, oldest day first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInput {
    pub days: Vec<DayInput>,
}

impl ModelInput {
    pub fn event_count(&self) -> usize {
        self.days
            .iter()
            .flat_map(|d| &d.news)
            .map(|n| n.events.len())
            .sum()
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    BadConfig(String),
    #[error("sample contains no events")]
    EmptySample,
    #[error("event {0} has no tokens")]
    EmptyEvent(String),
    #[error("no precomputed vector for event {0}")]
    MissingVector(String),
    #[error("precomputed vector for event {key} has dimension {got}, expected {expected}")]
    VectorDimension {
        key: String,
        got: usize,
        expected: usize,
    },
    #[error("bi-GRU over an empty sequence")]
    EmptySequence,
    #[error(transparent)]
    Autodiff(#[from] AutodiffError),
}
