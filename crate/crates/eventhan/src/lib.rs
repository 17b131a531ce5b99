//! Event-driven stock movement prediction.
//!
//! The pipeline runs in stages, each usable on its own:
//!
//! - [`text`] — extracts `⟨a1, p, a2, timestamp⟩` event tuples from raw news
//!   with verb-pattern matching plus rule-based pronoun rewriting.
//! - [`corpus`] — loaders and stores: price CSVs, word embeddings,
//!   precomputed event vectors, model checkpoints.
//! - [`dataset`] — daily returns, balanced quantile labels, news-to-market-day
//!   alignment, and windowed sample assembly.
//! - [`autodiff`] — the reverse-mode tensor engine behind the model.
//! - [`model`] — the hierarchical attention network: event, news and temporal
//!   bi-GRU + attention blocks over an embedded event stream.
//! - [`train`] — cross-entropy training with decoupled weight decay, metrics,
//!   and a planted-signal synthetic generator.
//! - [`backtest`] — a daily trading simulation driven by 5-way predictions.
//! - [`cli`] — the `eventhan` binary wiring everything together.

pub mod autodiff;
pub mod cli;
pub mod model;

pub use autodiff::{Graph, Tensor, Var};
