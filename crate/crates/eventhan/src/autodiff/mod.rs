//! Minimal dense-tensor reverse-mode automatic differentiation.
//!
//! The graph is rebuilt on every forward pass (define-by-run), so
//! variable-length sequences never need padding at this layer. Storage is
//! row-major `f64` throughout; accumulation order is the node order, which
//! makes runs bit-reproducible under a fixed seed.

mod graph;
mod tensor;

pub use graph::{sigmoid, Graph, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum AutodiffError {
    #[error("shape {shape:?} does not match {len} values")]
    InvalidShape { shape: Vec<usize>, len: usize },
    #[error("{op}: incompatible shapes {lhs:?} and {rhs:?}")]
    ShapeMismatch {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },
    #[error("softmax input has no unmasked positions")]
    AllMasked,
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("row {index} out of range for table of shape {shape:?}")]
    RowOutOfRange { index: usize, shape: Vec<usize> },
}
