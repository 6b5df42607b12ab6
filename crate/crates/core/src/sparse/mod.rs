//! Sparse data structures and low-level kernels: connection sets, alias-method
//! sampling, top-k selection, and COO/CSR sparse-times-dense products.

mod alias;
mod conn;
mod guard;
mod matrix;
mod select;

pub use alias::AliasTable;
pub use conn::{gather_connection_grads, set_difference, ConnectionIndex, ConnectionSet};
pub use guard::{allow_dense, assert_sparse_alloc, dense_allowed, DenseAllowance};
pub use matrix::{dense_matmul_blocked, spmm, spmm_coo, spmm_parallel, spmm_transposed, CooMatrix, CsrMatrix};
pub(crate) use select::rank_top_k;
pub use select::select_top_k;

use thiserror::Error;

/// Errors from sparse-kernel construction and use.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum SparseError {
    #[error("invalid sampling distribution: {0}")]
    InvalidDistribution(String),
    #[error("selection bounds: k={k} exceeds {len} values")]
    SelectionBounds { k: usize, len: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("connection ({in_unit}, {out_unit}) outside layer {n_in}x{n_out}")]
    ConnectionOutOfBounds {
        in_unit: usize,
        out_unit: usize,
        n_in: usize,
        n_out: usize,
    },
    #[error("duplicate connection ({in_unit}, {out_unit})")]
    DuplicateConnection { in_unit: usize, out_unit: usize },
    #[error("invalid CSR structure: {0}")]
    InvalidCsr(String),
    #[error("invalid mutation: {0}")]
    InvalidMutation(String),
}
