//! Sparse vectors, low-rank densities, projectors and their eigensolvers.

mod density;
mod eigen;
pub mod jacobi;
mod sparse;

pub use density::{normalize_trace, trace_product, LowRankDensity, Projector};
pub use eigen::{
    operator_eigendecomposition, scatter_eigendecomposition, truncated_eigendecomposition,
    EigenPair, IncrementalEigen, IncrementalResult, DEFAULT_BATCH, EIGEN_FLOOR,
};
pub use sparse::{dot, SparseVector};
