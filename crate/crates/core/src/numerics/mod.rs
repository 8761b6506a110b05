//! Dense and sparse linear algebra kernels used by all other modules.
//!
//! Everything here is a pure function over immutable inputs; the only state
//! is the caller's. Matrices are column-major throughout.

mod bicgstab;
mod dense;
mod lu;
mod sparse;
mod svd;

pub use bicgstab::sparse_solve;
pub use dense::{axpy, dot, norm2, sub, DenseMatrix};
pub use lu::{dense_solve, lu_factor, LuFactor};
pub use sparse::SparseMatrixCsr;
pub use svd::{svd, svd_exec, SvdResult};
