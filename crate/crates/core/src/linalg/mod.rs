//! Linear algebra kernels: small fixed-size blocks, sparse operators,
//! dense factorizations and Krylov iterations.

pub mod dense;
pub mod krylov;
pub mod small;
pub mod sparse;

pub use dense::{integer_rank, DenseMatrix, SymEigen};
pub use krylov::{lanczos_largest, minres, pcg, FnOperator, Jacobi, KrylovOutcome, LinearOperator};
pub use small::{Comps, SmallMat};
pub use sparse::{CooBuilder, SparseOperator};
