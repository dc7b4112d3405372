//! Finite element exterior calculus on simplicial manifolds with lowest-order
//! Whitney forms, metric-weighted Hodge stars and discrete harmonic forms.

pub mod approx;
pub mod crime;
pub mod error;
pub mod geometry;
pub mod hodge;
pub mod linalg;
pub mod mesh;
pub mod scalar;
pub mod symbolic;
pub mod whitney;

pub use error::{FeecError, Result};
pub use scalar::Real;

pub type Complex = mesh::SimplicialComplex<f64>;
