//! Randomized algorithms for the generalized singular value decomposition
//! with respect to symmetric positive definite weights `S` and `T`.

pub mod analysis;
pub mod error;
pub mod gsvd;
pub mod linalg;
pub mod matrix;
pub mod matrix_market;
pub mod operators;
pub mod reference;
pub mod sampling;
pub mod testmatrices;
pub mod weighted_qr;

pub use error::{Error, Result};
pub use matrix::DenseMatrix;
