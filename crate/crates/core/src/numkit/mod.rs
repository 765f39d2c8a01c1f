//! Dense real linear algebra shared by the solvers and certificate checkers.
//!
//! Everything here is generic over [`Real`](crate::Real) and works on small
//! row-major matrices. Rank decisions use a tolerance relative to the largest
//! pivot of a column-pivoted Householder QR.

mod basis;
mod matrix;
mod qr;
pub mod vector;

pub use basis::{null_space_basis, orthonormal_basis_of_span, project_onto, OrthonormalBasis};
pub use matrix::Matrix;
pub use qr::{least_squares, numerical_rank, qr_factor, PivotedQr};
