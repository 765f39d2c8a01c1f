//! Subspace-preserving sparse recovery with basis pursuit and orthogonal
//! matching pursuit.
//!
//! A dictionary is split into atoms inside a subspace `S₀` and atoms outside
//! of it. The crate solves both pursuit problems, computes the geometry of
//! the in-subspace atoms (inradius, circumradius, covering radius and the
//! vertices of the polar body), and certifies the instance and universal
//! recovery conditions with re-checkable witnesses.
//!
//! Linear algebra and the LP solver are generic over [`Real`]; everything
//! above them works in `f64` through the aliases below.

pub mod error;
pub mod numkit;
pub mod lpsolve;
pub mod dict;
pub mod geometry;
pub mod pursuit;
pub mod conditions;
pub mod sparse;
pub mod bench;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision dense matrix.
pub type Mat = numkit::Matrix<f64>;
/// Single-precision dense matrix.
pub type Mat32 = numkit::Matrix<f32>;
/// Double-precision orthonormal basis.
pub type Basis = numkit::OrthonormalBasis<f64>;
/// Double-precision linear program.
pub type Lp = lpsolve::LinearProgram<f64>;
/// Double-precision LP solution.
pub type LpSol = lpsolve::LpSolution<f64>;
