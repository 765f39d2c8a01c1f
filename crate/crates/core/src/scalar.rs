//! Scalar abstraction for the linear-algebra and LP layers.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar usable by [`crate::numkit`] and [`crate::lpsolve`].
///
/// The tolerance hooks let `f32` instances run the same code with
/// precision-appropriate thresholds.
pub trait Real:
    Float + FromPrimitive + NumAssign + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Relative threshold under which a singular/triangular value counts as zero.
    fn rank_tol() -> Self;
    /// Pivot and feasibility tolerance of the simplex method.
    fn feas_tol() -> Self;

    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("representable literal")
    }
}

impl Real for f64 {
    fn rank_tol() -> Self {
        1e-10
    }
    fn feas_tol() -> Self {
        1e-9
    }
}

impl Real for f32 {
    fn rank_tol() -> Self {
        1e-5
    }
    fn feas_tol() -> Self {
        1e-5
    }
}
