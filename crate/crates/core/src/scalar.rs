//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! The solvers and learners only need ordered real arithmetic with `sqrt`
//! and `ln`, so they are written against [`Real`] instead of `f64`. The
//! simulation harness and file formats fix the scalar to `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar usable by the solvers, learners and adversaries.
///
/// Blanket-implemented for every type meeting the bounds, which in practice
/// means `f32` and `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal or constant into `Self`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant must be representable")
    }

    /// Converts a count into `Self`.
    #[inline]
    fn count(n: usize) -> Self {
        Self::from_usize(n).expect("count must be representable")
    }

    /// A fixed tolerance, widened to a few ulps for low-precision scalars.
    #[inline]
    fn tol(c: f64) -> Self {
        Self::lit(c).max(Self::epsilon() * Self::lit(64.0))
    }

    /// Lossy conversion back to `f64` for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Sum + Send + Sync + 'static
{
}
