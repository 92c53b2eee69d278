//! Scalar abstraction used throughout the crate.
//!
//! All numerical routines are generic over [`Real`], which is implemented
//! for `f32` and `f64`. Concrete `f64` aliases for the main types live at
//! the crate root.

use std::fmt;
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps};

/// Floating-point scalar the solvers operate on.
///
/// Implemented for `f32` and `f64` only. Tolerances quoted in the
/// documentation assume `f64`; `f32` works but cannot reach them.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssignOps + Sum + fmt::Debug + fmt::Display + Send + Sync + 'static
{
    /// Shorthand conversion from an `f64` literal.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal must convert into the scalar type")
    }

    /// Conversion back to `f64` (used for reporting and serialization).
    fn to_f64(self) -> f64;

    fn half() -> Self {
        Self::of(0.5)
    }

    fn two() -> Self {
        Self::of(2.0)
    }
}

impl Real for f32 {
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    fn to_f64(self) -> f64 {
        self
    }
}
