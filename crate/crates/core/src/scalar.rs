//! Scalar abstraction shared by every grid and solver.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};
use rustfft::FftNum;

/// Real floating point scalar: `f32` or `f64`.
///
/// Everything numeric in this crate is generic over `Real`. The tolerances quoted
/// in the test-suite assume `f64`; `f32` works but only to single precision.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + FftNum + Sum + Default + Debug + Display
{
    /// Converts an `f64` literal. Infallible for the float types implementing this trait.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
