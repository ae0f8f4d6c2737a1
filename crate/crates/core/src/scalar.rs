//! Generic real-scalar trait for all numeric kernels.

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the whole crate is generic over: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + std::fmt::Debug + std::fmt::Display + std::iter::Sum + 'static
{
    /// Convert an `f64` constant into the scalar type.
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("constant representable in scalar type")
    }

    /// Convert a count into the scalar type.
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
