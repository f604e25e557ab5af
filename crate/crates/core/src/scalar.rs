//! Floating-point scalar abstraction for the numeric kernels.

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point scalar: f32 or f64.
///
/// Geometry, the servo value function and the statistics kernels are written
/// against this trait; the simulator instantiates them at [`crate::Real`].
pub trait Scalar: Float + FromPrimitive + ToPrimitive + core::fmt::Debug + Copy + 'static {
    /// Lossy conversion to `f64` (exact for f32/f64 inputs).
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().expect("scalar convertible to f64")
    }

    /// Conversion from `f64`, saturating at the type's range.
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("scalar convertible from f64")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
