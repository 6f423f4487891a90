//! Scalar abstraction shared by the numeric modules.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating point scalar usable by the geometry, estimation and regression code.
///
/// Implemented for `f32` and `f64`. Validation tolerances are per type since
/// the `f64` thresholds (1e-9 on orthonormality and friends) are below `f32`
/// resolution.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive {
    /// Tolerance used when validating orthonormality, unit norms and similar
    /// structural invariants.
    fn structural_tolerance() -> Self;

    /// Tolerance on the norm of vectors expected to have unit length.
    fn unit_tolerance() -> Self;

    /// Converts an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Lossy conversion to `f64` for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f64 {
    fn structural_tolerance() -> Self {
        1e-9
    }
    fn unit_tolerance() -> Self {
        1e-6
    }
}

impl Real for f32 {
    fn structural_tolerance() -> Self {
        1e-4
    }
    fn unit_tolerance() -> Self {
        1e-4
    }
}
