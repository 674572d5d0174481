//! Floating point abstraction shared by the analytical modules.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, NumAssignOps};

/// Real scalar type the mean-field, equilibrium and cycle code is written against.
pub trait Scalar: Float + FloatConst + NumAssignOps + Debug + Display + Default + Send + Sync + 'static {
    /// Converts an `f64` literal. Every `Scalar` can represent (a rounding of) any finite `f64`.
    #[inline]
    fn lit(v: f64) -> Self {
        <Self as num_traits::NumCast>::from(v).expect("finite literal")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    /// Relative tolerance below which two quantities are treated as equal when
    /// deciding a strict inequality. `1e-12`, widened for low-precision types.
    #[inline]
    fn equality_tol() -> Self {
        Self::lit(1e-12).max(Self::epsilon() * Self::lit(16.0))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equality_tol_tracks_precision() {
        assert_eq!(f64::equality_tol(), 1e-12);
        assert!(f32::equality_tol() > 1e-7);
    }
}
