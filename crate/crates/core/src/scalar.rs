//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display, LowerExp};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar usable throughout the model: `f32` or `f64`.
///
/// All math goes through [`RealField`] so the same code drives nalgebra's
/// decompositions; `FromPrimitive`/`ToPrimitive` handle literals and
/// reporting.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + LowerExp + Send + Sync + 'static
{
    /// Converts an `f64` literal or physical constant into this scalar.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Lossy conversion to `f64` for reporting.
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine epsilon of the scalar type.
    fn eps() -> Self;
}

impl Real for f32 {
    fn eps() -> Self {
        f32::EPSILON
    }
}

impl Real for f64 {
    fn eps() -> Self {
        f64::EPSILON
    }
}

/// Shorthand for [`Real::lit`].
#[inline]
pub(crate) fn lit<T: Real>(x: f64) -> T {
    T::lit(x)
}

/// Modulus of a complex number for any [`Real`] scalar.
#[inline]
pub fn modulus<T: Real>(z: num_complex::Complex<T>) -> T {
    z.re.hypot(z.im)
}

/// `2π` in the scalar type.
#[inline]
pub(crate) fn two_pi<T: Real>() -> T {
    T::two_pi()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_round_trip() {
        assert_eq!(f64::lit(0.25), 0.25);
        assert_eq!(f32::lit(0.25), 0.25f32);
        assert!((f32::lit(std::f64::consts::PI) - std::f32::consts::PI).abs() < 1e-7);
        assert_eq!(2.5f32.to_f64_lossy(), 2.5);
    }

    #[test]
    fn two_pi_matches_std() {
        assert_eq!(two_pi::<f64>(), std::f64::consts::TAU);
    }
}
