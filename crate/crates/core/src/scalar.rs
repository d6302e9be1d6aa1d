//! Scalar abstraction: every numeric routine in the crate is generic over a
//! real field so the same code runs with `f32` or `f64`.

use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar usable throughout the crate.
///
/// A blanket impl covers anything satisfying the bounds, in particular
/// `f32` and `f64`.
pub trait Real:
    nalgebra::RealField + FromPrimitive + ToPrimitive + std::fmt::LowerExp + Copy
{
    /// Lossy conversion from `f64`, used for literals and tolerances.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal not representable in scalar type")
    }
}

impl<T: nalgebra::RealField + FromPrimitive + ToPrimitive + std::fmt::LowerExp + Copy> Real for T {}

/// Wrap an angle to the interval (-pi, pi].
pub fn wrap_angle<T: Real>(theta: T) -> T {
    let two_pi = T::two_pi();
    let mut a = theta % two_pi;
    if a > T::pi() {
        a -= two_pi;
    } else if a <= -T::pi() {
        a += two_pi;
    }
    a
}
