//! Scalar abstractions.
//!
//! [`Scalar`] is the field used by the dense linear algebra layer and is
//! implemented for `f32`, `f64` and [`Rational64`]. [`Real`] adds the
//! transcendental functions needed for mesh geometry and is only available
//! for the floating point types.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_rational::Rational64;
use num_traits::{Float, FloatConst, FromPrimitive, Num, ToPrimitive};

/// Ordered field with conversions to and from `f64`.
pub trait Scalar:
    Num + Copy + PartialOrd + Debug + Display + FromPrimitive + ToPrimitive + std::ops::Neg<Output = Self>
    + Send + Sync + 'static
{
    /// Default relative tolerance for sign tests and comparisons.
    fn default_tolerance() -> Self;

    /// Relative pivot threshold below which a factorization is declared singular.
    fn pivot_tolerance() -> Self;
}

impl Scalar for f64 {
    fn default_tolerance() -> Self {
        1e-12
    }
    fn pivot_tolerance() -> Self {
        1e-13
    }
}

impl Scalar for f32 {
    fn default_tolerance() -> Self {
        1e-5
    }
    fn pivot_tolerance() -> Self {
        1e-6
    }
}

impl Scalar for Rational64 {
    fn default_tolerance() -> Self {
        Rational64::from_integer(0)
    }
    fn pivot_tolerance() -> Self {
        Rational64::from_integer(0)
    }
}

/// Floating point scalar usable for geometry.
pub trait Real: Scalar + Float + FloatConst + Sum {}

impl Real for f32 {}
impl Real for f64 {}

/// Absolute value that works for every [`Scalar`].
#[inline]
pub fn abs<T: Scalar>(x: T) -> T {
    if x < T::zero() {
        -x
    } else {
        x
    }
}

/// Larger of two values (first one on ties or incomparable input).
#[inline]
pub fn max<T: Scalar>(a: T, b: T) -> T {
    if b > a {
        b
    } else {
        a
    }
}

/// Smaller of two values (first one on ties or incomparable input).
#[inline]
pub fn min<T: Scalar>(a: T, b: T) -> T {
    if b < a {
        b
    } else {
        a
    }
}

/// Converts an `f64` literal into `T`.
///
/// # Panics
/// Panics if the value cannot be represented (non-finite input for rationals).
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).unwrap_or_else(|| panic!("{x} is not representable"))
}

/// Converts `T` to `f64`, mapping failures to NaN.
#[inline]
pub fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Exact rational `num/den`.
#[inline]
pub fn ratio(num: i64, den: i64) -> Rational64 {
    Rational64::new(num, den)
}
