//! Scalar abstraction for the numerical kernels.
//!
//! Everything in this crate is generic over a real floating-point type.
//! [`Scalar`] gathers the bounds the kernels need: `nalgebra::RealField`
//! for transcendental functions and dense linear algebra, `FromPrimitive`
//! for literals, and `rustfft::FftNum` so fields can go through FFT plans.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};
use rustfft::FftNum;

pub trait Scalar: RealField + FromPrimitive + ToPrimitive + FftNum + Copy + Default {}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Lossy conversion from an `f64` literal into the working scalar.
#[inline]
pub fn cast<T: Scalar>(v: f64) -> T {
    nalgebra::convert(v)
}

/// Conversion back to `f64` for diagnostics and error payloads.
#[inline]
pub fn to_f64<T: Scalar>(v: T) -> f64 {
    v.to_f64().unwrap_or(f64::NAN)
}

/// True for normal, subnormal, and zero values; false for NaN and infinities.
#[inline]
pub fn is_finite<T: Scalar>(v: T) -> bool {
    v == v && v - v == T::zero()
}
