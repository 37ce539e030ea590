//! Scalar math that works with and without `std`.

use num_traits::Float;

#[inline]
pub fn sqrt(x: f64) -> f64 {
    Float::sqrt(x)
}
#[inline]
pub fn ln(x: f64) -> f64 {
    Float::ln(x)
}
#[inline]
pub fn sin(x: f64) -> f64 {
    Float::sin(x)
}
#[inline]
pub fn cos(x: f64) -> f64 {
    Float::cos(x)
}
#[inline]
pub fn abs(x: f64) -> f64 {
    Float::abs(x)
}
