//! Scalar abstraction for the numeric core.
//!
//! All channel-gain, SINR, power and weight arithmetic is generic over the
//! floating-point type, so the same code runs on `f32` or `f64`. The crate
//! root exports [`crate::Scalar`] (= `f64`) as the default used by the
//! simulation engine and the CLI.

use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Floating point: `f32` or `f64`.
pub trait Float:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Conversion from an `f64` literal or intermediate.
    fn of(v: f64) -> Self;

    fn of_usize(v: usize) -> Self;

    fn of_u64(v: u64) -> Self;

    /// Widening (or identity) conversion used at reporting boundaries.
    fn as_f64(self) -> f64;
}

impl Float for f32 {
    #[inline]
    fn of(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn of_usize(v: usize) -> Self {
        v as f32
    }
    #[inline]
    fn of_u64(v: u64) -> Self {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Float for f64 {
    #[inline]
    fn of(v: f64) -> Self {
        v
    }
    #[inline]
    fn of_usize(v: usize) -> Self {
        v as f64
    }
    #[inline]
    fn of_u64(v: u64) -> Self {
        v as f64
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}
