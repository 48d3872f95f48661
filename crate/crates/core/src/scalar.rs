//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All math is written against [`Real`], implemented for `f32` and `f64`.
//! Probability bookkeeping is usually done in `f64`; `f32` is available for
//! cheaper network training where exact reproduction of a reference run is
//! not required.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

mod sealed {
    pub trait Sealed {}
    impl Sealed for f32 {}
    impl Sealed for f64 {}
}

/// Real scalar used throughout the crate.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + Sum<Self>
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
    + sealed::Sealed
{
    /// Tolerance used when checking that a vector is a probability
    /// distribution.
    const NORM_TOL: f64;

    /// Lossless-enough conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Conversion from a count or index.
    #[inline]
    fn count(x: usize) -> Self {
        Self::from_usize(x).expect("count representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("finite scalar")
    }

    #[inline]
    fn norm_tol() -> Self {
        Self::lit(Self::NORM_TOL)
    }
}

impl Real for f64 {
    const NORM_TOL: f64 = 1e-9;
}

impl Real for f32 {
    const NORM_TOL: f64 = 1e-5;
}

/// `x * log2(x)` with the convention `0 log 0 = 0`.
#[inline]
pub fn xlog2x<T: Real>(x: T) -> T {
    if x > T::zero() {
        x * x.log2()
    } else {
        T::zero()
    }
}

/// Shannon entropy in bits.
pub fn entropy_bits<T: Real>(p: &[T]) -> T {
    -p.iter().map(|&x| xlog2x(x)).sum::<T>()
}

/// Index of the largest entry, ties resolved to the lowest index.
pub fn argmax_lowest<T: PartialOrd + Copy>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
