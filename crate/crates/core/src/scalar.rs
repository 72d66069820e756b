//! Scalar abstraction for the numerical core.
//!
//! All closed-form math in this crate is written against [`Real`], a small
//! extension of `num_traits::Float`, so the same code instantiates at `f32`
//! and `f64`. The crate root exposes `f64` aliases for the common types.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::AddAssign;

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar usable by the solver core.
pub trait Real:
    Float + FromPrimitive + AddAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Shorthand for converting an `f64` literal.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    fn half() -> Self {
        Self::of(0.5)
    }

    fn two() -> Self {
        Self::of(2.0)
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + AddAssign + Sum + Debug + Display + Send + Sync + 'static
{
}

/// Evenly spaced grid with `n` points covering `[lo, hi]` inclusively.
pub fn linspace<F: Real>(lo: F, hi: F, n: usize) -> Vec<F> {
    assert!(n >= 2, "grid needs at least two points");
    let step = (hi - lo) / F::from_usize(n - 1).unwrap();
    (0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                lo + step * F::from_usize(i).unwrap()
            }
        })
        .collect()
}
