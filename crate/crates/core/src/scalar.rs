//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar used for probabilities, rewards and value functions.
///
/// Implemented for `f32` and `f64`. The routines here need `exp`/`ln`/`sqrt`
/// (softmax, TD step sizes, bounds), so exact rational types are not supported.
pub trait Real:
    'static
    + Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
{
    /// Converts an `f64` literal; never fails for the supported types.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance for "sums to one" checks on rows of length `len`.
    ///
    /// At least `1e-12`, widened to a few ulps per summand for narrow types.
    #[inline]
    fn stochastic_tol(len: usize) -> Self {
        let floor = Self::lit(1e-12);
        let ulp = Self::epsilon() * Self::from_usize_lossy(16 * len.max(1));
        floor.max(ulp)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Infinity norm of a vector.
pub fn inf_norm<T: Real>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

/// Infinity norm of `a - b`.
pub fn inf_dist<T: Real>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(T::zero(), |m, (x, y)| m.max((*x - *y).abs()))
}

/// `max(v) - min(v)`; zero for empty input.
pub fn span<T: Real>(v: &[T]) -> T {
    if v.is_empty() {
        return T::zero();
    }
    let (lo, hi) = v
        .iter()
        .fold((T::infinity(), T::neg_infinity()), |(lo, hi), x| {
            (lo.min(*x), hi.max(*x))
        });
    hi - lo
}

pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}
