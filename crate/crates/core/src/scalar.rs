//! Numeric abstraction shared by costs, outcomes, scores and objective values.

use std::fmt::Debug;
use std::ops::Neg;

use num_traits::{FromPrimitive, Num, NumAssign, ToPrimitive};

/// A real-like scalar: `f64`, `f32`, or an exact rational such as
/// `num_rational::Ratio<i64>`.
///
/// Everything in the objective, the MDP rewards and the exact-cover weights
/// is written against this trait, so the bookkeeping identities can be
/// checked with exact arithmetic as well as with floats.
pub trait Scalar:
    Copy
    + Debug
    + PartialOrd
    + Num
    + NumAssign
    + Neg<Output = Self>
    + FromPrimitive
    + ToPrimitive
    + Send
    + Sync
    + 'static
{
    /// Converts a count (N, |U'|, ...) into the scalar type.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count not representable in scalar type")
    }

    /// Lossy conversion used only for UCB statistics and reporting.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

impl<T> Scalar for T where
    T: Copy
        + Debug
        + PartialOrd
        + Num
        + NumAssign
        + Neg<Output = T>
        + FromPrimitive
        + ToPrimitive
        + Send
        + Sync
        + 'static
{
}

/// Sums in iteration order. All population averages go through this so that
/// two routes visiting subjects in the same order agree bit for bit.
pub fn sum<T: Scalar>(values: impl IntoIterator<Item = T>) -> T {
    values.into_iter().fold(T::zero(), |acc, v| acc + v)
}

/// Relative difference `|a - b| / max(1, |a|, |b|)` in `f64`.
pub fn relative_gap<T: Scalar>(a: T, b: T) -> f64 {
    let (a, b) = (a.to_f64_lossy(), b.to_f64_lossy());
    (a - b).abs() / 1f64.max(a.abs()).max(b.abs())
}
