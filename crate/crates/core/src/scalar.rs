//! Numeric scalar abstraction shared by the factor algebra, search and oracle.

use std::fmt::Debug;

use num_rational::Rational64;
use num_traits::{Num, ToPrimitive};

/// A nonnegative-capable field element usable as a factor cell.
///
/// Implemented for `f32`, `f64` and `Rational64`. Knowledge-base probabilities
/// are stored as `f64` and lifted with [`Scalar::from_prob`].
pub trait Scalar: Num + Copy + PartialOrd + Debug + Send + Sync + 'static {
    fn from_prob(p: f64) -> Self;

    fn to_f64(self) -> f64;

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn clamp_unit(self) -> Self {
        self.max_of(Self::zero()).min_of(Self::one())
    }
}

impl Scalar for f64 {
    fn from_prob(p: f64) -> Self {
        p
    }

    fn to_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    fn from_prob(p: f64) -> Self {
        p as f32
    }

    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for Rational64 {
    /// Nearest simple fraction; decimal literals such as `0.8` map to `4/5`.
    fn from_prob(p: f64) -> Self {
        Rational64::approximate_float(p).unwrap_or_else(|| panic!("probability {p} has no i64 ratio"))
    }

    fn to_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}
