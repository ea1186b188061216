//! Scalar abstractions.
//!
//! Closed-form efficiency bounds only need field arithmetic, so they are
//! generic over [`Field`] and can be evaluated exactly with rationals.
//! Everything that touches complex matrices (eigensolver, states, witnesses)
//! needs square roots and comparisons and is generic over [`Real`].

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::Neg;

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Ordered field: enough for the efficiency maps and thresholds.
pub trait Field: Clone + PartialOrd + Num + Neg<Output = Self> + ToPrimitive + Debug {
    /// `2^k` built from repeated addition so it stays exact for rationals.
    fn pow2(k: usize) -> Self {
        let two = Self::one() + Self::one();
        (0..k).fold(Self::one(), |acc, _| acc * two.clone())
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Field for T where T: Clone + PartialOrd + Num + Neg<Output = T> + ToPrimitive + Debug {}

/// Floating-point scalar (f32 or f64) underlying complex matrices.
pub trait Real:
    Float + FromPrimitive + Field + Debug + Display + Sum + Send + Sync + Default + 'static
{
    /// Lossless for f64, rounding for f32. Only used for literal constants.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable")
    }

    /// Tolerance `x`, floored at a small multiple of machine epsilon so the
    /// same thresholds stay meaningful for f32.
    fn tol(x: f64) -> Self {
        Self::lit(x).max(Self::epsilon() * Self::lit(1024.0))
    }
}

impl Real for f32 {}
impl Real for f64 {}
