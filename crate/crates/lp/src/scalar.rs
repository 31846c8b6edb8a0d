use std::fmt::Debug;
use std::ops::Neg;

use num_rational::BigRational;
use num_traits::{Num, Signed, ToPrimitive, Zero};

/// Arithmetic the tableau needs from its entries.
///
/// The float implementation carries pivot and tie tolerances; the rational
/// implementation compares exactly (both tolerances are zero).
pub trait Scalar: Clone + Debug + PartialOrd + Num + Neg<Output = Self> {
    /// Magnitude below which an entry is treated as zero when choosing pivots
    /// and reduced costs.
    fn pivot_tol() -> Self;

    /// Ratio-test window inside which two candidate rows count as tied.
    fn tie_tol() -> Self;

    /// Exact conversion from a finite binary64 value.
    fn from_f64(value: f64) -> Option<Self>;

    fn to_f64(&self) -> f64;

    fn abs_val(&self) -> Self;

    fn is_pos(&self) -> bool {
        *self > Self::pivot_tol()
    }

    fn is_neg(&self) -> bool {
        *self < -Self::pivot_tol()
    }
}

impl Scalar for f64 {
    fn pivot_tol() -> Self {
        1e-9
    }

    fn tie_tol() -> Self {
        1e-12
    }

    fn from_f64(value: f64) -> Option<Self> {
        value.is_finite().then_some(value)
    }

    fn to_f64(&self) -> f64 {
        *self
    }

    fn abs_val(&self) -> Self {
        self.abs()
    }
}

impl Scalar for BigRational {
    fn pivot_tol() -> Self {
        BigRational::zero()
    }

    fn tie_tol() -> Self {
        BigRational::zero()
    }

    fn from_f64(value: f64) -> Option<Self> {
        BigRational::from_float(value)
    }

    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }

    fn abs_val(&self) -> Self {
        self.abs()
    }
}
