use num_traits as nt;
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Real scalar used by the ranking, aggregation and statistics code.
///
/// Implemented for `f32` and `f64`. Training and text processing work in
/// `f64` and hand their score matrices to the generic layers.
pub trait Scalar:
    nt::Float
    + nt::FloatConst
    + nt::FromPrimitive
    + nt::ToPrimitive
    + nt::NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`. Values outside the target range saturate.
    #[inline]
    fn of(x: f64) -> Self {
        <Self as nt::FromPrimitive>::from_f64(x).expect("f64 converts to every Scalar")
    }

    #[inline]
    fn of_usize(x: usize) -> Self {
        <Self as nt::FromPrimitive>::from_usize(x).expect("usize converts to every Scalar")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        nt::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
