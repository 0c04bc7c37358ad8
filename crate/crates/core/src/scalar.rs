//! Floating-point abstraction shared by the vector, memory and metric code.

use num_traits::{Float, FromPrimitive, NumAssignOps, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Real scalar used for embeddings, similarities and metric values.
///
/// Implemented for `f32` and `f64`. Campaign-level quantities (KPI totals,
/// allocation ratios) stay in `f64`; everything that touches vectors is
/// generic so a store can trade precision for memory.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssignOps
    + Sum
    + Debug
    + Display
    + Default
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Absolute tolerance for the unit-norm postcondition of embeddings.
    const NORM_TOLERANCE: f64;

    fn from_f64_lossy(v: f64) -> Self;

    fn as_f64(self) -> f64;
}

impl Scalar for f64 {
    const NORM_TOLERANCE: f64 = 1e-9;

    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        v
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    const NORM_TOLERANCE: f64 = 1e-5;

    #[inline]
    fn from_f64_lossy(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}
