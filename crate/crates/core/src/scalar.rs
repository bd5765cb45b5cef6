//! Floating scalar abstraction for the core math.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumAssignOps};

/// Scalar the distribution math, solvers, and theorem checkers are generic
/// over. Implemented for `f32` and `f64`.
///
/// Tolerances quoted on individual operations (root residuals, series
/// convergence, strictness margins) assume `f64`; `f32` runs the same
/// algorithms against its own epsilon and is mainly useful as a cheap check
/// that nothing silently assumes double width.
pub trait Real:
    Float + FromPrimitive + NumAssignOps + Debug + Display + Send + Sync + 'static
{
    /// Lifts an `f64` constant into `Self`.
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable")
    }
}

impl Real for f32 {}
impl Real for f64 {}
