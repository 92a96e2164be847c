//! Scalar abstraction shared by every numeric kernel in this crate.
//!
//! All linear algebra, spectra, and stepsize formulas are generic over
//! [`Real`], which is implemented for `f32` and `f64` through a blanket impl.
//! Algorithms are written once against this trait; concrete aliases for the
//! common `f64` instantiation live at the crate root.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating-point scalar type the toolkit operates on.
///
/// The supertraits are the exact set the kernels need: IEEE float semantics
/// with transcendentals ([`Float`]), mathematical constants ([`FloatConst`]),
/// conversion from literals ([`FromPrimitive`]), compound assignment
/// ([`NumAssign`]), iterator sums, and thread-safety so matrices can cross
/// rayon task boundaries.
///
/// # Example
///
/// ```
/// use blockstep_core::real::Real;
///
/// fn midpoint<T: Real>(a: T, b: T) -> T {
///     (a + b) / T::c(2.0)
/// }
///
/// assert_eq!(midpoint(1.0_f64, 3.0), 2.0);
/// assert_eq!(midpoint(1.0_f32, 3.0), 2.0);
/// ```
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lifts an `f64` constant (tolerance, stepsize, table entry) into `Self`.
    ///
    /// Rounds to nearest for `f32`; exact for `f64`.
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 constant must be representable")
    }

    /// Converts to `f64` for reporting and serialization. Exact for `f64`.
    fn as_f64(self) -> f64 {
        self.to_f64()
            .expect("real scalar must convert to f64")
    }
}

impl<T> Real for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + NumAssign
        + Sum
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}
