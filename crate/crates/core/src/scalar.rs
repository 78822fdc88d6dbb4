//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All of the linear algebra is written against [`Real`], which is satisfied by
//! `f32` and `f64`. Physical constants and literals enter through [`lit`].

use nalgebra::{Complex, DMatrix, DVector, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating point scalar usable by the simulation kernels.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync + 'static {}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar over `T`.
pub type C<T> = Complex<T>;

/// Dense complex matrix over `T`.
pub type CMatrix<T> = DMatrix<Complex<T>>;

/// Dense complex column vector over `T`.
pub type CVector<T> = DVector<Complex<T>>;

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

/// Converts `T` back into `f64` for reporting.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

#[inline]
pub fn re<T: Real>(x: T) -> C<T> {
    Complex::new(x, T::zero())
}

#[inline]
pub fn im<T: Real>(x: T) -> C<T> {
    Complex::new(T::zero(), x)
}

/// Machine epsilon of `T` as `f64`, used to scale tolerances for narrow types.
pub fn epsilon<T: Real>() -> f64 {
    to_f64(T::default_epsilon())
}
