//! Scalar abstraction shared by every numeric module.
//!
//! All algorithms are written against [`Real`], which is implemented for
//! `f32` and `f64`. Tolerances that are stated in absolute terms (for
//! example a relative rank threshold of `1e-9`) are widened to a multiple
//! of the type's machine epsilon through [`Real::tol`] so that the same code
//! remains meaningful in single precision.

use nalgebra::{Complex, DMatrix, DVector, RealField};
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating point scalar: `f32` or `f64`.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Default {
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal representable")
    }

    /// Converts a `usize` into this scalar type.
    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).expect("finite conversion")
    }

    /// `max(requested, 1000 * eps)`.
    #[inline]
    fn tol(requested: f64) -> Self {
        let floor = Self::default_epsilon() * Self::lit(1000.0);
        let req = Self::lit(requested);
        if req > floor {
            req
        } else {
            floor
        }
    }

    #[inline]
    fn is_finite_val(self) -> bool {
        self.as_f64().is_finite()
    }
}

impl Real for f32 {}
impl Real for f64 {}

pub type C<T> = Complex<T>;
pub type CMat<T> = DMatrix<Complex<T>>;
pub type CVec<T> = DVector<Complex<T>>;

/// `exp(j * phase)`.
#[inline]
pub fn cis<T: Real>(phase: T) -> C<T> {
    Complex::new(phase.cos(), phase.sin())
}

/// Argument of a complex number with the convention `arg(0) = 0`.
#[inline]
pub fn arg0<T: Real>(z: C<T>) -> T {
    if z.re == T::zero() && z.im == T::zero() {
        T::zero()
    } else {
        z.im.atan2(z.re)
    }
}

#[inline]
pub fn real<T: Real>(x: T) -> C<T> {
    Complex::new(x, T::zero())
}

/// `|z|`.
#[inline]
pub fn cabs<T: Real>(z: C<T>) -> T {
    z.re.hypot(z.im)
}
