//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! All physics and reconstruction code is written against [`Real`], so the
//! same algorithms run in `f32` for quick sweeps and `f64` for the
//! verification suite.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex amplitude over a [`Real`] scalar.
pub type Amplitude<T> = Complex<T>;

/// `e^{iθ}`.
#[inline]
pub fn phasor<T: Real>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

/// `sin(x)/x` with the removable singularity filled in.
#[inline]
pub fn sinc<T: Real>(x: T) -> T {
    if x.abs() < T::lit(1e-8) {
        // Taylor to second order is exact in f64 below this cutoff.
        T::one() - x * x / T::lit(6.0)
    } else {
        x.sin() / x
    }
}

/// Wrap an angle into `(-π, π]`.
#[inline]
pub fn wrap_phase<T: Real>(theta: T) -> T {
    let two_pi = T::TAU();
    let mut w = theta - two_pi * (theta / two_pi).round();
    if w <= -T::PI() {
        w += two_pi;
    } else if w > T::PI() {
        w -= two_pi;
    }
    w
}
