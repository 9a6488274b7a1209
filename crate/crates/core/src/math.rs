//! Elementary functions: the platform implementations when `std` is linked,
//! `libm` otherwise.

#[cfg(any(test, feature = "std"))]
mod imp {
    #[inline]
    pub fn ceil(x: f64) -> f64 {
        x.ceil()
    }
    #[inline]
    pub fn copysign(x: f64, s: f64) -> f64 {
        x.copysign(s)
    }
    #[inline]
    pub fn exp(x: f64) -> f64 {
        x.exp()
    }
    #[inline]
    pub fn exp2(x: f64) -> f64 {
        x.exp2()
    }
    #[inline]
    pub fn expm1(x: f64) -> f64 {
        x.exp_m1()
    }
    #[inline]
    pub fn log(x: f64) -> f64 {
        x.ln()
    }
    #[inline]
    pub fn log1p(x: f64) -> f64 {
        x.ln_1p()
    }
    #[inline]
    pub fn pow(x: f64, y: f64) -> f64 {
        x.powf(y)
    }
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }
}

#[cfg(not(any(test, feature = "std")))]
mod imp {
    pub use libm::{ceil, copysign, exp, exp2, expm1, log, log1p, pow, sqrt};
}

pub(crate) use imp::*;
