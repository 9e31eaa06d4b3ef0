//! Scalar abstraction shared by every module.
//!
//! All numerics are written against [`Real`], which is implemented for `f32`
//! and `f64`. Tolerances quoted in the docs are for `f64`; for `f32` they are
//! floored at a small multiple of machine epsilon.

use num_complex::Complex;
use num_traits::{Float, FloatConst};
use rustfft::FftNum;
use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Real floating point scalar usable by the engine: f32 or f64.
pub trait Real: Float + FloatConst + FftNum + Sum + Debug + Display + Default {
    /// Converts a literal. Every `Real` can represent an `f64` approximately.
    fn lit(x: f64) -> Self {
        <Self as num_traits::NumCast>::from(x).expect("f64 literal representable")
    }

    fn count(n: usize) -> Self {
        <Self as num_traits::NumCast>::from(n).expect("usize representable")
    }

    /// Tolerance `tol` floored at `k` ulps of one.
    fn tol(tol: f64, k: f64) -> Self {
        let floor = Self::epsilon() * Self::lit(k);
        Self::lit(tol).max(floor)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar over a [`Real`].
pub type C<T> = Complex<T>;

#[inline]
pub(crate) fn cis<T: Real>(phase: T) -> C<T> {
    C::new(phase.cos(), phase.sin())
}

#[inline]
pub(crate) fn real<T: Real>(x: T) -> C<T> {
    C::new(x, T::zero())
}

/// Neumaier-compensated accumulator for a vector of complex numbers.
#[derive(Clone, Debug)]
pub(crate) struct CompensatedSum<T> {
    sum: Vec<C<T>>,
    comp: Vec<C<T>>,
}

impl<T: Real> CompensatedSum<T> {
    pub fn zeros(len: usize) -> Self {
        Self {
            sum: vec![C::new(T::zero(), T::zero()); len],
            comp: vec![C::new(T::zero(), T::zero()); len],
        }
    }

    #[inline]
    fn add_component(sum: &mut T, comp: &mut T, x: T) {
        let t = *sum + x;
        if sum.abs() >= x.abs() {
            *comp = *comp + ((*sum - t) + x);
        } else {
            *comp = *comp + ((x - t) + *sum);
        }
        *sum = t;
    }

    #[inline]
    pub fn add_at(&mut self, k: usize, z: C<T>) {
        let (s, c) = (&mut self.sum[k], &mut self.comp[k]);
        Self::add_component(&mut s.re, &mut c.re, z.re);
        Self::add_component(&mut s.im, &mut c.im, z.im);
    }

    pub fn add_slice(&mut self, values: &[C<T>]) {
        for (k, z) in values.iter().enumerate() {
            self.add_at(k, *z);
        }
    }

    pub fn merge(&mut self, other: &Self) {
        for k in 0..self.sum.len() {
            self.add_at(k, other.sum[k]);
            self.add_at(k, other.comp[k]);
        }
    }

    pub fn value(&self) -> Vec<C<T>> {
        self.sum.iter().zip(&self.comp).map(|(s, c)| s + c).collect()
    }
}
