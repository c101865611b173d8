//! Scalar abstraction and deterministic reductions.
//!
//! All numerics in this crate are generic over [`Scalar`], which is any IEEE
//! float usable with `rustfft` (`f32` or `f64`). Concrete work, including the
//! whole acceptance suite, runs at `f64`; the `f32` instantiation exists for
//! callers that want the smaller type.

use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps};
use rustfft::FftNum;
use std::iter::Sum;

/// Floating point scalar the library is generic over.
pub trait Scalar: Float + FloatConst + FromPrimitive + NumAssignOps + Sum<Self> + FftNum {}

impl<T> Scalar for T where T: Float + FloatConst + FromPrimitive + NumAssignOps + Sum<T> + FftNum {}

/// Convert an `f64` literal or intermediate into `T`.
#[inline]
pub(crate) fn fromf<T: Scalar>(v: f64) -> T {
    T::from_f64(v).expect("f64 value representable in scalar type")
}

/// Round-trip through `f64` for the libm special functions.
#[inline]
pub(crate) fn tof64<T: Scalar>(v: T) -> f64 {
    v.to_f64().expect("scalar convertible to f64")
}

/// Pairwise summation.
///
/// Used wherever a reduction must be bit-stable regardless of how the work
/// producing the terms was parallelised: the terms are collected in a fixed
/// order and reduced by recursive halving.
pub fn pairwise_sum<T: Scalar>(xs: &[T]) -> T {
    match xs.len() {
        0 => T::zero(),
        1 => xs[0],
        2 => xs[0] + xs[1],
        n => {
            let mid = n / 2;
            pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_matches_sequential_on_benign_data() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64).sin()).collect();
        let seq: f64 = xs.iter().sum();
        let pw = pairwise_sum(&xs);
        assert!((seq - pw).abs() < 1e-10);
    }

    #[test]
    fn pairwise_sum_is_split_invariant() {
        let xs: Vec<f64> = (0..777).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let total = pairwise_sum(&xs);
        // Summing the same slice twice gives bitwise the same result.
        assert_eq!(total, pairwise_sum(&xs));
    }

    #[test]
    fn scalar_generic_code_compiles_for_f32() {
        fn mass<T: Scalar>(h: T, v: &[T]) -> T {
            h * pairwise_sum(v)
        }
        let v32 = vec![1.0f32; 8];
        let v64 = vec![1.0f64; 8];
        assert!((mass(0.5f32, &v32) - 4.0).abs() < 1e-6);
        assert!((mass(0.5f64, &v64) - 4.0).abs() < 1e-12);
    }
}
