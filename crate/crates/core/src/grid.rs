//! Uniform symmetric spatial grids and their conjugate frequency grids.
//!
//! A grid has `n_points` nodes `x_i = -L + i h`, `h = 2L/(n_points - 1)`,
//! symmetric about 0. The first `n_points - 1` nodes form a period-`2L`
//! torus; the node at `+L` duplicates the one at `-L` for periodic work.
//! The conjugate frequencies are `xi_k = pi k / L` for signed `k`.

use crate::error::{FracError, FracResult};
use crate::num::{fromf, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelGrid<T> {
    half_width: T,
    n_points: usize,
}

impl<T: Scalar> KernelGrid<T> {
    pub fn new(half_width: T, n_points: usize) -> FracResult<Self> {
        if !(half_width > T::zero()) || !half_width.is_finite() {
            return Err(FracError::Domain(format!(
                "grid half-width must be positive and finite, got {:?}",
                half_width.to_f64()
            )));
        }
        if n_points < 2 {
            return Err(FracError::Domain(format!(
                "grid needs at least 2 points, got {n_points}"
            )));
        }
        Ok(Self { half_width, n_points })
    }

    pub fn half_width(&self) -> T {
        self.half_width
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Node spacing `h = 2L/(n-1)`.
    pub fn spacing(&self) -> T {
        fromf::<T>(2.0) * self.half_width / fromf((self.n_points - 1) as f64)
    }

    /// Number of independent nodes on the period-`2L` torus.
    pub fn torus_len(&self) -> usize {
        self.n_points - 1
    }

    pub fn node(&self, i: usize) -> T {
        debug_assert!(i < self.n_points);
        -self.half_width + self.spacing() * fromf(i as f64)
    }

    pub fn nodes(&self) -> Vec<T> {
        (0..self.n_points).map(|i| self.node(i)).collect()
    }

    /// Index of the node at `x = 0`, when `n_points` is odd.
    pub fn zero_index(&self) -> Option<usize> {
        if self.n_points % 2 == 1 {
            Some((self.n_points - 1) / 2)
        } else {
            None
        }
    }

    /// Conjugate frequency spacing `pi / L`.
    pub fn freq_spacing(&self) -> T {
        T::PI() / self.half_width
    }

    /// Signed DFT frequency index for bin `k` of a length-`torus_len` DFT.
    pub fn signed_freq_index(&self, k: usize) -> i64 {
        let m = self.torus_len() as i64;
        let k = k as i64;
        if k <= (m - 1) / 2 {
            k
        } else {
            k - m
        }
    }

    /// Frequency value of DFT bin `k`.
    pub fn freq_of_bin(&self, k: usize) -> T {
        fromf::<T>(self.signed_freq_index(k) as f64) * self.freq_spacing()
    }

    /// Trapezoid quadrature of nodal values over `[-L, L]`.
    pub fn trapezoid(&self, values: &[T]) -> T {
        assert_eq!(values.len(), self.n_points, "value array must match grid");
        let h = self.spacing();
        let half = fromf::<T>(0.5);
        let mut s = (values[0] + values[self.n_points - 1]) * half;
        for &v in &values[1..self.n_points - 1] {
            s += v;
        }
        s * h
    }

    /// Trapezoid quadrature restricted to `x >= 0` (odd `n_points` only).
    pub fn trapezoid_positive_half(&self, values: &[T]) -> FracResult<T> {
        let zi = self.zero_index().ok_or_else(|| {
            FracError::Domain("positive-half quadrature needs an odd point count".into())
        })?;
        let h = self.spacing();
        let half = fromf::<T>(0.5);
        let mut s = (values[zi] + values[self.n_points - 1]) * half;
        for &v in &values[zi + 1..self.n_points - 1] {
            s += v;
        }
        Ok(s * h)
    }
}
