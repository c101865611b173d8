//! Discrete transforms and convolutions in the project convention.
//!
//! The continuous forward transform used throughout is
//! `F[f](xi) = int f(x) e^{+i x xi} dx`, so inversion carries the kernel
//! `e^{-i x xi}/(2 pi)`. Discretely, forward sums therefore run the FFT in
//! its `e^{+2 pi i jk/m}` direction. Convolutions come in two flavours:
//! windowed linear convolution (operator work: the integrand is only known
//! on the grid window) and circular convolution on the period-`2L` torus
//! (evolution of periodic initial data).

use crate::grid::KernelGrid;
use crate::num::{fromf, Scalar};
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use std::sync::{Arc, Mutex};

/// Plan cache. `rustfft`'s planner memoises internally; we only serialise
/// access so the pool can be shared across rayon workers.
pub struct FftPool<T: Scalar> {
    planner: Mutex<FftPlanner<T>>,
}

impl<T: Scalar> Default for FftPool<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> FftPool<T> {
    pub fn new() -> Self {
        Self { planner: Mutex::new(FftPlanner::new()) }
    }

    pub fn plan(&self, len: usize, inverse: bool) -> Arc<dyn Fft<T>> {
        let mut p = self.planner.lock().expect("fft planner lock");
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    }
}

pub fn complex_from_real<T: Scalar>(xs: &[T]) -> Vec<Complex<T>> {
    xs.iter().map(|&x| Complex::new(x, T::zero())).collect()
}

/// Forward spectrum `h * sum_j g_j e^{+i j h xi_k}` at every conjugate bin.
///
/// `g` must have torus length `m`; bin `k` corresponds to
/// [`KernelGrid::freq_of_bin`]. The `-L` origin phase is omitted: callers of
/// this fast path only consume magnitudes.
pub fn plus_dft_bins<T: Scalar>(g: &[T], h: T, pool: &FftPool<T>) -> Vec<Complex<T>> {
    let m = g.len();
    let mut buf = complex_from_real(g);
    pool.plan(m, true).process(&mut buf);
    for c in &mut buf {
        *c = *c * h;
    }
    buf
}

/// Forward transform `h * sum_j w_j g_j e^{+i x_j xi}` at an arbitrary
/// frequency, with explicit node positions. Exact for off-grid frequencies
/// such as spectral-measure atoms.
pub fn forward_at_freq<T: Scalar>(g_weighted: &[T], x0: T, h: T, xi: T) -> Complex<T> {
    let mut re = T::zero();
    let mut im = T::zero();
    let mut j = T::zero();
    for &g in g_weighted {
        let phase = (x0 + j * h) * xi;
        re += g * phase.cos();
        im += g * phase.sin();
        j += T::one();
    }
    Complex::new(re * h, im * h)
}

/// Windowed linear convolution `r_i = h * sum_j taps[i-j] f_j`.
///
/// `taps` holds kernel values at lags `d*h` for `d = -radius ..= radius`
/// (length `2*radius + 1`); `f` is already carrying any node weights the
/// caller wants. Output has `f.len()` entries on the same node set.
pub fn linear_convolve<T: Scalar>(taps: &[T], radius: usize, f: &[T], h: T, pool: &FftPool<T>) -> Vec<T> {
    assert_eq!(taps.len(), 2 * radius + 1, "tap array length mismatch");
    let n = f.len();
    let m = (n + 2 * radius + 1).next_power_of_two();

    let mut fa = vec![Complex::new(T::zero(), T::zero()); m];
    for (j, &v) in f.iter().enumerate() {
        fa[j] = Complex::new(v, T::zero());
    }
    let mut fb = vec![Complex::new(T::zero(), T::zero()); m];
    for (l, &v) in taps.iter().enumerate() {
        fb[l] = Complex::new(v, T::zero());
    }

    let fwd = pool.plan(m, false);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    let scale = h / fromf::<T>(m as f64);
    for (a, b) in fa.iter_mut().zip(fb.iter()) {
        *a = *a * *b * scale;
    }
    pool.plan(m, true).process(&mut fa);

    (0..n).map(|i| fa[i + radius].re).collect()
}

/// Circular convolution on the torus: `r_i = h * sum_d taps_d f_{(i-d) mod m}`.
///
/// `taps` is indexed like a torus signal (`taps[0]` is lag 0, negative lags
/// wrap to the top). Both arrays have torus length `m`.
pub fn circular_convolve<T: Scalar>(taps_torus: &[T], f_torus: &[T], h: T, pool: &FftPool<T>) -> Vec<T> {
    let m = f_torus.len();
    assert_eq!(taps_torus.len(), m, "torus length mismatch");
    let mut fa = complex_from_real(f_torus);
    let mut fb = complex_from_real(taps_torus);
    let fwd = pool.plan(m, false);
    fwd.process(&mut fa);
    fwd.process(&mut fb);
    let scale = h / fromf::<T>(m as f64);
    for (a, b) in fa.iter_mut().zip(fb.iter()) {
        *a = *a * *b * scale;
    }
    pool.plan(m, true).process(&mut fa);
    fa.iter().map(|c| c.re).collect()
}

/// Fold a full node array (length `n`) into torus length `n-1` by averaging
/// the duplicated `±L` endpoints into slot 0. At the conjugate bin
/// frequencies `e^{i 2 L xi_k} = 1`, so this realises trapezoid end weights.
pub fn fold_endpoints<T: Scalar>(nodes: &[T]) -> Vec<T> {
    let n = nodes.len();
    let mut g = Vec::with_capacity(n - 1);
    g.push((nodes[0] + nodes[n - 1]) * fromf(0.5));
    g.extend_from_slice(&nodes[1..n - 1]);
    g
}

/// Trapezoid node weights: one half at both ends, one elsewhere.
pub fn trapezoid_weights<T: Scalar>(n: usize) -> Vec<T> {
    let mut w = vec![T::one(); n];
    w[0] = fromf(0.5);
    w[n - 1] = fromf(0.5);
    w
}

/// `|F|^2` helper on complex spectra.
pub fn magnitudes_squared<T: Scalar>(spectrum: &[Complex<T>]) -> Vec<T> {
    spectrum.iter().map(|c| c.re * c.re + c.im * c.im).collect()
}

/// Reference O(n^2) linear convolution used by tests.
#[doc(hidden)]
pub fn linear_convolve_naive<T: Scalar>(taps: &[T], radius: usize, f: &[T], h: T) -> Vec<T> {
    let n = f.len();
    (0..n)
        .map(|i| {
            let mut s = T::zero();
            for (j, &fj) in f.iter().enumerate() {
                let d = i as i64 - j as i64;
                if d.unsigned_abs() as usize <= radius {
                    s += taps[(d + radius as i64) as usize] * fj;
                }
            }
            s * h
        })
        .collect()
}

/// Reference O(n^2) circular convolution used by tests.
#[doc(hidden)]
pub fn circular_convolve_naive<T: Scalar>(taps: &[T], f: &[T], h: T) -> Vec<T> {
    let m = f.len();
    (0..m)
        .map(|i| {
            let mut s = T::zero();
            for (d, &t) in taps.iter().enumerate() {
                let j = (i + m - d % m) % m;
                s += t * f[j];
            }
            s * h
        })
        .collect()
}

/// Direct evaluation of [`plus_dft_bins`] used by tests.
#[doc(hidden)]
pub fn plus_dft_bins_naive<T: Scalar>(g: &[T], h: T, grid: &KernelGrid<T>) -> Vec<Complex<T>> {
    let m = g.len();
    (0..m)
        .map(|k| {
            let xi = grid.freq_of_bin(k);
            let mut re = T::zero();
            let mut im = T::zero();
            for (j, &gj) in g.iter().enumerate() {
                let phase = fromf::<T>(j as f64) * grid.spacing() * xi;
                re += gj * phase.cos();
                im += gj * phase.sin();
            }
            Complex::new(re * h, im * h)
        })
        .collect()
}
