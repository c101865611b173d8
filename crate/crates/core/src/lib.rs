//! Numerics for the family of integrodifferential equations interpolating
//! heat (`alpha = 1`) and wave (`alpha = 2`) evolution, driven by spatially
//! homogeneous Gaussian noise.
//!
//! The crate provides:
//!
//! * [`kernel`] — the interpolation kernel `P_alpha(t, x)` evaluated by
//!   oscillatory quadrature, its symmetrized fundamental solution
//!   `(1/alpha) P_alpha(t, |x|)`, property reports (extrema, positivity,
//!   mass), tail-asymptote fitting, and the deterministic solver.
//! * [`noise`] — spectral measures, space correlations, integrability and
//!   nonnegativity checks, reproducible spectral synthesis of homogeneous
//!   Wiener increments, and the reproducing-kernel constructions.
//! * [`hsnorm`] — weighted `L^2_v` spaces, the truncated convolution
//!   operator, its Hilbert-Schmidt norm via spectral double integrals, the
//!   growth bounds, time-integrated norms and truncation stabilization.
//! * [`stochconv`] — Monte Carlo simulation of the stochastic convolution
//!   with validation against the Itô isometry.
//!
//! Everything is generic over the floating scalar through [`Scalar`];
//! concrete `f64`/`f32` aliases for the main types sit at the crate root.
//!
//! # Conventions
//!
//! * Forward Fourier transform: `F[f](xi) = int f(x) e^{+i x xi} dx`.
//! * Spatial grids are uniform on `[-L, L]`; the first `n-1` nodes form a
//!   period-`2L` torus.
//! * Operator discretizations use windowed linear convolution with trapezoid
//!   node weights, so the spectral double integral, the basis-sum norm and
//!   the Monte Carlo second moment agree to round-off by construction.

pub mod dft;
pub mod error;
pub mod grid;
pub mod hsnorm;
pub mod kernel;
pub mod noise;
pub mod num;
pub mod quad;
pub mod stochconv;
pub mod weight;

pub use error::{FracError, FracResult};
pub use num::Scalar;

// Concrete f64 aliases (the working precision of the CLI and test suite).
pub type FractionalOrder64 = kernel::FractionalOrder<f64>;
pub type KernelGrid64 = grid::KernelGrid<f64>;
pub type KernelEvaluation64 = kernel::KernelEvaluation<f64>;
pub type TailAsymptote64 = kernel::TailAsymptote<f64>;
// TODO(stubs): re-enable once noise/hsnorm/stochconv land.
// pub type SpectralMeasure64 = noise::SpectralMeasure<f64>;
// pub type SpaceCorrelation64 = noise::SpaceCorrelation<f64>;
pub type WeightFunction64 = weight::WeightFunction<f64>;
// pub type TruncatedKernel64 = hsnorm::TruncatedKernel<f64>;
// pub type HsReport64 = hsnorm::HsReport<f64>;
// pub type ProcessSpec64 = stochconv::ProcessSpec<f64>;
// pub type ConvolutionSample64 = stochconv::ConvolutionSample<f64>;
// pub type IsometryReport64 = stochconv::IsometryReport<f64>;

// f32 aliases for callers that want the narrow type.
pub type FractionalOrder32 = kernel::FractionalOrder<f32>;
pub type KernelGrid32 = grid::KernelGrid<f32>;
pub type KernelEvaluation32 = kernel::KernelEvaluation<f32>;
