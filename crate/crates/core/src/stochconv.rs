//! Monte Carlo simulation of the stochastic convolution
//! `I(t) = int_0^t G^R(t - s) * (b(u(s)) dW(s))`.
//!
//! Time discretization is strictly left-point (Itô): increments multiply the
//! integrand evaluated at the left endpoint of each interval, and the kernel
//! is evaluated at the left-endpoint lag, never at lag zero. The mesh is
//! graded toward `s = t`, where the kernel lag shrinks and the integrand
//! operator varies fastest; with the lag floor of the operator module both
//! the simulation and the quadrature target see the same bounded object, so
//! for deterministic integrands the second moment matches
//! `int_0^t |K_R(s, b(u))|^2_{HS} ds` up to the time-rule gap and Monte
//! Carlo error.
//!
//! Reproducibility: path `p` draws from stream `p` of the seeded generator;
//! aggregation is pairwise over the path order, so results are bit-identical
//! for any thread count.

use crate::dft::FftPool;
use crate::error::{FracError, FracResult};
use crate::grid::KernelGrid;
use crate::hsnorm::{
    apply_operator, hs_stabilization, time_integrated_hs, KernelNormalization,
    StabilizationReport, TruncatedKernel,
};
use crate::kernel::{FractionalOrder, KernelTolerances, TailAsymptote};
use crate::noise::{SpectralMeasure, WienerSampler};
use crate::num::{fromf, pairwise_sum, Scalar};
use crate::weight::WeightFunction;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

/// Pointwise coefficient `b` applied to the process.
#[derive(Debug, Clone)]
pub enum BCoeff<T> {
    One,
    Identity,
    /// Piecewise-linear table (clamped outside), with its Lipschitz constant.
    LipschitzTable { xs: Vec<T>, ys: Vec<T>, lipschitz: T },
}

impl<T: Scalar> BCoeff<T> {
    pub fn apply(&self, v: T) -> T {
        match self {
            BCoeff::One => T::one(),
            BCoeff::Identity => v,
            BCoeff::LipschitzTable { xs, ys, .. } => {
                if v <= xs[0] {
                    return ys[0];
                }
                if v >= *xs.last().unwrap() {
                    return *ys.last().unwrap();
                }
                let mut lo = 0usize;
                let mut hi = xs.len() - 1;
                while hi - lo > 1 {
                    let mid = (lo + hi) / 2;
                    if xs[mid] <= v {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let f = (v - xs[lo]) / (xs[hi] - xs[lo]);
                ys[lo] * (T::one() - f) + ys[hi] * f
            }
        }
    }
}

/// Deterministic (or frozen) process profile with its coefficient.
#[derive(Debug, Clone)]
pub struct ProcessSpec<T> {
    /// Time-constant profile `u(x)` on the grid nodes.
    pub profile: Vec<T>,
    pub b: BCoeff<T>,
}

impl<T: Scalar> ProcessSpec<T> {
    pub fn constant_one(grid: &KernelGrid<T>) -> Self {
        Self { profile: vec![T::one(); grid.n_points()], b: BCoeff::One }
    }

    pub fn deterministic_profile(
        profile: Vec<T>,
        b: BCoeff<T>,
        grid: &KernelGrid<T>,
    ) -> FracResult<Self> {
        if profile.len() != grid.n_points() {
            return Err(FracError::Input(format!(
                "profile has {} samples, grid has {}",
                profile.len(),
                grid.n_points()
            )));
        }
        if profile.iter().any(|v| !v.is_finite()) {
            return Err(FracError::Input("profile contains non-finite samples".into()));
        }
        if let BCoeff::LipschitzTable { xs, ys, .. } = &b {
            if xs.len() != ys.len() || xs.len() < 2 || xs.windows(2).any(|w| w[1] <= w[0]) {
                return Err(FracError::Input("coefficient table must be increasing in x".into()));
            }
        }
        Ok(Self { profile, b })
    }

    /// A frozen noise realization used as a deterministic profile.
    pub fn frozen_sample(
        mu: &SpectralMeasure<T>,
        grid: &KernelGrid<T>,
        b: BCoeff<T>,
        seed: u64,
    ) -> FracResult<Self>
    where
        StandardNormal: Distribution<T>,
    {
        let sampler = WienerSampler::new(mu, grid, T::one())?;
        let profile = sampler.sample(seed, 0);
        Self::deterministic_profile(profile, b, grid)
    }

    /// The effective integrand `b(u)` on the grid.
    pub fn effective_integrand(&self) -> Vec<T> {
        self.profile.iter().map(|&v| self.b.apply(v)).collect()
    }
}

/// One Monte Carlo realization of the convolution at time `t`.
#[derive(Debug, Clone)]
pub struct ConvolutionSample<T> {
    pub field: Vec<T>,
    pub l2v_norm_sq: T,
    /// Stream index the path drew from.
    pub path: u64,
}

/// Second-moment Monte Carlo summary against the quadrature target.
#[derive(Debug, Clone, Copy)]
pub struct IsometryReport<T> {
    pub mc_mean: T,
    pub mc_stderr: T,
    pub quadrature_value: T,
    pub z_score: T,
}

/// The left-point lag mesh: lags `t (k/n)^2` with weights `t (2k-1)/n^2`,
/// `k = n..1` in simulation order (step `j` uses `k = n - j`).
fn lag_mesh<T: Scalar>(t: T, n: usize) -> Vec<(T, T)> {
    (0..n)
        .map(|j| {
            let k = fromf::<T>((n - j) as f64);
            let nn = fromf::<T>(n as f64);
            let lag = t * (k / nn) * (k / nn);
            let dt = t * (fromf::<T>(2.0) * k - T::one()) / (nn * nn);
            (lag, dt)
        })
        .collect()
}

/// Simulate `n_paths` realizations of `I^R(t)`.
///
/// Step `j` contributes `K_R(t - s_j, b(u)) dW_j` with `dW_j` of variance
/// `dt_j Gamma`; the kernel lag never reaches zero. Deterministic given
/// `base_seed`, independent of the thread count.
pub fn simulate_convolution<T: Scalar>(
    order: &FractionalOrder<T>,
    r: T,
    t: T,
    spec: &ProcessSpec<T>,
    mu: &SpectralMeasure<T>,
    weight: &WeightFunction<T>,
    grid: &KernelGrid<T>,
    n_time_steps: usize,
    n_paths: usize,
    base_seed: u64,
    tols: &KernelTolerances<T>,
) -> FracResult<Vec<ConvolutionSample<T>>> {
    if n_time_steps < 4 {
        return Err(FracError::Domain("simulation needs at least 4 time steps".into()));
    }
    if !(t > T::zero()) {
        return Err(FracError::Domain("time must be positive".into()));
    }
    let n = grid.n_points();
    if spec.profile.len() != n || weight.values.len() != n {
        return Err(FracError::Input("spec/weight grids do not match the simulation grid".into()));
    }

    let integrand = spec.effective_integrand();
    let mesh = lag_mesh(t, n_time_steps);

    // Kernel taps per lag, shared across paths.
    let kernels: Vec<TruncatedKernel<T>> = mesh
        .iter()
        .map(|&(lag, _)| {
            TruncatedKernel::new(order, lag, r, grid, KernelNormalization::FundamentalSolution, tols)
        })
        .collect::<FracResult<Vec<_>>>()?;

    // One sampler per step variance; sampling respects dt via amplitude, so
    // build a unit-variance sampler and scale by sqrt(dt_j) per step.
    let sampler = WienerSampler::new(mu, grid, T::one())?;

    let samples: Vec<ConvolutionSample<T>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|path| {
            let pool = FftPool::new();
            let mut rng = WienerSampler::<T>::rng_for(base_seed, path);
            let mut field = vec![T::zero(); n];
            for (step, &(_, dt)) in mesh.iter().enumerate() {
                let unit = sampler.sample_with(&mut rng);
                let scale = dt.sqrt();
                let dw: Vec<T> = unit.iter().map(|&w| w * scale).collect();
                let contrib = apply_operator(&kernels[step], &integrand, &dw, &pool)?;
                for (acc, c) in field.iter_mut().zip(&contrib) {
                    *acc += *c;
                }
            }
            let l2v_norm_sq = weight.l2v_norm_sq(&field);
            Ok(ConvolutionSample { field, l2v_norm_sq, path })
        })
        .collect::<FracResult<Vec<_>>>()?;
    Ok(samples)
}

/// Sample mean and standard error of the squared norms.
pub fn second_moment_estimate<T: Scalar>(
    samples: &[ConvolutionSample<T>],
) -> FracResult<(T, T)> {
    if samples.len() < 30 {
        return Err(FracError::Statistics(format!(
            "second-moment estimation needs at least 30 samples, got {}",
            samples.len()
        )));
    }
    let n = samples.len();
    let norms: Vec<T> = samples.iter().map(|s| s.l2v_norm_sq).collect();
    let mean = pairwise_sum(&norms) / fromf(n as f64);
    let var = norms.iter().map(|&x| (x - mean) * (x - mean)).sum::<T>() / fromf((n - 1) as f64);
    Ok((mean, (var / fromf(n as f64)).sqrt()))
}

/// Monte Carlo second moment against the time-integrated squared
/// Hilbert-Schmidt norm (deterministic integrands make this an equality).
#[allow(clippy::too_many_arguments)]
pub fn ito_isometry_check<T: Scalar>(
    order: &FractionalOrder<T>,
    r: T,
    t: T,
    spec: &ProcessSpec<T>,
    mu: &SpectralMeasure<T>,
    weight: &WeightFunction<T>,
    grid: &KernelGrid<T>,
    n_time_steps: usize,
    n_paths: usize,
    base_seed: u64,
    tols: &KernelTolerances<T>,
) -> FracResult<IsometryReport<T>> {
    let samples = simulate_convolution(
        order, r, t, spec, mu, weight, grid, n_time_steps, n_paths, base_seed, tols,
    )?;
    let (mc_mean, mc_stderr) = second_moment_estimate(&samples)?;
    let integrand = spec.effective_integrand();
    let quad = time_integrated_hs(
        order,
        t,
        r,
        &integrand,
        mu,
        weight,
        grid,
        n_time_steps.max(48),
        tols,
    )?;
    let quadrature_value = quad.refined;
    let z_score = if mc_stderr > T::zero() {
        (mc_mean - quadrature_value) / mc_stderr
    } else {
        T::zero()
    };
    Ok(IsometryReport { mc_mean, mc_stderr, quadrature_value, z_score })
}

/// Simulation with the truncation radius chosen by norm stabilization, the
/// numerical realization of removing the truncation.
#[derive(Debug, Clone)]
pub struct SurrogateRun<T> {
    pub samples: Vec<ConvolutionSample<T>>,
    pub r_used: T,
    pub stabilization: StabilizationReport<T>,
}

#[allow(clippy::too_many_arguments)]
pub fn untruncated_surrogate<T: Scalar>(
    order: &FractionalOrder<T>,
    t: T,
    spec: &ProcessSpec<T>,
    mu: &SpectralMeasure<T>,
    weight: &WeightFunction<T>,
    grid: &KernelGrid<T>,
    tol: T,
    n_time_steps: usize,
    n_paths: usize,
    base_seed: u64,
    tail: Option<&TailAsymptote<T>>,
    tols: &KernelTolerances<T>,
) -> FracResult<SurrogateRun<T>> {
    let l = grid.half_width();
    let mut schedule: Vec<T> = Vec::new();
    let mut r = T::one();
    while r < l {
        schedule.push(r);
        r += T::one();
    }
    schedule.push(l);

    let integrand = spec.effective_integrand();
    let stabilization = hs_stabilization(
        order, t, &integrand, mu, weight, grid, &schedule, tol, tail, tols,
    )?;
    let r_used = stabilization.r_tilde;
    let samples = simulate_convolution(
        order, r_used, t, spec, mu, weight, grid, n_time_steps, n_paths, base_seed, tols,
    )?;
    Ok(SurrogateRun { samples, r_used, stabilization })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::DensitySpec;
    use approx::assert_relative_eq;

    fn order(a: f64) -> FractionalOrder<f64> {
        FractionalOrder::new(a).unwrap()
    }

    fn tols() -> KernelTolerances<f64> {
        KernelTolerances::default()
    }

    fn grid() -> KernelGrid<f64> {
        KernelGrid::new(16.0, 257).unwrap()
    }

    fn weight_on(g: &KernelGrid<f64>) -> WeightFunction<f64> {
        WeightFunction::exponential(*g)
    }

    fn unit_atom() -> SpectralMeasure<f64> {
        SpectralMeasure::new(DensitySpec::Zero, &[(0.0, 1.0)]).unwrap()
    }

    fn gaussian_measure() -> SpectralMeasure<f64> {
        SpectralMeasure::new(DensitySpec::Gaussian { mass: 1.0, sigma: 1.0 }, &[]).unwrap()
    }

    #[test]
    fn coefficient_variants_evaluate() {
        let b = BCoeff::LipschitzTable {
            xs: vec![0.0, 1.0, 2.0],
            ys: vec![0.0, 2.0, 3.0],
            lipschitz: 2.0,
        };
        assert_relative_eq!(b.apply(0.5), 1.0);
        assert_relative_eq!(b.apply(1.5), 2.5);
        assert_relative_eq!(b.apply(-1.0), 0.0, epsilon = 1e-15);
        assert_relative_eq!(b.apply(5.0), 3.0);
        assert_relative_eq!(BCoeff::One.apply(7.0), 1.0);
        assert_relative_eq!(BCoeff::Identity.apply(7.0), 7.0);
    }

    #[test]
    fn atom_noise_gives_spatially_flat_samples_with_unit_total_variance() {
        let g = grid();
        let w = weight_on(&g);
        let spec = ProcessSpec::constant_one(&g);
        let t = 1.0;
        let r = 5.0;
        let samples = simulate_convolution(
            &order(1.5),
            r,
            t,
            &spec,
            &unit_atom(),
            &w,
            &g,
            4,
            4000,
            7,
            &tols(),
        )
        .unwrap();
        // Interior flatness: the operator sees the constant field.
        let zi = g.zero_index().unwrap();
        for s in samples.iter().take(50) {
            let centre = s.field[zi];
            for (i, &x) in g.nodes().iter().enumerate() {
                if x.abs() < 16.0 - r - 3.0 * g.spacing() {
                    assert!(
                        (s.field[i] - centre).abs() < 1e-10 * centre.abs().max(1e-10),
                        "path {}: node {i}",
                        s.path
                    );
                }
            }
        }
        // Pointwise variance at the centre ~ sum of dt_j m_R(tau_j)^2 ~ t.
        let vals: Vec<f64> = samples.iter().map(|s| s.field[zi]).collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64;
        let se = t * (2.0 / vals.len() as f64).sqrt();
        assert!(mean.abs() < 3.0 * (t / vals.len() as f64).sqrt(), "mean {mean}");
        assert!((var - t).abs() < 4.0 * se, "var {var} vs t {t}");
    }

    #[test]
    fn sample_means_vanish_pointwise() {
        let g = grid();
        let w = weight_on(&g);
        let spec = ProcessSpec::constant_one(&g);
        let samples = simulate_convolution(
            &order(1.5),
            5.0,
            1.0,
            &spec,
            &gaussian_measure(),
            &w,
            &g,
            8,
            4000,
            11,
            &tols(),
        )
        .unwrap();
        let zi = g.zero_index().unwrap();
        for idx in [zi, zi / 2, zi + zi / 2] {
            let vals: Vec<f64> = samples.iter().map(|s| s.field[idx]).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let std =
                (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (vals.len() - 1) as f64).sqrt();
            let se = std / (vals.len() as f64).sqrt();
            assert!(mean.abs() <= 3.0 * se, "node {idx}: mean {mean}, se {se}");
        }
    }

    #[test]
    fn second_moment_scales_linearly_with_measure_mass() {
        let g = grid();
        let w = weight_on(&g);
        let spec = ProcessSpec::constant_one(&g);
        let mu = gaussian_measure();
        let c = 3.0;
        let a = simulate_convolution(
            &order(1.5), 5.0, 1.0, &spec, &mu, &w, &g, 6, 64, 3, &tols(),
        )
        .unwrap();
        let b = simulate_convolution(
            &order(1.5), 5.0, 1.0, &spec, &mu.scaled(c), &w, &g, 6, 64, 3, &tols(),
        )
        .unwrap();
        // Common random numbers: fields scale by sqrt(c), norms by c.
        for (x, y) in a.iter().zip(&b) {
            assert_relative_eq!(y.l2v_norm_sq, c * x.l2v_norm_sq, max_relative = 1e-9);
        }
    }

    #[test]
    fn doubling_the_integrand_doubles_the_fields_exactly() {
        let g = grid();
        let w = weight_on(&g);
        let one = ProcessSpec::constant_one(&g);
        let two = ProcessSpec::deterministic_profile(
            vec![2.0; g.n_points()],
            BCoeff::Identity,
            &g,
        )
        .unwrap();
        let a = simulate_convolution(
            &order(1.3), 4.0, 0.5, &one, &gaussian_measure(), &w, &g, 5, 32, 19, &tols(),
        )
        .unwrap();
        let b = simulate_convolution(
            &order(1.3), 4.0, 0.5, &two, &gaussian_measure(), &w, &g, 5, 32, 19, &tols(),
        )
        .unwrap();
        for (x, y) in a.iter().zip(&b) {
            for (p, q) in x.field.iter().zip(&y.field) {
                assert_eq!(*q, 2.0 * *p, "doubling must be bit-exact");
            }
            assert_eq!(y.l2v_norm_sq, 4.0 * x.l2v_norm_sq);
        }
    }

    #[test]
    fn runs_are_reproducible_and_order_stable() {
        let g = grid();
        let w = weight_on(&g);
        let spec = ProcessSpec::constant_one(&g);
        let a = simulate_convolution(
            &order(1.5), 5.0, 1.0, &spec, &gaussian_measure(), &w, &g, 4, 48, 123, &tols(),
        )
        .unwrap();
        let b = simulate_convolution(
            &order(1.5), 5.0, 1.0, &spec, &gaussian_measure(), &w, &g, 4, 48, 123, &tols(),
        )
        .unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.field, y.field, "same seed must reproduce bit-identically");
            assert_eq!(x.path, y.path);
        }
    }

    #[test]
    fn second_moment_estimate_requires_enough_samples() {
        let g = grid();
        let w = weight_on(&g);
        let spec = ProcessSpec::constant_one(&g);
        let samples = simulate_convolution(
            &order(1.5), 5.0, 1.0, &spec, &unit_atom(), &w, &g, 4, 29, 1, &tols(),
        )
        .unwrap();
        assert!(second_moment_estimate(&samples).is_err());
    }

    #[test]
    fn independent_seeds_agree_within_joint_error() {
        let g = grid();
        let w = weight_on(&g);
        let spec = ProcessSpec::constant_one(&g);
        let runs: Vec<(f64, f64)> = [100u64, 200]
            .iter()
            .map(|&seed| {
                let s = simulate_convolution(
                    &order(1.5), 5.0, 1.0, &spec, &gaussian_measure(), &w, &g, 8, 2000, seed,
                    &tols(),
                )
                .unwrap();
                second_moment_estimate(&s).unwrap()
            })
            .collect();
        let joint = (runs[0].1.powi(2) + runs[1].1.powi(2)).sqrt();
        assert!(
            (runs[0].0 - runs[1].0).abs() <= 3.0 * joint,
            "{} vs {} (joint se {joint})",
            runs[0].0,
            runs[1].0
        );
    }

    #[test]
    fn isometry_holds_for_deterministic_integrands() {
        let g = grid();
        let w = weight_on(&g);
        let spec = ProcessSpec::constant_one(&g);
        let rep = ito_isometry_check(
            &order(1.5),
            5.0,
            1.0,
            &spec,
            &gaussian_measure(),
            &w,
            &g,
            32,
            2000,
            2024,
            &tols(),
        )
        .unwrap();
        assert!(rep.z_score.abs() <= 3.0, "z = {} (mc {} vs quad {})", rep.z_score, rep.mc_mean, rep.quadrature_value);
    }

    #[test]
    fn zero_measure_gives_zero_on_both_sides() {
        let g = grid();
        let w = weight_on(&g);
        let spec = ProcessSpec::constant_one(&g);
        let mu = SpectralMeasure::new(DensitySpec::Zero, &[]).unwrap();
        let rep = ito_isometry_check(
            &order(1.5), 5.0, 1.0, &spec, &mu, &w, &g, 8, 64, 5, &tols(),
        )
        .unwrap();
        assert_eq!(rep.mc_mean, 0.0);
        assert_eq!(rep.quadrature_value, 0.0);
        assert_eq!(rep.z_score, 0.0);
    }

    #[test]
    fn refining_the_time_mesh_shrinks_the_isometry_bias() {
        let g = grid();
        let w = weight_on(&g);
        let spec = ProcessSpec::constant_one(&g);
        let biases: Vec<f64> = [8usize, 32]
            .iter()
            .map(|&steps| {
                let rep = ito_isometry_check(
                    &order(1.8),
                    5.0,
                    1.0,
                    &spec,
                    &gaussian_measure(),
                    &w,
                    &g,
                    steps,
                    4000,
                    77,
                    &tols(),
                )
                .unwrap();
                ((rep.mc_mean - rep.quadrature_value) / rep.quadrature_value, rep.mc_stderr / rep.quadrature_value)
            })
            .map(|(bias, se)| bias.abs() - 2.0 * se)
            .collect();
        // The coarse-mesh bias must exceed the fine-mesh bias allowing for
        // Monte Carlo noise on both runs.
        assert!(
            biases[0] > biases[1],
            "coarse-mesh bias {} should dominate fine-mesh bias {}",
            biases[0],
            biases[1]
        );
    }

    #[test]
    fn surrogate_selects_a_small_radius_and_is_truncation_insensitive() {
        let g = grid();
        let w = weight_on(&g);
        let spec = ProcessSpec::constant_one(&g);
        let run = untruncated_surrogate(
            &order(1.5),
            1.0,
            &spec,
            &gaussian_measure(),
            &w,
            &g,
            1e-6,
            8,
            2000,
            31,
            None,
            &tols(),
        )
        .unwrap();
        assert!(run.r_used <= 8.0, "r_used {}", run.r_used);

        // Larger tolerance can only shrink the radius.
        let loose = untruncated_surrogate(
            &order(1.5),
            1.0,
            &spec,
            &gaussian_measure(),
            &w,
            &g,
            1e-2,
            8,
            64,
            31,
            None,
            &tols(),
        )
        .unwrap();
        assert!(loose.r_used <= run.r_used);

        // Doubling the radius moves the second moment by less than the joint
        // Monte Carlo error (same seeds: the difference is the tiny tail).
        let (m1, s1) = second_moment_estimate(&run.samples).unwrap();
        let double = simulate_convolution(
            &order(1.5),
            (2.0 * run.r_used).min(16.0),
            1.0,
            &spec,
            &gaussian_measure(),
            &w,
            &g,
            8,
            2000,
            31,
            &tols(),
        )
        .unwrap();
        let (m2, s2) = second_moment_estimate(&double).unwrap();
        let joint = (s1 * s1 + s2 * s2).sqrt();
        assert!((m1 - m2).abs() <= 3.0 * joint.max(1e-12), "{m1} vs {m2}");
    }

    #[test]
    fn frozen_profiles_are_deterministic() {
        let g = grid();
        let a = ProcessSpec::frozen_sample(&gaussian_measure(), &g, BCoeff::Identity, 5).unwrap();
        let b = ProcessSpec::frozen_sample(&gaussian_measure(), &g, BCoeff::Identity, 5).unwrap();
        assert_eq!(a.profile, b.profile);
        assert!(a.profile.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn simulation_validates_inputs() {
        let g = grid();
        let w = weight_on(&g);
        let spec = ProcessSpec::constant_one(&g);
        assert!(simulate_convolution(
            &order(1.5), 5.0, 1.0, &spec, &unit_atom(), &w, &g, 3, 8, 0, &tols()
        )
        .is_err());
        assert!(simulate_convolution(
            &order(1.5), 5.0, -1.0, &spec, &unit_atom(), &w, &g, 8, 8, 0, &tols()
        )
        .is_err());
        // Divergent measure is refused by the sampler.
        let xi: Vec<f64> = (0..4000).map(|i| i as f64 * 0.5).collect();
        let density: Vec<f64> = xi.iter().map(|&x| 1.0 + x * x).collect();
        let bad = SpectralMeasure::new(DensitySpec::Table { xi, density }, &[]).unwrap();
        assert!(matches!(
            simulate_convolution(&order(1.5), 5.0, 1.0, &spec, &bad, &w, &g, 8, 8, 0, &tols()),
            Err(FracError::MeasureRefused(_))
        ));
    }
}
