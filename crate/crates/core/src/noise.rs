//! Spatially homogeneous Gaussian noise from a spectral measure.
//!
//! A measure `mu` is an even density plus symmetric atoms. Its transform
//! `Gamma = F(mu)` is the space correlation: increment fields satisfy
//! `E[X(x) X(y)] = dt Gamma(x - y)`. Fields are synthesized spectrally on
//! the grid's conjugate frequencies (fast, exactly homogeneous) with atoms
//! kept at their exact, possibly off-grid frequencies.
//!
//! The discretized measure [`MeasureOnGrid`] is the single source of truth
//! for the support points and weights used by the sampler, the
//! reproducing-kernel constructions and the Hilbert-Schmidt sums: using one
//! discretization everywhere is what makes the operator identities exact in
//! the discrete setting.

use crate::dft::FftPool;
use crate::error::{FracError, FracResult};
use crate::grid::KernelGrid;
use crate::num::{fromf, pairwise_sum, tof64, Scalar};
use crate::quad::{integrate, QuadConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

/// Even nonnegative spectral density.
#[derive(Debug, Clone, PartialEq)]
pub enum DensitySpec<T> {
    Zero,
    /// Lebesgue-type flat density.
    Constant { value: T },
    /// `mass * exp(-xi^2 / (2 sigma^2)) / (sigma sqrt(2 pi))`; its transform
    /// is `mass * exp(-sigma^2 x^2 / 2)`.
    Gaussian { mass: T, sigma: T },
    /// Tabulated on `xi >= 0` (even extension, zero outside the table).
    Table { xi: Vec<T>, density: Vec<T> },
}

impl<T: Scalar> DensitySpec<T> {
    pub fn eval(&self, xi: T) -> T {
        let xi = xi.abs();
        match self {
            DensitySpec::Zero => T::zero(),
            DensitySpec::Constant { value } => *value,
            DensitySpec::Gaussian { mass, sigma } => {
                let two_pi = fromf::<T>(2.0) * T::PI();
                *mass * (-(xi * xi) / (fromf::<T>(2.0) * *sigma * *sigma)).exp()
                    / (*sigma * two_pi.sqrt())
            }
            DensitySpec::Table { xi: xs, density } => {
                if xs.is_empty() || xi > *xs.last().unwrap() {
                    return T::zero();
                }
                let mut lo = 0usize;
                let mut hi = xs.len() - 1;
                while hi - lo > 1 {
                    let mid = (lo + hi) / 2;
                    if xs[mid] <= xi {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                if hi == lo {
                    return density[lo];
                }
                let f = (xi - xs[lo]) / (xs[hi] - xs[lo]);
                density[lo] * (T::one() - f) + density[hi] * f
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, DensitySpec::Zero)
    }
}

/// Spectral measure: even density plus symmetric atoms.
#[derive(Debug, Clone)]
pub struct SpectralMeasure<T> {
    density: DensitySpec<T>,
    /// Atom mass at frequency 0.
    atom_zero: T,
    /// `(loc > 0, mass)`; each entry stands for the pair at `±loc`.
    atom_pairs: Vec<(T, T)>,
}

impl<T: Scalar> SpectralMeasure<T> {
    /// Build from a density and a raw atom list `(location, mass)`.
    ///
    /// The list must be closed under negation with equal masses (an atom at
    /// 0 stands alone); masses must be positive.
    pub fn new(density: DensitySpec<T>, atoms: &[(T, T)]) -> FracResult<Self> {
        if let DensitySpec::Table { xi, density } = &density {
            if xi.len() != density.len() || xi.is_empty() {
                return Err(FracError::Input("table density needs matching non-empty arrays".into()));
            }
            if xi[0] != T::zero() || xi.windows(2).any(|w| w[1] <= w[0]) {
                return Err(FracError::Input("table grid must start at 0 and increase".into()));
            }
            if density.iter().any(|&d| d < T::zero() || !d.is_finite()) {
                return Err(FracError::Input("table density must be nonnegative".into()));
            }
        }
        if let DensitySpec::Constant { value } = density {
            if value < T::zero() {
                return Err(FracError::Input("constant density must be nonnegative".into()));
            }
        }

        let mut atom_zero = T::zero();
        let mut pos: Vec<(T, T)> = Vec::new();
        let mut neg: Vec<(T, T)> = Vec::new();
        for &(loc, mass) in atoms {
            if !(mass > T::zero()) || !loc.is_finite() {
                return Err(FracError::Input("atom masses must be positive and finite".into()));
            }
            if loc == T::zero() {
                atom_zero += mass;
            } else if loc > T::zero() {
                pos.push((loc, mass));
            } else {
                neg.push((-loc, mass));
            }
        }
        pos.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        neg.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        if pos.len() != neg.len()
            || pos
                .iter()
                .zip(neg.iter())
                .any(|(p, n)| p.0 != n.0 || (p.1 - n.1).abs() > fromf(1e-12))
        {
            return Err(FracError::Input(
                "atoms must be symmetric: every atom at xi needs a partner at -xi with equal mass"
                    .into(),
            ));
        }
        Ok(Self { density, atom_zero, atom_pairs: pos })
    }

    pub fn density(&self) -> &DensitySpec<T> {
        &self.density
    }

    pub fn atom_zero(&self) -> T {
        self.atom_zero
    }

    pub fn atom_pairs(&self) -> &[(T, T)] {
        &self.atom_pairs
    }

    /// Measure with density and atom masses scaled by `c >= 0`.
    pub fn scaled(&self, c: T) -> Self {
        let density = match &self.density {
            DensitySpec::Zero => DensitySpec::Zero,
            DensitySpec::Constant { value } => DensitySpec::Constant { value: *value * c },
            DensitySpec::Gaussian { mass, sigma } => {
                DensitySpec::Gaussian { mass: *mass * c, sigma: *sigma }
            }
            DensitySpec::Table { xi, density } => DensitySpec::Table {
                xi: xi.clone(),
                density: density.iter().map(|&d| d * c).collect(),
            },
        };
        Self {
            density,
            atom_zero: self.atom_zero * c,
            atom_pairs: self.atom_pairs.iter().map(|&(l, m)| (l, m * c)).collect(),
        }
    }

    /// Measure plus an extra atom of mass `kappa` at 0.
    pub fn with_zero_atom(&self, kappa: T) -> Self {
        let mut out = self.clone();
        out.atom_zero += kappa;
        out
    }
}

/// JSON measure-definition file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpecFile {
    #[serde(default)]
    pub density: Option<DensitySpecFile>,
    #[serde(default)]
    pub atoms: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DensitySpecFile {
    Constant { value: f64 },
    Gaussian { mass: f64, sigma: f64 },
    Table { xi: Vec<f64>, density: Vec<f64> },
}

impl MeasureSpecFile {
    pub fn parse(json: &str) -> FracResult<Self> {
        serde_json::from_str(json).map_err(|e| FracError::Config(format!("measure file: {e}")))
    }

    pub fn build<T: Scalar>(&self) -> FracResult<SpectralMeasure<T>> {
        let density = match &self.density {
            None => DensitySpec::Zero,
            Some(DensitySpecFile::Constant { value }) => {
                DensitySpec::Constant { value: fromf(*value) }
            }
            Some(DensitySpecFile::Gaussian { mass, sigma }) => {
                if *sigma <= 0.0 {
                    return Err(FracError::Config("gaussian density needs sigma > 0".into()));
                }
                DensitySpec::Gaussian { mass: fromf(*mass), sigma: fromf(*sigma) }
            }
            Some(DensitySpecFile::Table { xi, density }) => DensitySpec::Table {
                xi: xi.iter().map(|&v| fromf(v)).collect(),
                density: density.iter().map(|&v| fromf(v)).collect(),
            },
        };
        let atoms: Vec<(T, T)> =
            self.atoms.iter().map(|&(l, m)| (fromf(l), fromf(m))).collect();
        SpectralMeasure::new(density, &atoms)
    }
}

/// Outcome of the integrability check `int d mu / (1 + xi^2) < inf`.
#[derive(Debug, Clone, Copy)]
pub struct IntegrabilityReport<T> {
    pub value: T,
    pub holds: bool,
    /// Frequency cutoff at which the doubling scheme stopped.
    pub cutoff: T,
}

/// Check `int d mu(xi) / (1 + xi^2) < inf` by cutoff doubling.
///
/// Density increments over `[C, 2C]` are accumulated until they become
/// negligible; increments that keep growing flag divergence and the last
/// partial sum is reported.
pub fn check_spectral_integrability<T: Scalar>(mu: &SpectralMeasure<T>) -> IntegrabilityReport<T> {
    let mut value = mu.atom_zero();
    for &(loc, mass) in mu.atom_pairs() {
        value += fromf::<T>(2.0) * mass / (T::one() + loc * loc);
    }

    if mu.density().is_zero() {
        return IntegrabilityReport { value, holds: true, cutoff: T::zero() };
    }

    let quad = QuadConfig { abs_tol: fromf(1e-12), rel_tol: fromf(1e-10), max_panels: 4000 };
    let density = mu.density().clone();
    let segment = |a: T, b: T| {
        let d = density.clone();
        fromf::<T>(2.0)
            * integrate(move |xi: T| d.eval(xi) / (T::one() + xi * xi), a, b, &[], &quad).value
    };

    let mut cutoff = fromf::<T>(8.0);
    value += segment(T::zero(), cutoff);
    let mut growing_streak = 0usize;
    let mut prev_increment: Option<T> = None;
    for _ in 0..40 {
        let inc = segment(cutoff, cutoff * fromf(2.0));
        cutoff = cutoff * fromf(2.0);
        value += inc;
        if let Some(prev) = prev_increment {
            if inc > prev * fromf(1.2) {
                growing_streak += 1;
                if growing_streak >= 3 {
                    return IntegrabilityReport { value, holds: false, cutoff };
                }
            } else {
                growing_streak = 0;
            }
        }
        prev_increment = Some(inc);
        if inc <= fromf::<T>(1e-8).max(fromf::<T>(1e-5) * value.abs()) {
            return IntegrabilityReport { value, holds: true, cutoff };
        }
    }
    IntegrabilityReport { value, holds: false, cutoff }
}

/// Space correlation `Gamma = F(mu)` sampled on a grid.
#[derive(Debug, Clone)]
pub struct SpaceCorrelation<T> {
    pub grid: KernelGrid<T>,
    pub values: Vec<T>,
    /// Lebesgue shift from the nonnegativity check, when one was needed.
    pub kappa_shift: Option<T>,
}

/// Pointwise `Gamma(x) = int e^{i x xi} d mu(xi)` (real by symmetry).
pub fn correlation_value<T: Scalar>(mu: &SpectralMeasure<T>, x: T) -> FracResult<T> {
    let mut v = mu.atom_zero();
    for &(loc, mass) in mu.atom_pairs() {
        v += fromf::<T>(2.0) * mass * (loc * x).cos();
    }
    if mu.density().is_zero() {
        return Ok(v);
    }
    let cutoff = density_support_cutoff(mu)?;
    let quad = QuadConfig { abs_tol: fromf(1e-11), rel_tol: fromf(1e-9), max_panels: 20_000 };
    let density = mu.density().clone();
    let breaks: Vec<T> = (1..64).map(|k| cutoff * fromf(k as f64 / 64.0)).collect();
    let r = integrate(
        move |xi: T| density.eval(xi) * (x * xi).cos(),
        T::zero(),
        cutoff,
        &breaks,
        &quad,
    );
    Ok(v + fromf::<T>(2.0) * r.value)
}

/// Frequency beyond which the density's remaining mass is negligible.
/// Errors when the density is not integrable (flat tails): the correlation
/// is then distributional, not a function.
fn density_support_cutoff<T: Scalar>(mu: &SpectralMeasure<T>) -> FracResult<T> {
    let quad = QuadConfig { abs_tol: fromf(1e-13), rel_tol: fromf(1e-11), max_panels: 2000 };
    let density = mu.density().clone();
    let segment = |a: T, b: T| {
        let d = density.clone();
        integrate(move |xi: T| d.eval(xi), a, b, &[], &quad).value
    };
    let mut cutoff = fromf::<T>(4.0);
    let mut total = segment(T::zero(), cutoff);
    for _ in 0..30 {
        let inc = segment(cutoff, cutoff * fromf(2.0));
        cutoff = cutoff * fromf(2.0);
        total += inc;
        if inc <= fromf::<T>(1e-12) * total.max(T::one()) {
            return Ok(cutoff);
        }
    }
    Err(FracError::Domain(
        "spectral density is not integrable; its correlation is not a pointwise function".into(),
    ))
}

/// Sample `Gamma = F(mu)` on the grid.
pub fn covariance_from_spectral<T: Scalar>(
    mu: &SpectralMeasure<T>,
    grid: &KernelGrid<T>,
) -> FracResult<SpaceCorrelation<T>> {
    use rayon::prelude::*;
    let nodes = grid.nodes();
    let values: Vec<T> = nodes
        .par_iter()
        .map(|&x| correlation_value(mu, x))
        .collect::<FracResult<Vec<T>>>()?;
    Ok(SpaceCorrelation { grid: *grid, values, kappa_shift: None })
}

/// Which path decided the shifted-nonnegativity verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NonnegativityMethod {
    /// The integrability condition (the equivalent characterization).
    Integrability,
    /// The mollified-transform probe.
    MollifiedProbe,
}

#[derive(Debug, Clone, Copy)]
pub struct NonnegativityReport<T> {
    pub holds: bool,
    /// Smallest probed Lebesgue shift making every mollified transform
    /// nonnegative (0 when none was needed).
    pub kappa: T,
    pub method: NonnegativityMethod,
}

/// Decide whether `Gamma + kappa * Lebesgue` is a nonnegative measure for
/// some `kappa >= 0`.
///
/// Primary path: the integrability condition, which is equivalent.
/// Secondary probe: for `N` in a small schedule, the transform of
/// `e^{-xi^2/N} (mu + kappa delta_0)` must be nonnegative for one `kappa`
/// from `{0, 1, 10}` uniformly over the schedule. Disagreement between the
/// two paths is an error, never silently resolved.
pub fn check_shifted_nonnegativity<T: Scalar>(
    mu: &SpectralMeasure<T>,
) -> FracResult<NonnegativityReport<T>> {
    let integrability = check_spectral_integrability(mu);

    let schedule_n = [1.0, 4.0, 16.0, 64.0];
    let kappas = [0.0, 1.0, 10.0];
    let mut probe_kappa: Option<T> = None;
    'kappa: for &k in &kappas {
        let kappa: T = fromf(k);
        for &n in &schedule_n {
            if !mollified_transform_nonnegative(mu, fromf(n), kappa) {
                continue 'kappa;
            }
        }
        probe_kappa = Some(kappa);
        break;
    }
    let probe_holds = probe_kappa.is_some();

    if probe_holds != integrability.holds {
        return Err(FracError::Inconclusive(format!(
            "integrability says holds={}, mollified probe says holds={probe_holds}; refusing to resolve numerically",
            integrability.holds
        )));
    }
    Ok(NonnegativityReport {
        holds: integrability.holds,
        kappa: probe_kappa.unwrap_or_else(T::zero),
        method: NonnegativityMethod::Integrability,
    })
}

/// Scan minimum of the transform of `e^{-xi^2/N}(mu + kappa delta_0)`
/// against a round-off floor.
fn mollified_transform_nonnegative<T: Scalar>(
    mu: &SpectralMeasure<T>,
    n_mollify: T,
    kappa: T,
) -> bool {
    use rayon::prelude::*;
    let quad = QuadConfig { abs_tol: fromf(1e-11), rel_tol: fromf(1e-9), max_panels: 8000 };
    // The Gaussian mollifier kills the density tail at scale sqrt(N).
    let cutoff = (n_mollify.sqrt() * fromf(12.0)).max(fromf(40.0));
    let density = mu.density().clone();
    let atom_zero = mu.atom_zero();
    let atoms = mu.atom_pairs().to_vec();

    let transform_at = move |x: T| -> T {
        let d = density.clone();
        let body = integrate(
            move |xi: T| d.eval(xi) * (-(xi * xi) / n_mollify).exp() * (x * xi).cos(),
            T::zero(),
            cutoff,
            &[],
            &quad,
        )
        .value;
        let mut v = fromf::<T>(2.0) * body + atom_zero + kappa;
        for &(loc, mass) in &atoms {
            v += fromf::<T>(2.0) * mass * (-(loc * loc) / n_mollify).exp() * (loc * x).cos();
        }
        v
    };

    let at_zero = transform_at(T::zero());
    let floor = -fromf::<T>(1e-9) * (at_zero.abs() + kappa + T::one());
    (0..2001)
        .into_par_iter()
        .map(|i| transform_at(fromf::<T>(i as f64) * fromf(0.01)) >= floor)
        .reduce(|| true, |a, b| a && b)
}

/// One support point of the discretized measure.
#[derive(Debug, Clone, Copy)]
pub struct SupportPoint<T> {
    /// Frequency `>= 0`.
    pub freq: T,
    /// Weight per side (mass for atoms, `density * delta_xi` for bins).
    pub weight: T,
    /// True when the point stands for the `±freq` pair; false only at 0.
    pub paired: bool,
}

/// The measure discretized on a grid's conjugate frequencies plus its exact
/// atoms. Shared by the sampler, the reproducing-kernel constructions and
/// the Hilbert-Schmidt sums.
#[derive(Debug, Clone)]
pub struct MeasureOnGrid<T> {
    pub grid: KernelGrid<T>,
    pub delta_xi: T,
    points: Vec<SupportPoint<T>>,
}

impl<T: Scalar> MeasureOnGrid<T> {
    pub fn new(mu: &SpectralMeasure<T>, grid: &KernelGrid<T>) -> Self {
        let m = grid.torus_len();
        let delta_xi = grid.freq_spacing();
        let k_max = (m - 1) / 2; // paired bins; an unpaired Nyquist bin (even m) is dropped

        let mut points = Vec::with_capacity(k_max + mu.atom_pairs().len() + 1);
        let zero_w = mu.density().eval(T::zero()) * delta_xi + mu.atom_zero();
        if zero_w > T::zero() {
            points.push(SupportPoint { freq: T::zero(), weight: zero_w, paired: false });
        }
        // Atoms keep their exact frequencies; exact coincidences with a bin
        // merge into the bin weight so no support point is duplicated.
        let mut bin_extra: Vec<(usize, T)> = Vec::new();
        for &(loc, mass) in mu.atom_pairs() {
            let k = tof64(loc / delta_xi).round() as usize;
            if k >= 1 && k <= k_max && fromf::<T>(k as f64) * delta_xi == loc {
                bin_extra.push((k, mass));
            } else {
                points.push(SupportPoint { freq: loc, weight: mass, paired: true });
            }
        }
        for k in 1..=k_max {
            let freq = fromf::<T>(k as f64) * delta_xi;
            let mut w = mu.density().eval(freq) * delta_xi;
            for &(kb, mass) in &bin_extra {
                if kb == k {
                    w += mass;
                }
            }
            if w > T::zero() {
                points.push(SupportPoint { freq, weight: w, paired: true });
            }
        }
        Self { grid: *grid, delta_xi, points }
    }

    pub fn points(&self) -> &[SupportPoint<T>] {
        &self.points
    }

    /// Total measure mass of the discretization.
    pub fn total_mass(&self) -> T {
        self.points
            .iter()
            .map(|p| if p.paired { p.weight * fromf(2.0) } else { p.weight })
            .sum()
    }

    /// Real dimension of `L^2` over the discretized measure: two per pair
    /// (even and odd), one for the zero point.
    pub fn support_dim(&self) -> usize {
        self.points.iter().map(|p| if p.paired { 2 } else { 1 }).sum()
    }
}

/// Element of the reproducing-kernel space in spectral coordinates: one
/// complex coefficient per support point (its value at `+freq`; the value
/// at `-freq` is the conjugate, so the spatial field is real).
#[derive(Debug, Clone)]
pub struct RkhsElement<T> {
    pub coeffs: Vec<Complex<T>>,
}

impl<T: Scalar> RkhsElement<T> {
    pub fn new(coeffs: Vec<Complex<T>>, measure: &MeasureOnGrid<T>) -> FracResult<Self> {
        if coeffs.len() != measure.points().len() {
            return Err(FracError::Input(format!(
                "element has {} coefficients, measure has {} support points",
                coeffs.len(),
                measure.points().len()
            )));
        }
        for (c, p) in coeffs.iter().zip(measure.points()) {
            if !p.paired && c.im != T::zero() {
                return Err(FracError::Input(
                    "coefficient at frequency 0 must be real (hermitian symmetry)".into(),
                ));
            }
        }
        Ok(Self { coeffs })
    }

    /// Spatial field `sum_p w_p (c_p e^{i x freq} + conjugate side)`, real.
    pub fn spatial_field(&self, measure: &MeasureOnGrid<T>, nodes: &[T]) -> Vec<T> {
        nodes
            .iter()
            .map(|&x| {
                let mut v = T::zero();
                for (c, p) in self.coeffs.iter().zip(measure.points()) {
                    if p.paired {
                        let phase = p.freq * x;
                        v += fromf::<T>(2.0) * p.weight * (c.re * phase.cos() - c.im * phase.sin());
                    } else {
                        v += p.weight * c.re;
                    }
                }
                v
            })
            .collect()
    }
}

/// `L^2(mu)` norm of an element; by the reproducing-kernel characterization
/// this equals the norm of the associated distribution.
pub fn rkhs_norm<T: Scalar>(element: &RkhsElement<T>, measure: &MeasureOnGrid<T>) -> T {
    let mut s = T::zero();
    for (c, p) in element.coeffs.iter().zip(measure.points()) {
        let m2 = c.re * c.re + c.im * c.im;
        s += if p.paired { fromf::<T>(2.0) * p.weight * m2 } else { p.weight * m2 };
    }
    s.sqrt()
}

/// First `n` elements of the canonical orthonormal basis: one real element
/// per unpaired point, an even/odd pair per paired point, in support order.
pub fn rkhs_basis<T: Scalar>(
    measure: &MeasureOnGrid<T>,
    n: usize,
) -> FracResult<Vec<RkhsElement<T>>> {
    let dim = measure.support_dim();
    if n > dim {
        return Err(FracError::Basis(format!(
            "requested {n} basis elements, discretized measure supports {dim}"
        )));
    }
    let np = measure.points().len();
    let mut out = Vec::with_capacity(n);
    'outer: for (idx, p) in measure.points().iter().enumerate() {
        let variants: &[Complex<T>] = if p.paired {
            &[Complex { re: T::one(), im: T::zero() }, Complex { re: T::zero(), im: T::one() }]
        } else {
            &[Complex { re: T::one(), im: T::zero() }]
        };
        for v in variants {
            if out.len() == n {
                break 'outer;
            }
            let norm = if p.paired { (fromf::<T>(2.0) * p.weight).sqrt() } else { p.weight.sqrt() };
            let mut coeffs = vec![Complex { re: T::zero(), im: T::zero() }; np];
            coeffs[idx] = Complex { re: v.re / norm, im: v.im / norm };
            out.push(RkhsElement { coeffs });
        }
    }
    Ok(out)
}

/// Reproducible sampler of homogeneous Wiener increments.
///
/// Determinism contract: a field is a pure function of
/// `(measure, grid, dt, seed, stream)`. Streams index independent samples
/// (Monte Carlo paths); within a stream, successive rows consume the RNG
/// sequentially in time order. Parallel callers assign one stream per path,
/// so results never depend on the thread count.
pub struct WienerSampler<T: Scalar> {
    pub grid: KernelGrid<T>,
    pub dt: T,
    measure: MeasureOnGrid<T>,
    pool: FftPool<T>,
}

impl<T: Scalar> WienerSampler<T>
where
    StandardNormal: Distribution<T>,
{
    pub fn new(mu: &SpectralMeasure<T>, grid: &KernelGrid<T>, dt: T) -> FracResult<Self> {
        if !(dt > T::zero()) {
            return Err(FracError::Domain("increment variance dt must be positive".into()));
        }
        let integ = check_spectral_integrability(mu);
        if !integ.holds {
            return Err(FracError::MeasureRefused(format!(
                "spectral measure fails the integrability condition (partial value {:.3e})",
                tof64(integ.value)
            )));
        }
        Ok(Self { grid: *grid, dt, measure: MeasureOnGrid::new(mu, grid), pool: FftPool::new() })
    }

    pub fn measure_on_grid(&self) -> &MeasureOnGrid<T> {
        &self.measure
    }

    pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        rng
    }

    /// One increment field on the grid nodes (length `n_points`).
    pub fn sample(&self, seed: u64, stream: u64) -> Vec<T> {
        let mut rng = Self::rng_for(seed, stream);
        self.sample_with(&mut rng)
    }

    /// Draw using an already-positioned RNG (sequential rows of a path).
    pub fn sample_with<R: Rng>(&self, rng: &mut R) -> Vec<T> {
        let grid = &self.grid;
        let m = grid.torus_len();
        let n = grid.n_points();
        let mut spectrum = vec![Complex { re: T::zero(), im: T::zero() }; m];
        let mut tones: Vec<(T, T, T)> = Vec::new(); // (freq, cos amp, sin amp)

        // Fixed draw order: support points in measure order; one draw for
        // the zero point, two per pair.
        for p in self.measure.points() {
            if !p.paired {
                let g: T = StandardNormal.sample(rng);
                spectrum[0].re += (self.dt * p.weight).sqrt() * g;
                continue;
            }
            let g1: T = StandardNormal.sample(rng);
            let g2: T = StandardNormal.sample(rng);
            let k = tof64(p.freq / self.measure.delta_xi).round() as usize;
            let on_bin =
                k >= 1 && k <= (m - 1) / 2 && fromf::<T>(k as f64) * self.measure.delta_xi == p.freq;
            if on_bin {
                // Pair contribution 2 Re(S_k e^{i xi_k x}): S_k = amp (g1 - i g2)
                // gives sqrt(2 dt w) (g1 cos + g2 sin). The node origin at -L
                // adds e^{-i pi k} = (-1)^k, folded into the spectrum.
                let amp = (self.dt * p.weight / fromf(2.0)).sqrt();
                let sign = if k % 2 == 0 { T::one() } else { -T::one() };
                let re = amp * g1 * sign;
                let im = -amp * g2 * sign;
                spectrum[k].re += re;
                spectrum[k].im += im;
                spectrum[m - k].re += re;
                spectrum[m - k].im -= im;
            } else {
                let amp = (fromf::<T>(2.0) * self.dt * p.weight).sqrt();
                tones.push((p.freq, amp * g1, amp * g2));
            }
        }

        self.pool.plan(m, true).process(&mut spectrum);

        let mut field: Vec<T> = Vec::with_capacity(n);
        for c in spectrum.iter().take(m) {
            field.push(c.re);
        }
        field.push(spectrum[0].re); // node +L duplicates -L for the periodic part

        if !tones.is_empty() {
            for (j, x) in grid.nodes().iter().enumerate() {
                let mut v = T::zero();
                for &(freq, ac, asn) in &tones {
                    let phase = freq * *x;
                    v += ac * phase.cos() + asn * phase.sin();
                }
                field[j] += v;
            }
        }
        field
    }
}

/// A block of increment rows (time steps x nodes).
#[derive(Debug, Clone)]
pub struct FieldSample<T> {
    pub increments: Vec<Vec<T>>,
    pub dt: T,
    pub seed: u64,
}

/// Draw `n_steps` independent increment rows for one stream.
pub fn sample_field<T: Scalar>(
    sampler: &WienerSampler<T>,
    n_steps: usize,
    seed: u64,
    stream: u64,
) -> FieldSample<T>
where
    StandardNormal: Distribution<T>,
{
    let mut rng = WienerSampler::<T>::rng_for(seed, stream);
    let increments = (0..n_steps).map(|_| sampler.sample_with(&mut rng)).collect();
    FieldSample { increments, dt: sampler.dt, seed }
}

/// Lag-covariance estimate with per-lag standard errors.
#[derive(Debug, Clone)]
pub struct CovarianceEstimate<T> {
    pub lags: Vec<usize>,
    pub lag_x: Vec<T>,
    pub gamma_hat: Vec<T>,
    pub stderr: Vec<T>,
}

/// Unbiased covariance as a function of lag, averaging over unwrapped node
/// pairs (homogeneity) and then over samples. At least 2 rows required;
/// lags are restricted to `lag <= L/2` where wrap effects cannot enter.
pub fn estimate_covariance<T: Scalar>(
    rows: &[Vec<T>],
    grid: &KernelGrid<T>,
    lags: &[usize],
) -> FracResult<CovarianceEstimate<T>> {
    if rows.len() < 2 {
        return Err(FracError::Statistics(format!(
            "covariance estimation needs at least 2 samples, got {}",
            rows.len()
        )));
    }
    let n = grid.n_points();
    let max_lag = (n - 1) / 4; // lag index for x-separation L/2
    for &l in lags {
        if l > max_lag {
            return Err(FracError::Domain(format!(
                "lag {l} exceeds the homogeneity window (max {max_lag})"
            )));
        }
    }
    let s = rows.len();
    let mut gamma_hat = Vec::with_capacity(lags.len());
    let mut stderr = Vec::with_capacity(lags.len());
    for &l in lags {
        let per_sample: Vec<T> = rows
            .iter()
            .map(|row| {
                let mut acc = T::zero();
                for j in 0..n - l {
                    acc += row[j] * row[j + l];
                }
                acc / fromf((n - l) as f64)
            })
            .collect();
        let mean = pairwise_sum(&per_sample) / fromf(s as f64);
        let var =
            per_sample.iter().map(|&c| (c - mean) * (c - mean)).sum::<T>() / fromf((s - 1) as f64);
        gamma_hat.push(mean);
        stderr.push((var / fromf(s as f64)).sqrt());
    }
    Ok(CovarianceEstimate {
        lags: lags.to_vec(),
        lag_x: lags.iter().map(|&l| grid.spacing() * fromf(l as f64)).collect(),
        gamma_hat,
        stderr,
    })
}
