//! The weight `v` of the weighted space `L^2_v` and its shift constant.
//!
//! Default kind: strictly positive, even, `v(x) = e^{-|x|}` for `|x| >= 1`,
//! completed on `|x| < 1` by the C^1 even bridge `(3 - x^2) e^{-1} / 2`
//! (value and slope match at `|x| = 1`, minimum `e^{-1}` on the cap).
//! Polynomial kind: `v(x) = (1 + x^2)^{-rho}` with `rho > 1/2`.

use crate::error::{FracError, FracResult};
use crate::grid::KernelGrid;
use crate::num::{fromf, Scalar};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WeightKind<T> {
    Exponential,
    Polynomial { rho: T },
}

#[derive(Debug, Clone)]
pub struct WeightFunction<T> {
    pub kind: WeightKind<T>,
    pub grid: KernelGrid<T>,
    /// Samples of `v` at the grid nodes.
    pub values: Vec<T>,
}

impl<T: Scalar> WeightFunction<T> {
    pub fn new(kind: WeightKind<T>, grid: KernelGrid<T>) -> FracResult<Self> {
        if let WeightKind::Polynomial { rho } = kind {
            if !(rho > fromf(0.5)) {
                return Err(FracError::Domain(format!(
                    "polynomial weight needs rho > 1/2, got {:?}",
                    rho.to_f64()
                )));
            }
        }
        let values = grid.nodes().iter().map(|&x| eval_kind(kind, x)).collect();
        Ok(Self { kind, grid, values })
    }

    pub fn exponential(grid: KernelGrid<T>) -> Self {
        Self::new(WeightKind::Exponential, grid).expect("exponential weight is always valid")
    }

    /// Pointwise value (closed form, valid off-grid too).
    pub fn eval(&self, x: T) -> T {
        eval_kind(self.kind, x)
    }

    /// Trapezoid integral of `v` over the grid.
    pub fn grid_integral(&self) -> T {
        self.grid.trapezoid(&self.values)
    }

    /// `int_R v dx`: closed form for the exponential kind, quadrature-grade
    /// trapezoid otherwise (the grid is assumed wide enough that the tail is
    /// negligible, which holds for every grid this crate builds).
    pub fn total_integral(&self) -> T {
        match self.kind {
            // 2 [ int_0^1 (3 - x^2)/(2e) + int_1^inf e^{-x} ] = 14 / (3 e)
            WeightKind::Exponential => fromf::<T>(14.0) / (fromf::<T>(3.0) * T::E()),
            WeightKind::Polynomial { .. } => self.grid_integral(),
        }
    }

    /// Weighted squared norm `h * sum w_i f_i^2 v_i` (trapezoid weights).
    pub fn l2v_norm_sq(&self, f: &[T]) -> T {
        assert_eq!(f.len(), self.values.len(), "field length must match grid");
        let n = f.len();
        let half = fromf::<T>(0.5);
        let mut s = (f[0] * f[0] * self.values[0] + f[n - 1] * f[n - 1] * self.values[n - 1]) * half;
        for i in 1..n - 1 {
            s += f[i] * f[i] * self.values[i];
        }
        s * self.grid.spacing()
    }

    /// Smallest grid-measured `C_v` with `v(x - z) <= C_v e^R v(x)` for all
    /// grid `x` and `z` scanned over the lattice intersected with `[-R, R]`.
    pub fn shift_constant(&self, r: T) -> FracResult<T> {
        if !(r > T::zero()) {
            return Err(FracError::Domain("shift constant needs R > 0".into()));
        }
        let h = self.grid.spacing();
        let n_z = (r / h).to_f64().unwrap_or(0.0).floor() as i64;
        let scale = r.exp();
        let mut sup = T::zero();
        for (i, &x) in self.grid.nodes().iter().enumerate() {
            let vx = self.values[i] * scale;
            for dz in -n_z..=n_z {
                let z = h * fromf(dz as f64);
                let ratio = self.eval(x - z) / vx;
                if ratio > sup {
                    sup = ratio;
                }
            }
        }
        Ok(sup)
    }
}

fn eval_kind<T: Scalar>(kind: WeightKind<T>, x: T) -> T {
    match kind {
        WeightKind::Exponential => {
            let ax = x.abs();
            if ax >= T::one() {
                (-ax).exp()
            } else {
                (fromf::<T>(3.0) - x * x) * fromf::<T>(0.5) / T::E()
            }
        }
        WeightKind::Polynomial { rho } => (T::one() + x * x).powf(-rho),
    }
}
