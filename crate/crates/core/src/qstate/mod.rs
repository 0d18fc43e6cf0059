//! Pure quantum states on a uniform position grid.

mod dump;
mod wigner;

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

pub use dump::{read_qctw, write_qctw, write_wigner_csv, QCTW_MAGIC, QCTW_VERSION};
pub(crate) use wigner::wigner_from_kernel;
pub use wigner::{wigner, WignerGrid};

/// Fraction of the grid, at each end, watched by the boundary-leak monitor.
pub const BOUNDARY_FRACTION: f64 = 1.0 / 32.0;
/// Boundary probability above which propagation aborts.
pub const BOUNDARY_LEAK_LIMIT: f64 = 1e-6;
/// Probability outside the grid tolerated when preparing a coherent state.
pub const TRUNCATION_LIMIT: f64 = 1e-10;

/// Uniform grid `x_i = x_min + i·dx`, `i < n_points`, with `dx = (x_max − x_min)/n_points`.
///
/// The grid is periodic for the spectral transforms; `x_max` itself is not a node.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PositionGrid {
    pub n_points: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
}

impl PositionGrid {
    pub fn new(n_points: usize, x_min: f64, x_max: f64) -> Result<Self> {
        if n_points < 2 || !n_points.is_power_of_two() {
            return Err(Error::InvalidParameter(format!(
                "grid size must be a power of two >= 2, got {n_points}"
            )));
        }
        if !(x_min.is_finite() && x_max.is_finite() && x_max > x_min) {
            return Err(Error::InvalidParameter(format!(
                "grid bounds must satisfy x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        Ok(Self {
            n_points,
            x_min,
            x_max,
            dx: (x_max - x_min) / n_points as f64,
        })
    }

    /// Builds the grid and checks that its momentum Nyquist bound exceeds `p_extent`.
    pub fn with_momentum_extent(
        n_points: usize,
        x_min: f64,
        x_max: f64,
        hbar: f64,
        p_extent: f64,
    ) -> Result<Self> {
        let grid = Self::new(n_points, x_min, x_max)?;
        grid.check_momentum_extent(hbar, p_extent)?;
        Ok(grid)
    }

    pub fn check_momentum_extent(&self, hbar: f64, p_extent: f64) -> Result<()> {
        let p_max = self.p_max(hbar);
        if p_max <= p_extent {
            return Err(Error::MomentumResolution {
                p_max,
                required: p_extent,
            });
        }
        Ok(())
    }

    pub fn length(&self) -> f64 {
        self.x_max - self.x_min
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.x(i)).collect()
    }

    /// Momentum Nyquist bound `πħ/dx`.
    pub fn p_max(&self, hbar: f64) -> f64 {
        PI * hbar / self.dx
    }

    /// Momentum of every FFT bin, in FFT order (0, +, …, −).
    pub fn momenta(&self, hbar: f64) -> Vec<f64> {
        let n = self.n_points;
        let dp = 2.0 * PI * hbar / (n as f64 * self.dx);
        (0..n)
            .map(|k| {
                let k = if k < n / 2 { k as isize } else { k as isize - n as isize };
                k as f64 * dp
            })
            .collect()
    }

    pub fn edge_points(&self) -> usize {
        ((self.n_points as f64 * BOUNDARY_FRACTION).ceil() as usize).max(1)
    }
}

/// Forward/inverse FFT pair of a fixed length. Both directions are unnormalized.
#[derive(Clone)]
pub struct SpectralPlan {
    pub n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    scratch_len: usize,
}

impl std::fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPlan").field("n", &self.n).finish()
    }
}

impl SpectralPlan {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        Self {
            n,
            forward,
            inverse,
            scratch_len,
        }
    }

    pub fn scratch(&self) -> Vec<Complex64> {
        vec![Complex64::new(0.0, 0.0); self.scratch_len]
    }

    /// `X_k = Σ_j x_j e^{−2πijk/n}`.
    pub fn forward(&self, data: &mut [Complex64], scratch: &mut [Complex64]) {
        self.forward.process_with_scratch(data, scratch);
    }

    /// `x_j = Σ_k X_k e^{+2πijk/n}` (no 1/n).
    pub fn inverse(&self, data: &mut [Complex64], scratch: &mut [Complex64]) {
        self.inverse.process_with_scratch(data, scratch);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    pub grid: PositionGrid,
    pub amplitudes: Vec<Complex64>,
    pub hbar: f64,
}

impl WaveFunction {
    pub fn new(grid: PositionGrid, amplitudes: Vec<Complex64>, hbar: f64) -> Result<Self> {
        if amplitudes.len() != grid.n_points {
            return Err(Error::InvalidParameter(format!(
                "{} amplitudes for a {}-point grid",
                amplitudes.len(),
                grid.n_points
            )));
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidParameter(format!("hbar must be > 0, got {hbar}")));
        }
        Ok(Self {
            grid,
            amplitudes,
            hbar,
        })
    }

    /// Samples `f` on the grid and normalizes.
    pub fn from_fn(grid: PositionGrid, hbar: f64, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        let amplitudes = (0..grid.n_points).map(|i| f(grid.x(i))).collect();
        let mut psi = Self::new(grid, amplitudes, hbar)?;
        if psi.norm() == 0.0 {
            return Err(Error::InvalidParameter("wave function vanishes on the grid".into()));
        }
        psi.normalize();
        Ok(psi)
    }

    /// `dx·Σ|ψᵢ|²`.
    pub fn norm(&self) -> f64 {
        self.grid.dx * self.amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>()
    }

    pub fn normalize(&mut self) {
        let scale = 1.0 / self.norm().sqrt();
        for a in &mut self.amplitudes {
            *a *= scale;
        }
    }

    /// `|ψ(xᵢ)|²`.
    pub fn density(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Probability within the monitored edge strips at both ends of the grid.
    pub fn boundary_mass(&self) -> f64 {
        let e = self.grid.edge_points();
        let n = self.grid.n_points;
        let sum: f64 = self.amplitudes[..e]
            .iter()
            .chain(&self.amplitudes[n - e..])
            .map(|a| a.norm_sqr())
            .sum();
        sum * self.grid.dx / self.norm()
    }

    /// Mirror image `ψ(−x)`, for grids symmetric about the origin.
    /// The node at `x_min` has no partner and is set to zero.
    pub fn reflected(&self) -> Self {
        let n = self.grid.n_points;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); n];
        for (i, a) in amplitudes.iter_mut().enumerate().skip(1) {
            *a = self.amplitudes[n - i];
        }
        Self {
            grid: self.grid,
            amplitudes,
            hbar: self.hbar,
        }
    }

    /// Momentum-space amplitudes in FFT order.
    pub fn momentum_amplitudes(&self, plan: &SpectralPlan) -> Vec<Complex64> {
        let mut phi = self.amplitudes.clone();
        let mut scratch = plan.scratch();
        plan.forward(&mut phi, &mut scratch);
        phi
    }

    /// `ψ(x)·exp(i p₁ x/ħ)`.
    pub fn boosted(&self, p1: f64) -> Self {
        let mut out = self.clone();
        for (i, a) in out.amplitudes.iter_mut().enumerate() {
            let phase = p1 * self.grid.x(i) / self.hbar;
            *a *= Complex64::from_polar(1.0, phase);
        }
        out
    }
}

/// First and second central moments of a phase-space state.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Moments {
    pub mean_x: f64,
    pub mean_p: f64,
    pub var_x: f64,
    pub var_p: f64,
    pub cov_xp: f64,
}

impl Moments {
    /// `V_x V_p − C²`.
    pub fn uncertainty_product(&self) -> f64 {
        self.var_x * self.var_p - self.cov_xp * self.cov_xp
    }
}

/// Minimum-uncertainty Gaussian with `V_x = V_p = ħ/2` centred on `(x0, p0)`.
pub fn coherent_state(grid: &PositionGrid, x0: f64, p0: f64, hbar: f64) -> Result<WaveFunction> {
    if !(hbar > 0.0) {
        return Err(Error::InvalidParameter(format!("hbar must be > 0, got {hbar}")));
    }
    let sigma = (hbar / 2.0).sqrt();
    let s2 = std::f64::consts::SQRT_2 * sigma;
    let outside_x = 0.5 * erfc((x0 - grid.x_min) / s2) + 0.5 * erfc((grid.x_max - x0) / s2);
    let p_max = grid.p_max(hbar);
    let outside_p = 0.5 * erfc((p0 + p_max) / s2) + 0.5 * erfc((p_max - p0) / s2);
    let mass = outside_x + outside_p;
    if mass > TRUNCATION_LIMIT {
        return Err(Error::Truncation { mass });
    }
    let width = 4.0 * sigma * sigma;
    WaveFunction::from_fn(*grid, hbar, |x| {
        let d = x - x0;
        Complex64::from_polar((-d * d / width).exp(), p0 * x / hbar)
    })
}

/// Moments of a normalized state: positions by quadrature, momenta spectrally.
pub fn moments(psi: &WaveFunction) -> Moments {
    let plan = SpectralPlan::new(psi.grid.n_points);
    moments_with(psi, &plan)
}

pub fn moments_with(psi: &WaveFunction, plan: &SpectralPlan) -> Moments {
    let grid = &psi.grid;
    let n = grid.n_points;
    let weights: Vec<f64> = psi.amplitudes.iter().map(|a| a.norm_sqr()).collect();
    let total: f64 = weights.iter().sum();

    let mut mean_x = 0.0;
    for (i, w) in weights.iter().enumerate() {
        mean_x += grid.x(i) * w;
    }
    mean_x /= total;
    let mut var_x = 0.0;
    for (i, w) in weights.iter().enumerate() {
        let d = grid.x(i) - mean_x;
        var_x += d * d * w;
    }
    var_x /= total;

    let p = grid.momenta(psi.hbar);
    let mut phi = psi.amplitudes.clone();
    let mut scratch = plan.scratch();
    plan.forward(&mut phi, &mut scratch);
    let p_total: f64 = phi.iter().map(|a| a.norm_sqr()).sum();
    let mean_p = phi
        .iter()
        .zip(&p)
        .map(|(a, pk)| pk * a.norm_sqr())
        .sum::<f64>()
        / p_total;
    let var_p = phi
        .iter()
        .zip(&p)
        .map(|(a, pk)| (pk - mean_p).powi(2) * a.norm_sqr())
        .sum::<f64>()
        / p_total;

    // Re⟨(x − ⟨x⟩) p̂⟩ with p̂ψ computed spectrally
    for (a, pk) in phi.iter_mut().zip(&p) {
        *a *= pk / n as f64;
    }
    plan.inverse(&mut phi, &mut scratch);
    let cov_xp = psi
        .amplitudes
        .iter()
        .zip(&phi)
        .enumerate()
        .map(|(i, (a, pa))| (grid.x(i) - mean_x) * (a.conj() * pa).re)
        .sum::<f64>()
        / total;

    Moments {
        mean_x,
        mean_p,
        var_x,
        var_p,
        cov_xp,
    }
}

/// `⟨p²/2m + V(x, t)⟩` of a normalized state.
pub fn energy(psi: &WaveFunction, spec: &crate::model::HamiltonianSpec, t: f64) -> f64 {
    let plan = SpectralPlan::new(psi.grid.n_points);
    let phi = psi.momentum_amplitudes(&plan);
    let p = psi.grid.momenta(psi.hbar);
    let p_total: f64 = phi.iter().map(|a| a.norm_sqr()).sum();
    let kinetic = phi
        .iter()
        .zip(&p)
        .map(|(a, pk)| pk * pk * a.norm_sqr())
        .sum::<f64>()
        / (2.0 * spec.m * p_total);
    let x_total: f64 = psi.amplitudes.iter().map(|a| a.norm_sqr()).sum();
    let potential = psi
        .amplitudes
        .iter()
        .enumerate()
        .map(|(i, a)| spec.potential(psi.grid.x(i), t) * a.norm_sqr())
        .sum::<f64>()
        / x_total;
    kinetic + potential
}

/// Band-limited interpolation of a periodic sequence onto a grid twice as fine.
/// Even output samples reproduce the input.
pub(crate) fn upsample2(data: &[Complex64]) -> Vec<Complex64> {
    let n = data.len();
    let coarse = SpectralPlan::new(n);
    let fine = SpectralPlan::new(2 * n);
    let mut spec = data.to_vec();
    let mut scratch = coarse.scratch();
    coarse.forward(&mut spec, &mut scratch);
    let mut padded = vec![Complex64::new(0.0, 0.0); 2 * n];
    let half = n / 2;
    padded[..half].copy_from_slice(&spec[..half]);
    for k in half + 1..n {
        padded[n + k] = spec[k];
    }
    // split the Nyquist bin symmetrically
    padded[half] = spec[half] * 0.5;
    padded[2 * n - half] = spec[half] * 0.5;
    let mut scratch = fine.scratch();
    fine.inverse(&mut padded, &mut scratch);
    let scale = 1.0 / n as f64;
    for a in &mut padded {
        *a *= scale;
    }
    padded
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn wide_grid() -> PositionGrid {
        PositionGrid::with_momentum_extent(1024, -8.0, 8.0, 0.1, 20.0).unwrap()
    }

    #[test]
    fn grid_validation() {
        assert!(PositionGrid::new(1000, -1.0, 1.0).is_err());
        assert!(PositionGrid::new(1, -1.0, 1.0).is_err());
        assert!(PositionGrid::new(64, 1.0, -1.0).is_err());
        let g = wide_grid();
        assert_abs_diff_eq!(g.dx, 0.015625, epsilon = 1e-15);
        assert!(g.p_max(0.1) > 20.0);
        assert!(matches!(
            PositionGrid::with_momentum_extent(512, -8.0, 8.0, 0.1, 20.0),
            Err(Error::MomentumResolution { .. })
        ));
    }

    #[test]
    fn coherent_state_matches_prescribed_moments() {
        let psi = coherent_state(&wide_grid(), -3.0, 8.0, 0.1).unwrap();
        assert_abs_diff_eq!(psi.norm(), 1.0, epsilon = 1e-12);
        let m = moments(&psi);
        assert_abs_diff_eq!(m.mean_x, -3.0, epsilon = 1e-8);
        assert_abs_diff_eq!(m.mean_p, 8.0, epsilon = 1e-8);
        assert_abs_diff_eq!(m.var_x, 0.05, epsilon = 1e-8);
        assert_abs_diff_eq!(m.var_p, 0.05, epsilon = 1e-8);
        assert_abs_diff_eq!(m.cov_xp, 0.0, epsilon = 1e-8);
        assert!(m.uncertainty_product() >= 0.1 * 0.1 / 4.0 - 1e-9);
    }

    #[test]
    fn coherent_state_too_close_to_the_edge() {
        let g = wide_grid();
        assert!(matches!(
            coherent_state(&g, -7.5, 0.0, 0.1),
            Err(Error::Truncation { .. })
        ));
        assert!(matches!(
            coherent_state(&g, 0.0, 19.5, 0.1),
            Err(Error::Truncation { .. })
        ));
    }

    #[test]
    fn even_state_has_zero_mean_momentum() {
        let g = wide_grid();
        let psi =
            WaveFunction::from_fn(g, 0.1, |x| Complex64::new((-x * x).exp() * (1.0 + x * x), 0.0))
                .unwrap();
        assert_abs_diff_eq!(moments(&psi).mean_p, 0.0, epsilon = 1e-10);
    }

    #[test]
    fn boost_shifts_mean_momentum_only() {
        let g = wide_grid();
        let psi = WaveFunction::from_fn(g, 0.1, |x| {
            Complex64::new((-(x - 0.5) * (x - 0.5) / 0.3).exp(), 0.0) * Complex64::from_polar(1.0, 0.3 * x * x)
        })
        .unwrap();
        let before = moments(&psi);
        let after = moments(&psi.boosted(3.0));
        assert_abs_diff_eq!(after.mean_p - before.mean_p, 3.0, epsilon = 1e-8);
        assert_abs_diff_eq!(after.var_p, before.var_p, epsilon = 1e-8);
        assert_abs_diff_eq!(after.var_x, before.var_x, epsilon = 1e-12);
    }

    #[test]
    fn upsampling_interpolates_band_limited_data() {
        let g = PositionGrid::new(128, -8.0, 8.0).unwrap();
        let f = |x: f64| Complex64::new((-x * x).exp(), 0.3 * (-(x - 1.0).powi(2)).exp());
        let data: Vec<_> = (0..g.n_points).map(|i| f(g.x(i))).collect();
        let fine = upsample2(&data);
        for (j, v) in fine.iter().enumerate() {
            let x = g.x_min + j as f64 * g.dx / 2.0;
            assert!((v - f(x)).norm() < 1e-10, "j={j}");
        }
    }

    #[test]
    fn boundary_monitor() {
        let g = wide_grid();
        let psi = coherent_state(&g, 0.0, 0.0, 0.1).unwrap();
        assert!(psi.boundary_mass() < 1e-30);
        let edge = WaveFunction::from_fn(g, 0.1, |x| Complex64::new((-(x + 7.9).powi(2)).exp(), 0.0))
            .unwrap();
        assert!(edge.boundary_mass() > BOUNDARY_LEAK_LIMIT);
    }
}
