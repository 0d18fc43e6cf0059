//! Direct integration of the unconditioned master equation
//! `dρ = −(i/ħ)[H,ρ]dt − k[x,[x,ρ]]dt` on a small grid.
//!
//! The same Strang splitting as the trajectory propagator is used: kinetic
//! conjugation in the momentum representation, and in the position
//! representation the exact sub-flow
//! `ρ(x,x') ← ρ(x,x')·exp(−i(V(x)−V(x'))dt/ħ − k(x−x')²dt)`.
//! Both factors are completely positive, so positivity is only lost to rounding.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::MeasurementSpec;
use crate::error::{Error, Result};
use crate::model::{DriveCoupling, HamiltonianSpec};
use crate::qstate::{upsample2, wigner_from_kernel, Moments, PositionGrid, SpectralPlan, WaveFunction, WignerGrid};

/// Largest grid accepted by the density-matrix integrator.
pub const LINDBLAD_MAX_POINTS: usize = 256;
/// Most negative eigenvalue tolerated before reporting a positivity loss.
pub const POSITIVITY_TOLERANCE: f64 = 1e-6;

/// Density matrix on a position grid, `data[i·n + j] = ρ(x_i, x_j)`, normalized so `Σᵢ ρᵢᵢ = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    pub grid: PositionGrid,
    pub hbar: f64,
    pub data: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn from_pure(psi: &WaveFunction) -> Self {
        let n = psi.grid.n_points;
        let scale = psi.grid.dx / psi.norm();
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = psi.amplitudes[i] * psi.amplitudes[j].conj() * scale;
            }
        }
        Self {
            grid: psi.grid,
            hbar: psi.hbar,
            data,
        }
    }

    pub fn n(&self) -> usize {
        self.grid.n_points
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n() + j]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.n()).map(|i| self.at(i, i)).sum()
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.data.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn hermiticity_error(&self) -> f64 {
        let n = self.n();
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.at(i, j) - self.at(j, i).conj()).norm());
            }
        }
        worst
    }

    fn hermitize(&mut self) {
        let n = self.n();
        for i in 0..n {
            self.data[i * n + i].im = 0.0;
            for j in i + 1..n {
                let avg = 0.5 * (self.data[i * n + j] + self.data[j * n + i].conj());
                self.data[i * n + j] = avg;
                self.data[j * n + i] = avg.conj();
            }
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let n = self.n();
        let m = DMatrix::from_fn(n, n, |i, j| self.at(i, j));
        m.symmetric_eigenvalues()
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    }

    pub fn position_density(&self) -> Vec<f64> {
        (0..self.n()).map(|i| self.at(i, i).re / self.grid.dx).collect()
    }

    pub fn moments(&self) -> Moments {
        let n = self.n();
        let grid = &self.grid;
        let trace = self.trace().re;
        let mut mean_x = 0.0;
        let mut second_x = 0.0;
        for i in 0..n {
            let w = self.at(i, i).re;
            let x = grid.x(i);
            mean_x += x * w;
            second_x += x * x * w;
        }
        mean_x /= trace;
        let var_x = second_x / trace - mean_x * mean_x;

        let p = grid.momenta(self.hbar);
        let plan = SpectralPlan::new(n);
        let mut scratch = plan.scratch();
        let mut t = self.data.clone();
        to_momentum(&mut t, n, &plan, &mut scratch);
        let diag: Vec<f64> = (0..n).map(|k| t[k * n + k].re).collect();
        let total: f64 = diag.iter().sum();
        let mean_p = diag.iter().zip(&p).map(|(w, pk)| w * pk).sum::<f64>() / total;
        let var_p = diag
            .iter()
            .zip(&p)
            .map(|(w, pk)| w * (pk - mean_p).powi(2))
            .sum::<f64>()
            / total;

        // Re Tr(x p̂ ρ) from the diagonal of p̂ρ, one column at a time
        let mut sym = 0.0;
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            for (i, c) in col.iter_mut().enumerate() {
                *c = self.at(i, j);
            }
            plan.forward(&mut col, &mut scratch);
            for (c, pk) in col.iter_mut().zip(&p) {
                *c *= pk / n as f64;
            }
            plan.inverse(&mut col, &mut scratch);
            sym += grid.x(j) * col[j].re;
        }
        let cov_xp = sym / trace - mean_x * mean_p;
        Moments {
            mean_x,
            mean_p,
            var_x,
            var_p,
            cov_xp,
        }
    }

    /// Wigner function of the mixed state, with the same axes as [`crate::qstate::wigner`].
    pub fn wigner(&self, n_p: usize) -> Result<WignerGrid> {
        let n = self.n();
        let rows: Vec<Vec<Complex64>> = (0..n)
            .map(|i| upsample2(&self.data[i * n..(i + 1) * n]))
            .collect();
        let mut fine = vec![Complex64::new(0.0, 0.0); 4 * n * n];
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for b in 0..2 * n {
            for (i, c) in col.iter_mut().enumerate() {
                *c = rows[i][b];
            }
            for (a, v) in upsample2(&col).into_iter().enumerate() {
                fine[a * 2 * n + b] = v;
            }
        }
        let scale = 1.0 / (self.grid.dx * self.trace().re);
        let stride = 2 * n;
        wigner_from_kernel(n, self.grid.x_min, self.grid.dx, self.hbar, n_p, |a, b| {
            fine[b * stride + a] * scale
        })
    }
}

fn transpose(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        for j in i + 1..n {
            data.swap(i * n + j, j * n + i);
        }
    }
}

/// Position → momentum representation, leaving the result transposed:
/// `data[b·n + a] = ρ̃(p_a, p_b)`, unnormalized.
fn to_momentum(data: &mut [Complex64], n: usize, plan: &SpectralPlan, scratch: &mut [Complex64]) {
    for row in data.chunks_mut(n) {
        plan.inverse(row, scratch);
    }
    transpose(data, n);
    for row in data.chunks_mut(n) {
        plan.forward(row, scratch);
    }
}

/// Inverse of [`to_momentum`] up to a factor `n²`.
fn to_position(data: &mut [Complex64], n: usize, plan: &SpectralPlan, scratch: &mut [Complex64]) {
    for row in data.chunks_mut(n) {
        plan.inverse(row, scratch);
    }
    transpose(data, n);
    for row in data.chunks_mut(n) {
        plan.forward(row, scratch);
    }
}

struct LindbladStepper {
    n: usize,
    dt: f64,
    hbar: f64,
    spec: HamiltonianSpec,
    positions: Vec<f64>,
    plan: SpectralPlan,
    scratch: Vec<Complex64>,
    kinetic_half: Vec<Complex64>,
    kinetic_full: Vec<Complex64>,
    /// Static potential phase times the decoherence factor.
    local: Vec<Complex64>,
}

impl LindbladStepper {
    fn new(grid: &PositionGrid, spec: &HamiltonianSpec, meas: &MeasurementSpec, dt: f64) -> Self {
        let n = grid.n_points;
        let hbar = meas.hbar;
        let p = grid.momenta(hbar);
        let norm = 1.0 / (n * n) as f64;
        let kin = |tau: f64| {
            let mut f = vec![Complex64::new(0.0, 0.0); n * n];
            for b in 0..n {
                for a in 0..n {
                    let phase = -(p[a] * p[a] - p[b] * p[b]) * tau / (2.0 * spec.m * hbar);
                    f[b * n + a] = Complex64::from_polar(norm, phase);
                }
            }
            f
        };
        let positions = grid.positions();
        let mut local = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                let (xi, xj) = (positions[i], positions[j]);
                let dv = spec.static_potential(xi) - spec.static_potential(xj);
                let decay = (-meas.k * (xi - xj).powi(2) * dt).exp();
                local[i * n + j] = Complex64::from_polar(decay, -dv * dt / hbar);
            }
        }
        let plan = SpectralPlan::new(n);
        Self {
            n,
            dt,
            hbar,
            spec: *spec,
            scratch: plan.scratch(),
            plan,
            kinetic_half: kin(0.5 * dt),
            kinetic_full: kin(dt),
            local,
            positions,
        }
    }

    fn kinetic(&mut self, data: &mut [Complex64], full: bool) {
        to_momentum(data, self.n, &self.plan, &mut self.scratch);
        let f = if full { &self.kinetic_full } else { &self.kinetic_half };
        for (a, b) in data.iter_mut().zip(f) {
            *a *= b;
        }
        to_position(data, self.n, &self.plan, &mut self.scratch);
    }

    fn local_step(&self, data: &mut [Complex64], t_mid: f64) {
        let n = self.n;
        let theta = match self.spec.drive_coupling {
            DriveCoupling::LinearInX => self.spec.drive_strength(t_mid) * self.dt / self.hbar,
            DriveCoupling::Additive => 0.0,
        };
        let u: Vec<Complex64> = self
            .positions
            .iter()
            .map(|x| Complex64::from_polar(1.0, -theta * x))
            .collect();
        for i in 0..n {
            let row = &mut data[i * n..(i + 1) * n];
            let lrow = &self.local[i * n..(i + 1) * n];
            for j in 0..n {
                row[j] *= lrow[j] * u[i] * u[j].conj();
            }
        }
    }
}

/// Integrates the unconditioned master equation from `t = 0` and returns the
/// state at each of `record_times` (rounded to the nearest step).
pub fn lindblad_evolve(
    rho0: &DensityMatrix,
    spec: &HamiltonianSpec,
    meas: &MeasurementSpec,
    t_final: f64,
    dt: f64,
    record_times: &[f64],
) -> Result<Vec<(f64, DensityMatrix)>> {
    let n = rho0.n();
    if n > LINDBLAD_MAX_POINTS {
        return Err(Error::InvalidParameter(format!(
            "density-matrix integration needs n <= {LINDBLAD_MAX_POINTS}, got {n}"
        )));
    }
    if !(dt > 0.0) || !(t_final >= 0.0) {
        return Err(Error::InvalidParameter("dt must be > 0 and t_final >= 0".into()));
    }
    if (rho0.trace().re - 1.0).abs() > 1e-10 || rho0.hermiticity_error() > 1e-10 {
        return Err(Error::InvalidParameter(
            "initial density matrix must be Hermitian with unit trace".into(),
        ));
    }
    let min_eig = rho0.min_eigenvalue();
    if min_eig < -1e-10 {
        return Err(Error::PositivityLoss {
            min_eigenvalue: min_eig,
            t: 0.0,
        });
    }
    let n_steps = (t_final / dt).round() as u64;
    let wanted: Vec<u64> = record_times.iter().map(|t| (t / dt).round() as u64).collect();
    if wanted.iter().any(|&s| s > n_steps) {
        return Err(Error::InvalidParameter("record time beyond t_final".into()));
    }

    let mut stepper = LindbladStepper::new(&rho0.grid, spec, meas, dt);
    let mut rho = rho0.clone();
    let mut out: Vec<Option<DensityMatrix>> = vec![None; record_times.len()];
    let store = |rho: &DensityMatrix, step: u64, out: &mut Vec<Option<DensityMatrix>>| -> Result<()> {
        for (slot, &s) in out.iter_mut().zip(&wanted) {
            if s == step {
                let min_eigenvalue = rho.min_eigenvalue();
                if min_eigenvalue < -POSITIVITY_TOLERANCE {
                    return Err(Error::PositivityLoss {
                        min_eigenvalue,
                        t: step as f64 * dt,
                    });
                }
                *slot = Some(rho.clone());
            }
        }
        Ok(())
    };
    store(&rho, 0, &mut out)?;
    if n_steps > 0 {
        stepper.kinetic(&mut rho.data, false);
    }
    for step in 0..n_steps {
        stepper.local_step(&mut rho.data, (step as f64 + 0.5) * dt);
        rho.hermitize();
        let done = step + 1;
        if wanted.contains(&done) || done == n_steps {
            stepper.kinetic(&mut rho.data, false);
            store(&rho, done, &mut out)?;
            if done < n_steps {
                stepper.kinetic(&mut rho.data, false);
            }
        } else {
            stepper.kinetic(&mut rho.data, true);
        }
    }
    Ok(record_times
        .iter()
        .zip(out)
        .map(|(&t, r)| (t, r.expect("every record step is visited")))
        .collect())
}
