use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{upsample2, Moments, SpectralPlan, WaveFunction};
use crate::error::{Error, Result};

/// Real function sampled on a phase-space grid, row-major in x:
/// `values[i·n_p + j] = W(x_min + i·dx, p_min + j·dp)`.
///
/// Holds Wigner functions as well as classical densities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub n_x: usize,
    pub n_p: usize,
    pub x_min: f64,
    pub dx: f64,
    pub p_min: f64,
    pub dp: f64,
    pub values: Vec<f64>,
}

impl WignerGrid {
    pub fn zeros(n_x: usize, n_p: usize, x_min: f64, dx: f64, p_min: f64, dp: f64) -> Self {
        Self {
            n_x,
            n_p,
            x_min,
            dx,
            p_min,
            dp,
            values: vec![0.0; n_x * n_p],
        }
    }

    /// Same axes, zero values.
    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.n_x, self.n_p, self.x_min, self.dx, self.p_min, self.dp)
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    #[inline]
    pub fn p(&self, j: usize) -> f64 {
        self.p_min + j as f64 * self.dp
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_p + j]
    }

    pub fn cell_area(&self) -> f64 {
        self.dx * self.dp
    }

    pub fn same_axes(&self, other: &Self) -> bool {
        self.n_x == other.n_x
            && self.n_p == other.n_p
            && self.x_min == other.x_min
            && self.dx == other.dx
            && self.p_min == other.p_min
            && self.dp == other.dp
    }

    pub fn check_axes(&self, other: &Self) -> Result<()> {
        if self.same_axes(other) {
            Ok(())
        } else {
            Err(Error::AxisMismatch(format!(
                "{}x{} grid at ({}, {}) step ({}, {}) vs {}x{} grid at ({}, {}) step ({}, {})",
                self.n_x,
                self.n_p,
                self.x_min,
                self.p_min,
                self.dx,
                self.dp,
                other.n_x,
                other.n_p,
                other.x_min,
                other.p_min,
                other.dx,
                other.dp
            )))
        }
    }

    /// `Σ W dx dp`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_area()
    }

    /// Position marginal `∫W dp` at each x node.
    pub fn marginal_x(&self) -> Vec<f64> {
        self.values
            .chunks(self.n_p)
            .map(|row| row.iter().sum::<f64>() * self.dp)
            .collect()
    }

    /// `2πħ Σ W² dx dp`, equal to Tr ρ² for a Wigner function.
    pub fn purity(&self, hbar: f64) -> f64 {
        2.0 * PI * hbar * self.values.iter().map(|w| w * w).sum::<f64>() * self.cell_area()
    }

    pub fn moments(&self) -> Moments {
        let mut s = [0.0f64; 6];
        for i in 0..self.n_x {
            let x = self.x(i);
            for j in 0..self.n_p {
                let w = self.at(i, j);
                let p = self.p(j);
                s[0] += w;
                s[1] += x * w;
                s[2] += p * w;
                s[3] += x * x * w;
                s[4] += p * p * w;
                s[5] += x * p * w;
            }
        }
        let mean_x = s[1] / s[0];
        let mean_p = s[2] / s[0];
        Moments {
            mean_x,
            mean_p,
            var_x: s[3] / s[0] - mean_x * mean_x,
            var_p: s[4] / s[0] - mean_p * mean_p,
            cov_xp: s[5] / s[0] - mean_x * mean_p,
        }
    }

    /// `self += other` on identical axes.
    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_axes(other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.values {
            *v *= factor;
        }
    }
}

/// Wigner transform `W(x,p) = (1/πħ)∫ψ*(x+y)ψ(x−y)e^{2ipy/ħ}dy` of a pure state.
///
/// The momentum axis spans `[−πħ/dx, πħ/dx)` in `n_p` steps. Half-integer
/// offsets `y = j·dx/2` are reached through band-limited interpolation, so every
/// pair of grid points contributes and the x-marginal is exact.
pub fn wigner(psi: &WaveFunction, n_p: usize) -> Result<WignerGrid> {
    let fine = upsample2(&psi.amplitudes);
    let norm = psi.norm();
    wigner_from_kernel(
        psi.grid.n_points,
        psi.grid.x_min,
        psi.grid.dx,
        psi.hbar,
        n_p,
        |a, b| fine[a].conj() * fine[b] / norm,
    )
}

/// Shared row transform. `kernel(a, b)` must return `ρ(x_b, x_a)` on the
/// half-spaced grid (`x_a = x_min + a·dx/2`, `a < 2n`), i.e. `ψ*(x_a)ψ(x_b)` for a pure state.
pub(crate) fn wigner_from_kernel<K>(
    n: usize,
    x_min: f64,
    dx: f64,
    hbar: f64,
    n_p: usize,
    kernel: K,
) -> Result<WignerGrid>
where
    K: Fn(usize, usize) -> Complex64 + Sync,
{
    if n_p < 2 || !n_p.is_power_of_two() {
        return Err(Error::InvalidParameter(format!(
            "momentum resolution must be a power of two >= 2, got {n_p}"
        )));
    }
    let p_max = PI * hbar / dx;
    let dp = 2.0 * p_max / n_p as f64;
    let mut out = WignerGrid::zeros(n, n_p, x_min, dx, -p_max, dp);
    let plan = SpectralPlan::new(n_p);
    let fine_len = 2 * n;
    let prefactor = 0.5 * dx / (PI * hbar);

    out.values
        .par_chunks_mut(n_p)
        .enumerate()
        .for_each_init(
            || (vec![Complex64::new(0.0, 0.0); n_p], plan.scratch()),
            |(buf, scratch), (i, row)| {
                buf.iter_mut().for_each(|b| *b = Complex64::new(0.0, 0.0));
                let c = 2 * i;
                let reach = c.min(fine_len - 1 - c);
                for j in 0..=reach {
                    let f_plus = kernel(c + j, c - j);
                    buf[j % n_p] += f_plus;
                    if j > 0 {
                        let f_minus = kernel(c - j, c + j);
                        buf[(n_p - j % n_p) % n_p] += f_minus;
                    }
                }
                plan.inverse(buf, scratch);
                // column q holds p = −p_max + q·dp, i.e. bin q − n_p/2
                let half = n_p / 2;
                for (q, w) in row.iter_mut().enumerate() {
                    let k = (q + half) % n_p;
                    *w = prefactor * buf[k].re;
                }
            },
        );
    Ok(out)
}
