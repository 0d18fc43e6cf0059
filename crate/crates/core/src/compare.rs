//! Distances between quantum and classical phase-space densities, and the
//! roughness of measured trajectories relative to their own deterministic drift.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qdyn::TrajectoryRecord;
use crate::qstate::WignerGrid;

/// Fewest record intervals accepted in one noise-metric window.
pub const MIN_WINDOW_POINTS: usize = 10;

/// Half-L1 distance `½∫|W − P| dx dp` after averaging both densities onto
/// `coarse_cells × coarse_cells` boxes.
///
/// Boxes are formed by grouping consecutive grid nodes, so when `coarse_cells`
/// does not divide the axis length the boxes differ in size by one node.
pub fn density_distance(w: &WignerGrid, p: &WignerGrid, coarse_cells: usize) -> Result<f64> {
    w.check_axes(p)?;
    if coarse_cells == 0 {
        return Err(Error::InvalidParameter("coarse_cells must be >= 1".into()));
    }
    let cx = coarse_cells.min(w.n_x);
    let cp = coarse_cells.min(w.n_p);
    let mut boxes = vec![0.0; cx * cp];
    for i in 0..w.n_x {
        let bi = i * cx / w.n_x;
        for j in 0..w.n_p {
            let bj = j * cp / w.n_p;
            boxes[bi * cp + bj] += w.at(i, j) - p.at(i, j);
        }
    }
    Ok(0.5 * boxes.iter().map(|d| d.abs()).sum::<f64>() * w.cell_area())
}

/// Number of boxes per axis whose area is closest to `area` on the axes of `grid`.
pub fn coarse_cells_for_area(grid: &WignerGrid, area: f64) -> usize {
    let span = (grid.n_x as f64 * grid.dx * grid.n_p as f64 * grid.dp).sqrt();
    let cells = (span / area.sqrt()).round() as usize;
    cells.clamp(1, grid.n_x.min(grid.n_p))
}

/// Mass of the negative part, `∫(|W| − W)/2 dx dp`.
pub fn negativity(w: &WignerGrid) -> f64 {
    w.values.iter().filter(|v| **v < 0.0).map(|v| -v).sum::<f64>() * w.cell_area()
}

/// One window of [`trajectory_noise_metric`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseWindow {
    pub t_start: f64,
    pub t_end: f64,
    pub metric: f64,
}

/// Roughness of a measured trajectory.
///
/// Over each window of `window` record intervals, the residuals between the
/// observed increments of `⟨x⟩` and the deterministic drift `⟨p⟩Δt/m`
/// (trapezoid over the interval) are compared with the drift itself:
/// `rms(residual)/rms(drift)`. Rows must be uniformly spaced.
pub fn trajectory_noise_metric(record: &TrajectoryRecord, mass: f64, window: usize) -> Result<Vec<NoiseWindow>> {
    if window < MIN_WINDOW_POINTS {
        return Err(Error::InsufficientSamples(format!(
            "windows need at least {MIN_WINDOW_POINTS} intervals, got {window}"
        )));
    }
    let rows = &record.rows;
    if rows.len() < window + 1 {
        return Err(Error::InsufficientSamples(format!(
            "{} rows cannot fill one window of {window} intervals",
            rows.len()
        )));
    }
    let cadence = rows[1].t - rows[0].t;
    let uniform = rows
        .windows(2)
        .all(|w| ((w[1].t - w[0].t) - cadence).abs() <= 1e-9 * cadence.abs().max(1.0));
    if !uniform || cadence <= 0.0 {
        return Err(Error::InvalidParameter("trajectory rows are not uniformly spaced".into()));
    }
    let (drift, residual): (Vec<f64>, Vec<f64>) = rows
        .windows(2)
        .map(|w| {
            let (a, b) = (&w[0].moments, &w[1].moments);
            let predicted = 0.5 * (a.mean_p + b.mean_p) / mass * cadence;
            (predicted, (b.mean_x - a.mean_x) - predicted)
        })
        .unzip();
    let rms = |v: &[f64]| (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt();
    Ok(drift
        .chunks_exact(window)
        .zip(residual.chunks_exact(window))
        .enumerate()
        .map(|(w, (d, r))| NoiseWindow {
            t_start: rows[w * window].t,
            t_end: rows[(w + 1) * window].t,
            metric: rms(r) / rms(d),
        })
        .collect())
}

/// Mean of the window metrics.
pub fn noise_metric_summary(windows: &[NoiseWindow]) -> f64 {
    windows.iter().map(|w| w.metric).sum::<f64>() / windows.len() as f64
}

/// Time series written by the density comparison experiment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSeries {
    pub times: Vec<f64>,
    pub l1_distance: Vec<f64>,
    pub negativity: Vec<f64>,
    /// Empty cells are written when no trajectory metric applies.
    pub noise_metric: Vec<Option<f64>>,
}

impl ComparisonSeries {
    pub const CSV_HEADER: &'static str = "t,l1_distance,negativity,noise_metric";

    pub fn push(&mut self, t: f64, l1: f64, neg: f64, noise: Option<f64>) {
        self.times.push(t);
        self.l1_distance.push(l1);
        self.negativity.push(neg);
        self.noise_metric.push(noise);
    }

    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut out = std::io::BufWriter::new(out);
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for i in 0..self.times.len() {
            let noise = self.noise_metric[i].map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{}",
                self.times[i], self.l1_distance[i], self.negativity[i], noise
            )?;
        }
        out.flush()
    }
}
