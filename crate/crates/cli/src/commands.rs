//! The named experiments. Each `run_*` function computes an outcome from a
//! configuration; the outcome's `write` method turns it into files.

use std::io::Write;
use std::path::PathBuf;

use serde::Serialize;
use serde_json::{json, Value};

use qct_core::cdyn::{
    density_histogram, lyapunov_ensemble, sample_coherent_matched, ClassicalEnsemble, LangevinRun, LyapunovEstimate,
};
use qct_core::compare::{
    coarse_cells_for_area, density_distance, negativity, noise_metric_summary, trajectory_noise_metric,
    ComparisonSeries, NoiseWindow,
};
use qct_core::criteria::{action_scales, classify, phase_space_averages, weak_times, RegimeReport, WeakScales};
use qct_core::qdyn::{average_ensemble, run_trajectory, NoisePath, TrajectoryRecord, CLIP_SIGMAS};
use qct_core::qstate::{coherent_state, write_qctw, write_wigner_csv, wigner, Moments, WaveFunction, WignerGrid};

use crate::config::{Format, RunConfig};
use crate::error::CliError;
use crate::output::OutputDir;

pub type CliResult<T> = Result<T, CliError>;

fn initial_state(cfg: &RunConfig) -> CliResult<WaveFunction> {
    let grid = cfg.grid()?;
    Ok(coherent_state(&grid, cfg.initial.x0, cfg.initial.p0, cfg.quantum.hbar)?)
}

fn matched_cloud(cfg: &RunConfig, n: usize) -> CliResult<ClassicalEnsemble> {
    Ok(sample_coherent_matched(
        cfg.initial.x0,
        cfg.initial.p0,
        cfg.quantum.hbar,
        n,
        cfg.run.seed,
    )?)
}

/// Common metadata block; `results` carries the command-specific numbers.
/// Contains nothing that depends on the machine or the wall clock.
pub fn metadata(cfg: &RunConfig, command: &str, clip_events: Option<u64>, results: Value) -> Value {
    let q = &cfg.quantum;
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": cfg.run.seed,
        "n_traj": cfg.run.n_traj,
        "dt": q.dt,
        "grid": {
            "n_points": q.n_points,
            "x_min": q.x_min,
            "x_max": q.x_max,
            "n_p": q.n_p,
        },
        "clip_sigmas": CLIP_SIGMAS,
        "clip_events": clip_events,
        "config": cfg,
        "results": results,
    })
}

fn write_grid(out: &OutputDir, cfg: &RunConfig, stem: &str, grid: &WignerGrid) -> CliResult<Vec<PathBuf>> {
    let mut files = Vec::new();
    if cfg.output.wants(Format::Qctw) {
        files.push(out.write_with(&format!("{stem}.qctw"), |w| write_qctw(grid, w))?);
    }
    if cfg.output.wants(Format::WignerCsv) {
        files.push(out.write_with(&format!("{stem}.csv"), |w| write_wigner_csv(grid, w))?);
    }
    Ok(files)
}

fn write_moments_csv(w: &mut dyn Write, times: &[f64], moments: &[Moments]) -> std::io::Result<()> {
    writeln!(w, "t,mean_x,mean_p,var_x,var_p,cov_xp")?;
    for (t, m) in times.iter().zip(moments) {
        writeln!(w, "{t},{},{},{},{},{}", m.mean_x, m.mean_p, m.var_x, m.var_p, m.cov_xp)?;
    }
    Ok(())
}

/// The single conditioned trajectory behind both figure reproductions:
/// trajectory 0 of the configured seed.
pub fn reference_trajectory(cfg: &RunConfig, snapshot_times: &[f64]) -> CliResult<TrajectoryRecord> {
    let psi0 = initial_state(cfg)?;
    let meas = cfg.measurement()?;
    let mut noise = NoisePath::new(cfg.run.seed, 0, cfg.quantum.dt);
    Ok(run_trajectory(
        &psi0,
        &cfg.model,
        &meas,
        cfg.run.t_final,
        &mut noise,
        cfg.run.record_every,
        snapshot_times,
    )?)
}

#[derive(Debug, Clone)]
pub struct Fig1 {
    pub record: TrajectoryRecord,
    pub state: WaveFunction,
    pub wigner: WignerGrid,
    pub var_x: f64,
    pub negativity: f64,
    /// Largest deviation between the Wigner x-marginal and `|ψ(x)|²`.
    pub marginal_deviation: f64,
}

pub fn run_fig1(cfg: &RunConfig) -> CliResult<Fig1> {
    let t = cfg.run.t_final;
    let record = reference_trajectory(cfg, &[t])?;
    let state = record.snapshots[0].1.clone();
    let w = wigner(&state, cfg.quantum.n_p)?;
    let marginal_deviation = w
        .marginal_x()
        .iter()
        .zip(state.density())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    let var_x = record.rows.last().map(|r| r.moments.var_x).unwrap_or(f64::NAN);
    Ok(Fig1 {
        negativity: negativity(&w),
        var_x,
        marginal_deviation,
        wigner: w,
        state,
        record,
    })
}

impl Fig1 {
    pub fn write(&self, cfg: &RunConfig, out: &OutputDir) -> CliResult<Vec<PathBuf>> {
        let mut files = write_grid(out, cfg, "fig1_wigner", &self.wigner)?;
        if cfg.output.wants(Format::Csv) {
            let xs = self.state.grid.positions();
            let rho = self.state.density();
            files.push(out.write_with("fig1_density.csv", |w| {
                writeln!(w, "x,density")?;
                for (x, r) in xs.iter().zip(&rho) {
                    writeln!(w, "{x},{r}")?;
                }
                Ok(())
            })?);
        }
        let results = json!({
            "t": cfg.run.t_final,
            "var_x": self.var_x,
            "coherent_var_x": 0.5 * cfg.quantum.hbar,
            "negativity": self.negativity,
            "marginal_deviation": self.marginal_deviation,
        });
        files.push(out.write_json(
            "fig1_metadata.json",
            &metadata(cfg, "reproduce-fig1", Some(self.record.clip_events), results),
        )?);
        Ok(files)
    }

    pub fn summary(&self) -> String {
        format!(
            "V_x(t_final) = {:.4}, Wigner negativity = {:.4}, marginal deviation = {:.2e}",
            self.var_x, self.negativity, self.marginal_deviation
        )
    }
}

#[derive(Debug, Clone)]
pub struct Fig2 {
    pub record: TrajectoryRecord,
    pub windows: Vec<NoiseWindow>,
    pub noise_metric: f64,
}

pub fn run_fig2(cfg: &RunConfig) -> CliResult<Fig2> {
    let record = reference_trajectory(cfg, &[])?;
    let windows = trajectory_noise_metric(&record, cfg.model.m, cfg.run.noise_window)?;
    Ok(Fig2 {
        noise_metric: noise_metric_summary(&windows),
        windows,
        record,
    })
}

impl Fig2 {
    pub fn max_abs_mean_x(&self) -> f64 {
        self.record.mean_x().iter().fold(0.0, |a, x| a.max(x.abs()))
    }

    pub fn write(&self, cfg: &RunConfig, out: &OutputDir) -> CliResult<Vec<PathBuf>> {
        let mut files = Vec::new();
        if cfg.output.wants(Format::Csv) {
            files.push(out.write_with("fig2_trajectory.csv", |w| self.record.write_csv(w))?);
        }
        let results = json!({
            "noise_metric": self.noise_metric,
            "noise_windows": self.windows,
            "max_abs_mean_x": self.max_abs_mean_x(),
            "record_interval": cfg.record_interval(),
        });
        files.push(out.write_json(
            "fig2_metadata.json",
            &metadata(cfg, "reproduce-fig2", Some(self.record.clip_events), results),
        )?);
        Ok(files)
    }

    pub fn summary(&self) -> String {
        format!(
            "noise metric = {:.4} over {} windows, max |<x>| = {:.3}",
            self.noise_metric,
            self.windows.len(),
            self.max_abs_mean_x()
        )
    }
}

pub fn run_lyapunov(cfg: &RunConfig) -> CliResult<LyapunovEstimate> {
    let l = &cfg.lyapunov;
    let starts = matched_cloud(cfg, l.n_orbits)?;
    Ok(lyapunov_ensemble(&cfg.model, &starts, l.t_span, l.dt, l.renorm_every)?)
}

pub fn write_lyapunov(est: &LyapunovEstimate, cfg: &RunConfig, out: &OutputDir) -> CliResult<Vec<PathBuf>> {
    Ok(vec![
        out.write_json("lyapunov.json", est)?,
        out.write_json(
            "lyapunov_metadata.json",
            &metadata(cfg, "lyapunov", None, serde_json::to_value(est).expect("plain struct")),
        )?,
    ])
}

#[derive(Debug, Clone, Serialize)]
pub struct Classification {
    pub lyapunov: LyapunovEstimate,
    pub report: RegimeReport,
}

pub fn run_classify(cfg: &RunConfig) -> CliResult<Classification> {
    let lyapunov = run_lyapunov(cfg)?;
    let starts = matched_cloud(cfg, cfg.lyapunov.n_orbits)?;
    let c = &cfg.criteria;
    let averages = phase_space_averages(&cfg.model, &starts, c.averages_t_span, c.averages_dt)?;
    let hbar = cfg.quantum.hbar;
    let scales = action_scales(&averages, cfg.area(), hbar, lyapunov.lambda_bar)?;
    let report = classify(
        &averages,
        &cfg.measurement()?,
        &scales,
        lyapunov.lambda_bar,
        c.xi_mode,
        c.margin_factor,
    )?;
    Ok(Classification { lyapunov, report })
}

impl Classification {
    pub fn write(&self, cfg: &RunConfig, out: &OutputDir) -> CliResult<Vec<PathBuf>> {
        Ok(vec![
            out.write_json("classify_report.json", self)?,
            out.write_json(
                "classify_metadata.json",
                &metadata(cfg, "classify", None, json!({ "label": self.report.label })),
            )?,
        ])
    }

    pub fn summary(&self) -> String {
        format!(
            "lambda_bar = {:.4} +- {:.4}\n{}",
            self.lyapunov.lambda_bar,
            self.lyapunov.std_err,
            self.report.table()
        )
    }
}

#[derive(Debug, Clone)]
pub struct WeakDemo {
    pub lyapunov: LyapunovEstimate,
    pub scales: WeakScales,
    pub coarse_cells: usize,
    pub series: ComparisonSeries,
    pub mean_trajectory_negativity: Vec<f64>,
    pub final_quantum: WignerGrid,
    pub final_classical: WignerGrid,
    pub clip_events: u64,
}

/// Ratio of the averaged negativity late (`t ≥ 3·t_qc`) to its early maximum
/// (`t ≤ t_qc`); `None` when either window holds no sample.
pub fn negativity_decay(series: &ComparisonSeries, t_qc: f64) -> Option<f64> {
    let pick = |keep: &dyn Fn(f64) -> bool| -> Vec<f64> {
        series
            .times
            .iter()
            .zip(&series.negativity)
            .filter(|(t, _)| keep(**t))
            .map(|(_, n)| *n)
            .collect()
    };
    let early = pick(&|t| t <= t_qc);
    let late = pick(&|t| t >= 3.0 * t_qc);
    if early.is_empty() || late.is_empty() {
        return None;
    }
    let peak = early.iter().cloned().fold(0.0, f64::max);
    let worst_late = late.iter().cloned().fold(0.0, f64::max);
    Some(worst_late / peak)
}

pub fn run_weak_demo(cfg: &RunConfig) -> CliResult<WeakDemo> {
    let times = &cfg.run.wigner_times;
    let t_end = *times
        .last()
        .ok_or_else(|| CliError::Config("weak-demo needs at least one entry in run.wigner_times".into()))?;
    let meas = cfg.measurement()?;
    let d = meas.diffusion();
    let lyapunov = run_lyapunov(cfg)?;
    let area = cfg.area();
    let xi = cfg.criteria.xi_mode.value(area / cfg.quantum.hbar);
    let scales = weak_times(d, cfg.model.m, lyapunov.lambda_bar, cfg.quantum.hbar, xi, area)?;

    let psi0 = initial_state(cfg)?;
    let averaged = average_ensemble(
        &psi0,
        &cfg.model,
        &meas,
        t_end,
        cfg.quantum.dt,
        cfg.run.n_traj,
        cfg.run.seed,
        times,
        cfg.quantum.n_p,
    )?;
    let coarse_cells = coarse_cells_for_area(&averaged.grids[0], scales.l * scales.l);

    let cloud = matched_cloud(cfg, cfg.classical.n_samples)?;
    let mut langevin = LangevinRun::new(cloud, &cfg.model, d, cfg.classical.dt, cfg.run.seed)?;
    let mut series = ComparisonSeries::default();
    let mut final_classical = None;
    for (t, w) in times.iter().zip(&averaged.grids) {
        langevin.advance_to(*t)?;
        let p = density_histogram(&langevin.ensemble, w)?;
        series.push(*t, density_distance(w, &p, coarse_cells)?, negativity(w), None);
        final_classical = Some(p);
    }
    let mut grids = averaged.grids;
    Ok(WeakDemo {
        lyapunov,
        scales,
        coarse_cells,
        series,
        mean_trajectory_negativity: averaged.mean_trajectory_negativity,
        final_quantum: grids.pop().expect("one grid per time"),
        final_classical: final_classical.expect("one density per time"),
        clip_events: averaged.clip_events,
    })
}

impl WeakDemo {
    pub fn negativity_decay(&self) -> Option<f64> {
        negativity_decay(&self.series, self.scales.t_qc)
    }

    pub fn write(&self, cfg: &RunConfig, out: &OutputDir) -> CliResult<Vec<PathBuf>> {
        let mut files = Vec::new();
        if cfg.output.wants(Format::Csv) {
            files.push(out.write_with("weak_demo.csv", |w| self.series.write_csv(w))?);
        }
        files.extend(write_grid(out, cfg, "weak_final_quantum", &self.final_quantum)?);
        files.extend(write_grid(out, cfg, "weak_final_classical", &self.final_classical)?);
        let results = json!({
            "lyapunov": self.lyapunov,
            "weak_scales": self.scales,
            "coarse_cells": self.coarse_cells,
            "negativity_decay": self.negativity_decay(),
            "mean_trajectory_negativity": self.mean_trajectory_negativity,
        });
        files.push(out.write_json(
            "weak_demo_metadata.json",
            &metadata(cfg, "weak-demo", Some(self.clip_events), results),
        )?);
        Ok(files)
    }

    pub fn summary(&self) -> String {
        let mut s = format!(
            "lambda_bar = {:.4}, t_qc = {:.3}, l = {:.4}, {} coarse cells per axis\n",
            self.lyapunov.lambda_bar, self.scales.t_qc, self.scales.l, self.coarse_cells
        );
        for i in 0..self.series.times.len() {
            s += &format!(
                "t = {:>7.3}  l1 = {:.4}  negativity = {:.5}\n",
                self.series.times[i], self.series.l1_distance[i], self.series.negativity[i]
            );
        }
        if let Some(r) = self.negativity_decay() {
            s += &format!("late/early negativity ratio = {r:.4}");
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct QuantumRun {
    pub record: TrajectoryRecord,
    pub wigners: Vec<(f64, WignerGrid)>,
}

pub fn run_simulate_quantum(cfg: &RunConfig) -> CliResult<QuantumRun> {
    let times: Vec<f64> = cfg
        .run
        .wigner_times
        .iter()
        .cloned()
        .filter(|t| *t <= cfg.run.t_final)
        .collect();
    let record = reference_trajectory(cfg, &times)?;
    let wigners = record
        .snapshots
        .iter()
        .map(|(t, psi)| Ok((*t, wigner(psi, cfg.quantum.n_p)?)))
        .collect::<CliResult<_>>()?;
    Ok(QuantumRun { record, wigners })
}

impl QuantumRun {
    pub fn write(&self, cfg: &RunConfig, out: &OutputDir) -> CliResult<Vec<PathBuf>> {
        let mut files = Vec::new();
        if cfg.output.wants(Format::Csv) {
            files.push(out.write_with("quantum_trajectory.csv", |w| self.record.write_csv(w))?);
        }
        for (t, w) in &self.wigners {
            files.extend(write_grid(out, cfg, &format!("quantum_wigner_t{t:.3}"), w)?);
        }
        let results = json!({
            "wigner_times": self.wigners.iter().map(|(t, _)| *t).collect::<Vec<_>>(),
            "negativity": self.wigners.iter().map(|(_, w)| negativity(w)).collect::<Vec<_>>(),
        });
        files.push(out.write_json(
            "quantum_metadata.json",
            &metadata(cfg, "simulate-quantum", Some(self.record.clip_events), results),
        )?);
        Ok(files)
    }
}

#[derive(Debug, Clone)]
pub struct ClassicalRun {
    pub times: Vec<f64>,
    pub moments: Vec<Moments>,
    pub density: WignerGrid,
}

/// Langevin ensemble with the configured diffusion, matched to the quantum
/// initial state; its final density is binned on the quantum Wigner axes.
pub fn run_simulate_classical(cfg: &RunConfig) -> CliResult<ClassicalRun> {
    let d = cfg.measurement()?.diffusion();
    let cloud = matched_cloud(cfg, cfg.classical.n_samples)?;
    let mut run = LangevinRun::new(cloud, &cfg.model, d, cfg.classical.dt, cfg.run.seed)?;
    let interval = cfg.record_interval();
    let n_rows = (cfg.run.t_final / interval).round() as usize;
    let mut times = vec![0.0];
    let mut moments = vec![run.ensemble.moments()];
    for i in 1..=n_rows {
        let t = (i as f64 * interval).min(cfg.run.t_final);
        run.advance_to(t)?;
        times.push(run.time());
        moments.push(run.ensemble.moments());
    }
    let q = &cfg.quantum;
    let dx = (q.x_max - q.x_min) / q.n_points as f64;
    let p_max = std::f64::consts::PI * q.hbar / dx;
    let axes = WignerGrid::zeros(q.n_points, q.n_p, q.x_min, dx, -p_max, 2.0 * p_max / q.n_p as f64);
    let density = density_histogram(&run.ensemble, &axes)?;
    Ok(ClassicalRun {
        times,
        moments,
        density,
    })
}

impl ClassicalRun {
    pub fn write(&self, cfg: &RunConfig, out: &OutputDir) -> CliResult<Vec<PathBuf>> {
        let mut files = Vec::new();
        if cfg.output.wants(Format::Csv) {
            files.push(out.write_with("classical_moments.csv", |w| {
                write_moments_csv(w, &self.times, &self.moments)
            })?);
        }
        files.extend(write_grid(out, cfg, "classical_density", &self.density)?);
        let results = json!({
            "diffusion": cfg.measurement()?.diffusion(),
            "n_samples": cfg.classical.n_samples,
            "final_moments": self.moments.last(),
        });
        files.push(out.write_json(
            "classical_metadata.json",
            &metadata(cfg, "simulate-classical", None, results),
        )?);
        Ok(files)
    }
}
