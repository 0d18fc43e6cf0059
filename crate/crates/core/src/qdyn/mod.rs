//! Conditioned evolution of a continuously position-measured particle.
//!
//! With unit detection efficiency the stochastic master equation
//! `dρ = −(i/ħ)[H,ρ]dt − k[x,[x,ρ]]dt + √(2k)(xρ + ρx − 2⟨x⟩ρ)dW`
//! keeps pure states pure, so each trajectory is propagated as a wave function:
//!
//! 1. half a Hamiltonian step (kinetic factor in momentum space),
//! 2. the potential phase at the step midpoint together with the measurement
//!    multiplier `exp[−2k(x−⟨x⟩)²dt + √(2k)(x−⟨x⟩)dW]`, then renormalization,
//! 3. the second half of the kinetic factor.
//!
//! Consecutive kinetic halves are fused when no output is needed in between.

mod lindblad;
mod noise;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{DriveCoupling, HamiltonianSpec};
use crate::qstate::{moments_with, wigner, Moments, SpectralPlan, WaveFunction, WignerGrid, BOUNDARY_LEAK_LIMIT};

pub use lindblad::{lindblad_evolve, DensityMatrix, LINDBLAD_MAX_POINTS};
pub use noise::{NoisePath, CLIP_SIGMAS};

/// Norm below which a single step is considered to have collapsed the state.
pub const NORM_COLLAPSE: f64 = 1e-3;

/// Continuous position measurement of strength `k`; momentum diffusion `D = ħ²k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSpec {
    pub k: f64,
    pub hbar: f64,
    pub eta: f64,
}

impl MeasurementSpec {
    pub fn new(k: f64, hbar: f64) -> Result<Self> {
        Self::with_efficiency(k, hbar, 1.0)
    }

    pub fn with_efficiency(k: f64, hbar: f64, eta: f64) -> Result<Self> {
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::InvalidParameter(format!("measurement strength must be >= 0, got {k}")));
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidParameter(format!("hbar must be > 0, got {hbar}")));
        }
        if eta != 1.0 {
            return Err(Error::InvalidParameter(format!(
                "only unit detection efficiency is supported, got {eta}"
            )));
        }
        Ok(Self { k, hbar, eta })
    }

    /// Measurement strength giving momentum diffusion `d`. The quotient is
    /// rounded to 15 significant digits, so a diffusion written as `ħ²k`
    /// yields exactly the strength `k` rather than a neighbouring float.
    pub fn from_diffusion(d: f64, hbar: f64) -> Result<Self> {
        let k = d / (hbar * hbar);
        let k = if k.is_finite() {
            format!("{k:.14e}").parse().unwrap_or(k)
        } else {
            k
        };
        Self::new(k, hbar)
    }

    pub fn diffusion(&self) -> f64 {
        self.hbar * self.hbar * self.k
    }
}

/// Split-step propagator for one grid, Hamiltonian, measurement and time step.
#[derive(Debug, Clone)]
pub struct Propagator {
    spec: HamiltonianSpec,
    meas: MeasurementSpec,
    dt: f64,
    dx: f64,
    positions: Vec<f64>,
    plan: SpectralPlan,
    scratch: Vec<Complex64>,
    /// `exp(−i p² dt/(4mħ))/n`, half a kinetic step including the FFT normalization.
    kinetic_half: Vec<Complex64>,
    kinetic_full: Vec<Complex64>,
    /// `exp(−i V₀(x) dt/ħ)` for the time-independent part of the potential.
    static_phase: Vec<Complex64>,
}

/// Drive phase is recomputed exactly every this many points and advanced by
/// complex multiplication in between.
const PHASE_BLOCK: usize = 32;

impl Propagator {
    pub fn new(
        grid: &crate::qstate::PositionGrid,
        spec: &HamiltonianSpec,
        meas: &MeasurementSpec,
        dt: f64,
    ) -> Result<Self> {
        spec.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
        }
        let hbar = meas.hbar;
        let n = grid.n_points;
        let norm = 1.0 / n as f64;
        let p = grid.momenta(hbar);
        let kin = |tau: f64| -> Vec<Complex64> {
            p.iter()
                .map(|pk| Complex64::from_polar(norm, -pk * pk * tau / (2.0 * spec.m * hbar)))
                .collect()
        };
        let positions = grid.positions();
        let static_phase = positions
            .iter()
            .map(|&x| Complex64::from_polar(1.0, -spec.static_potential(x) * dt / hbar))
            .collect();
        let plan = SpectralPlan::new(n);
        Ok(Self {
            spec: *spec,
            meas: *meas,
            dt,
            dx: grid.dx,
            scratch: plan.scratch(),
            plan,
            kinetic_half: kin(0.5 * dt),
            kinetic_full: kin(dt),
            static_phase,
            positions,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    fn kinetic(&mut self, psi: &mut [Complex64], full: bool) {
        self.plan.forward(psi, &mut self.scratch);
        let factor = if full { &self.kinetic_full } else { &self.kinetic_half };
        for (a, f) in psi.iter_mut().zip(factor) {
            *a *= f;
        }
        self.plan.inverse(psi, &mut self.scratch);
    }

    /// Potential phase at `t_mid` and measurement back-action with increment `dw`.
    fn position_update(&self, psi: &mut [Complex64], t_mid: f64, dw: f64) -> Result<()> {
        let k = self.meas.k;
        let hbar = self.meas.hbar;
        let dt = self.dt;
        let measured = k > 0.0;
        let mean_x = if measured {
            let (mut s0, mut s1) = (0.0, 0.0);
            for (a, x) in psi.iter().zip(&self.positions) {
                let w = a.norm_sqr();
                s0 += w;
                s1 += w * x;
            }
            s1 / s0
        } else {
            0.0
        };
        let theta = match self.spec.drive_coupling {
            DriveCoupling::LinearInX => self.spec.drive_strength(t_mid) * dt / hbar,
            DriveCoupling::Additive => 0.0,
        };
        let step = Complex64::from_polar(1.0, -theta * self.dx);
        let noise = (2.0 * k).sqrt() * dw;
        let mut norm = 0.0;
        for (amps, (xs, phases)) in psi
            .chunks_mut(PHASE_BLOCK)
            .zip(self.positions.chunks(PHASE_BLOCK).zip(self.static_phase.chunks(PHASE_BLOCK)))
        {
            let mut drive = Complex64::from_polar(1.0, -theta * xs[0]);
            for ((a, &x), ph) in amps.iter_mut().zip(xs).zip(phases) {
                let mut f = ph * drive;
                if measured {
                    let d = x - mean_x;
                    f *= (-2.0 * k * dt * d * d + noise * d).exp();
                }
                *a *= f;
                norm += a.norm_sqr();
                drive *= step;
            }
        }
        norm *= self.dx;
        if !(norm >= NORM_COLLAPSE) {
            return Err(Error::NormCollapse { norm });
        }
        let scale = 1.0 / norm.sqrt();
        for a in psi.iter_mut() {
            *a *= scale;
        }
        Ok(())
    }

    /// One complete step from `t` to `t + dt`.
    pub fn step(&mut self, psi: &mut WaveFunction, t: f64, dw: f64) -> Result<()> {
        let bound = CLIP_SIGMAS * self.dt.sqrt();
        let dw = dw.clamp(-bound, bound);
        let amps = &mut psi.amplitudes;
        self.kinetic(amps, false);
        self.position_update(amps, t + 0.5 * self.dt, dw)?;
        self.kinetic(amps, false);
        Ok(())
    }
}

/// Advances `psi` by one conditioned step of length `dt` driven by the Wiener increment `dw`.
pub fn step_conditioned(
    psi: &WaveFunction,
    spec: &HamiltonianSpec,
    meas: &MeasurementSpec,
    t: f64,
    dt: f64,
    dw: f64,
) -> Result<WaveFunction> {
    let mut prop = Propagator::new(&psi.grid, spec, meas, dt)?;
    let mut out = psi.clone();
    prop.step(&mut out, t, dw)?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub moments: Moments,
    pub norm_leak: f64,
}

#[derive(Debug, Clone)]
pub struct TrajectoryRecord {
    pub rows: Vec<TrajectoryRow>,
    /// States at the requested snapshot times, in the order requested.
    pub snapshots: Vec<(f64, WaveFunction)>,
    pub dt: f64,
    pub clip_events: u64,
    pub seed: u64,
    pub trajectory_index: u64,
}

impl TrajectoryRecord {
    pub const CSV_HEADER: &'static str = "t,mean_x,mean_p,var_x,var_p,cov_xp,norm_leak";

    pub fn write_csv<W: std::io::Write>(&self, out: W) -> std::io::Result<()> {
        use std::io::Write;
        let mut out = std::io::BufWriter::new(out);
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in &self.rows {
            let m = &r.moments;
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.t, m.mean_x, m.mean_p, m.var_x, m.var_p, m.cov_xp, r.norm_leak
            )?;
        }
        out.flush()
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn mean_x(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.moments.mean_x).collect()
    }

    pub fn snapshot(&self, t: f64) -> Option<&WaveFunction> {
        self.snapshots
            .iter()
            .find(|(ts, _)| (ts - t).abs() < 1e-9)
            .map(|(_, psi)| psi)
    }
}

fn step_index(t: f64, dt: f64) -> u64 {
    (t / dt).round() as u64
}

/// Integrates one conditioned trajectory from `t = 0` to `t_final`.
///
/// A row of moments is recorded at `t = 0` and every `record_every` steps;
/// full states are kept at `snapshot_times` (rounded to the nearest step).
/// The result is a deterministic function of the initial state and the noise path.
#[allow(clippy::too_many_arguments)]
pub fn run_trajectory(
    psi0: &WaveFunction,
    spec: &HamiltonianSpec,
    meas: &MeasurementSpec,
    t_final: f64,
    noise: &mut NoisePath,
    record_every: usize,
    snapshot_times: &[f64],
) -> Result<TrajectoryRecord> {
    let dt = noise.dt();
    if record_every == 0 {
        return Err(Error::InvalidParameter("record_every must be >= 1".into()));
    }
    if !(t_final >= 0.0) {
        return Err(Error::InvalidParameter(format!("t_final must be >= 0, got {t_final}")));
    }
    if (meas.hbar - psi0.hbar).abs() > 1e-15 * psi0.hbar {
        return Err(Error::InvalidParameter(format!(
            "state has hbar = {} but the measurement uses {}",
            psi0.hbar, meas.hbar
        )));
    }
    let n_steps = step_index(t_final, dt);
    let snap_steps: Vec<u64> = snapshot_times.iter().map(|&t| step_index(t, dt)).collect();
    if let Some(&bad) = snap_steps.iter().find(|&&s| s > n_steps) {
        return Err(Error::InvalidParameter(format!(
            "snapshot at step {bad} is beyond the last step {n_steps}"
        )));
    }

    let mut prop = Propagator::new(&psi0.grid, spec, meas, dt)?;
    let mut psi = psi0.clone();
    psi.normalize();
    let mut rows = Vec::with_capacity(n_steps as usize / record_every + 2);
    let mut snapshots: Vec<Option<WaveFunction>> = vec![None; snapshot_times.len()];

    let mut observe = |psi: &WaveFunction, step: u64, rows: &mut Vec<TrajectoryRow>, prop: &Propagator| -> Result<()> {
        let t = step as f64 * dt;
        if step % record_every as u64 == 0 || step == n_steps {
            let norm_leak = psi.boundary_mass();
            if norm_leak > BOUNDARY_LEAK_LIMIT {
                return Err(Error::BoundaryLeak {
                    leak: norm_leak,
                    limit: BOUNDARY_LEAK_LIMIT,
                    t,
                });
            }
            rows.push(TrajectoryRow {
                t,
                moments: moments_with(psi, &prop.plan),
                norm_leak,
            });
        }
        for (slot, &s) in snapshots.iter_mut().zip(&snap_steps) {
            if s == step {
                *slot = Some(psi.clone());
            }
        }
        Ok(())
    };

    observe(&psi, 0, &mut rows, &prop)?;
    let needs_output = |step: u64| -> bool {
        step % record_every as u64 == 0 || step == n_steps || snap_steps.contains(&step)
    };

    if n_steps > 0 {
        prop.kinetic(&mut psi.amplitudes, false);
    }
    for step in 0..n_steps {
        let dw = noise.increment(step);
        let t_mid = (step as f64 + 0.5) * dt;
        prop.position_update(&mut psi.amplitudes, t_mid, dw)?;
        let done = step + 1;
        if needs_output(done) {
            prop.kinetic(&mut psi.amplitudes, false);
            observe(&psi, done, &mut rows, &prop)?;
            if done < n_steps {
                prop.kinetic(&mut psi.amplitudes, false);
            }
        } else {
            prop.kinetic(&mut psi.amplitudes, true);
        }
    }

    Ok(TrajectoryRecord {
        rows,
        snapshots: snapshot_times
            .iter()
            .zip(snapshots)
            .map(|(&t, s)| (t, s.expect("every snapshot step is visited")))
            .collect(),
        dt,
        clip_events: noise.clip_events(),
        seed: noise.seed,
        trajectory_index: noise.trajectory_index,
    })
}

/// Trajectory-averaged Wigner functions and mixture moments.
#[derive(Debug, Clone)]
pub struct AveragedDensity {
    pub times: Vec<f64>,
    pub grids: Vec<WignerGrid>,
    /// Moments of the unconditioned (mixture) state at each time.
    pub moments: Vec<Moments>,
    /// Mean over trajectories of each trajectory's own Wigner negativity.
    pub mean_trajectory_negativity: Vec<f64>,
    pub n_traj: usize,
    pub seed: u64,
    pub dt: f64,
    pub clip_events: u64,
}

/// Trajectories whose Wigner functions are evaluated concurrently before
/// being folded into the running sum. Fixed so the summation order never
/// depends on the worker count.
const REDUCTION_CHUNK: usize = 8;

fn pairwise_sum(mut grids: Vec<WignerGrid>) -> Result<WignerGrid> {
    while grids.len() > 1 {
        let mut next = Vec::with_capacity(grids.len().div_ceil(2));
        let mut it = grids.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a.add_assign(&b)?;
            }
            next.push(a);
        }
        grids = next;
    }
    grids
        .pop()
        .ok_or_else(|| Error::InvalidParameter("empty reduction".into()))
}

/// Runs `n_traj` conditioned trajectories (indices `0..n_traj` of `seed`) and
/// averages their Wigner functions at each of `wigner_times`.
///
/// Bitwise reproducible for any rayon worker count.
#[allow(clippy::too_many_arguments)]
pub fn average_ensemble(
    psi0: &WaveFunction,
    spec: &HamiltonianSpec,
    meas: &MeasurementSpec,
    t_final: f64,
    dt: f64,
    n_traj: usize,
    seed: u64,
    wigner_times: &[f64],
    n_p: usize,
) -> Result<AveragedDensity> {
    if n_traj == 0 {
        return Err(Error::InvalidParameter("n_traj must be >= 1".into()));
    }
    let records: Vec<TrajectoryRecord> = (0..n_traj as u64)
        .into_par_iter()
        .map(|index| {
            let mut noise = NoisePath::new(seed, index, dt);
            run_trajectory(psi0, spec, meas, t_final, &mut noise, usize::MAX, wigner_times)
        })
        .collect::<Result<_>>()?;

    let mut grids = Vec::with_capacity(wigner_times.len());
    let mut mixture = Vec::with_capacity(wigner_times.len());
    let mut mean_neg = Vec::with_capacity(wigner_times.len());
    let inv = 1.0 / n_traj as f64;
    let plan = SpectralPlan::new(psi0.grid.n_points);
    for (ti, _) in wigner_times.iter().enumerate() {
        let mut acc: Option<WignerGrid> = None;
        let mut neg_sum = 0.0;
        for chunk in records.chunks(REDUCTION_CHUNK) {
            let ws: Vec<WignerGrid> = chunk
                .par_iter()
                .map(|r| wigner(&r.snapshots[ti].1, n_p))
                .collect::<Result<_>>()?;
            for w in &ws {
                neg_sum += crate::compare::negativity(w);
            }
            let partial = pairwise_sum(ws)?;
            match acc.as_mut() {
                Some(a) => a.add_assign(&partial)?,
                None => acc = Some(partial),
            }
        }
        let mut avg = acc.expect("n_traj >= 1");
        avg.scale(inv);
        grids.push(avg);
        mean_neg.push(neg_sum * inv);

        // mixture moments from the conditioned first and second moments
        let mut s = [0.0f64; 5];
        for r in &records {
            let m = moments_with(&r.snapshots[ti].1, &plan);
            s[0] += m.mean_x;
            s[1] += m.mean_p;
            s[2] += m.var_x + m.mean_x * m.mean_x;
            s[3] += m.var_p + m.mean_p * m.mean_p;
            s[4] += m.cov_xp + m.mean_x * m.mean_p;
        }
        let mean_x = s[0] * inv;
        let mean_p = s[1] * inv;
        mixture.push(Moments {
            mean_x,
            mean_p,
            var_x: s[2] * inv - mean_x * mean_x,
            var_p: s[3] * inv - mean_p * mean_p,
            cov_xp: s[4] * inv - mean_x * mean_p,
        });
    }

    Ok(AveragedDensity {
        times: wigner_times.to_vec(),
        grids,
        moments: mixture,
        mean_trajectory_negativity: mean_neg,
        n_traj,
        seed,
        dt,
        clip_events: records.iter().map(|r| r.clip_events).sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qstate::{coherent_state, PositionGrid};

    #[test]
    fn diffusion_entry_recovers_the_strength() {
        for (d, hbar, k) in [(0.01, 0.1, 1.0), (0.0016, 0.04, 1.0), (0.3, 0.1, 30.0), (0.0007, 0.1, 0.07)] {
            assert_eq!(MeasurementSpec::from_diffusion(d, hbar).unwrap().k, k);
        }
    }

    #[test]
    fn measurement_spec_checks() {
        let m = MeasurementSpec::new(1.0, 0.1).unwrap();
        assert_eq!(m.diffusion(), 0.1 * 0.1 * 1.0);
        let d = MeasurementSpec::from_diffusion(0.01, 0.1).unwrap();
        assert!((d.k - 1.0).abs() < 1e-12);
        assert!(MeasurementSpec::new(-1.0, 0.1).is_err());
        assert!(MeasurementSpec::new(1.0, 0.0).is_err());
        assert!(MeasurementSpec::with_efficiency(1.0, 0.1, 0.5).is_err());
    }

    fn setup() -> (WaveFunction, HamiltonianSpec, MeasurementSpec) {
        let grid = PositionGrid::new(128, -6.0, 6.0).unwrap();
        let psi = coherent_state(&grid, -1.0, 0.5, 0.2).unwrap();
        (psi, HamiltonianSpec::chaotic_duffing(), MeasurementSpec::new(1.0, 0.2).unwrap())
    }

    #[test]
    fn rows_follow_record_cadence() {
        let (psi, spec, meas) = setup();
        let mut noise = NoisePath::new(1, 0, 1e-3);
        let rec = run_trajectory(&psi, &spec, &meas, 0.105, &mut noise, 20, &[0.05]).unwrap();
        let t = rec.times();
        assert_eq!(t.len(), 7);
        assert_eq!(t[0], 0.0);
        assert!((t[1] - 0.02).abs() < 1e-12);
        assert!((t[6] - 0.105).abs() < 1e-12);
        assert!(rec.snapshot(0.05).is_some());
        assert!(rec.snapshot(0.06).is_none());
    }

    #[test]
    fn step_matches_trajectory_step() {
        let (psi, spec, meas) = setup();
        let mut noise = NoisePath::new(3, 2, 1e-3);
        let dw = noise.increment(0);
        let stepped = step_conditioned(&psi, &spec, &meas, 0.0, 1e-3, dw).unwrap();
        let mut noise = NoisePath::new(3, 2, 1e-3);
        let rec = run_trajectory(&psi, &spec, &meas, 1e-3, &mut noise, 1, &[1e-3]).unwrap();
        let snap = &rec.snapshots[0].1;
        for (a, b) in stepped.amplitudes.iter().zip(&snap.amplitudes) {
            assert!((a - b).norm() < 1e-13);
        }
        assert!((stepped.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bad_requests_are_rejected() {
        let (psi, spec, meas) = setup();
        let mut noise = NoisePath::new(1, 0, 1e-3);
        assert!(run_trajectory(&psi, &spec, &meas, 0.1, &mut noise, 0, &[]).is_err());
        assert!(run_trajectory(&psi, &spec, &meas, 0.1, &mut noise, 1, &[0.2]).is_err());
        let other = MeasurementSpec::new(1.0, 0.1).unwrap();
        assert!(run_trajectory(&psi, &spec, &other, 0.1, &mut noise, 1, &[]).is_err());
        assert!(average_ensemble(&psi, &spec, &meas, 0.1, 1e-3, 0, 1, &[0.1], 128).is_err());
    }

    #[test]
    fn huge_steps_collapse_the_norm() {
        let (psi, spec, _) = setup();
        let meas = MeasurementSpec::new(1e6, 0.2).unwrap();
        let err = step_conditioned(&psi, &spec, &meas, 0.0, 0.3, 0.0).unwrap_err();
        assert!(matches!(err, Error::NormCollapse { .. }));
    }

    #[test]
    fn csv_has_one_line_per_row() {
        let (psi, spec, meas) = setup();
        let mut noise = NoisePath::new(1, 0, 1e-3);
        let rec = run_trajectory(&psi, &spec, &meas, 0.01, &mut noise, 5, &[]).unwrap();
        let mut out = Vec::new();
        rec.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], TrajectoryRecord::CSV_HEADER);
        assert_eq!(lines.len(), 1 + rec.rows.len());
        assert!(lines[1].starts_with("0,"));
    }
}
