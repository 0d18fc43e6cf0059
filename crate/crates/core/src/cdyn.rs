//! Classical counterpart: Langevin ensembles with momentum diffusion, phase-space
//! histograms, and Lyapunov exponents from the tangent flow.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::HamiltonianSpec;
use crate::qstate::{Moments, WignerGrid};

/// Key mixed into the seed for Langevin kicks, so kicks never reuse the
/// keystream that drew the initial samples.
const KICK_KEY: u64 = 0x6b69_636b_5f6e_6f69;

/// Point samples of a classical phase-space density, uniformly weighted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalEnsemble {
    pub samples: Vec<(f64, f64)>,
}

impl ClassicalEnsemble {
    pub fn new(samples: Vec<(f64, f64)>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::InvalidParameter("an ensemble needs at least one sample".into()));
        }
        if samples.iter().any(|(x, p)| !x.is_finite() || !p.is_finite()) {
            return Err(Error::InvalidParameter("ensemble samples must be finite".into()));
        }
        Ok(Self { samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn moments(&self) -> Moments {
        let n = self.samples.len() as f64;
        let (sx, sp) = self
            .samples
            .iter()
            .fold((0.0, 0.0), |(a, b), (x, p)| (a + x, b + p));
        let (mean_x, mean_p) = (sx / n, sp / n);
        let (mut vx, mut vp, mut c) = (0.0, 0.0, 0.0);
        for (x, p) in &self.samples {
            let (dx, dp) = (x - mean_x, p - mean_p);
            vx += dx * dx;
            vp += dp * dp;
            c += dx * dp;
        }
        Moments {
            mean_x,
            mean_p,
            var_x: vx / n,
            var_p: vp / n,
            cov_xp: c / n,
        }
    }
}

/// One Langevin step: `p ← p + F(x,t)dt + √(2D)·dW`, then `x ← x + p dt/m`.
#[inline]
pub fn langevin_step(sample: (f64, f64), spec: &HamiltonianSpec, d: f64, t: f64, dt: f64, dw: f64) -> (f64, f64) {
    let (x, p) = sample;
    let p = p + spec.force(x, t) * dt + (2.0 * d).sqrt() * dw;
    (x + p / spec.m * dt, p)
}

/// Gaussian samples with means `(x0, p0)` and variances `ħ/2`, matching a coherent state.
pub fn sample_coherent_matched(x0: f64, p0: f64, hbar: f64, n: usize, seed: u64) -> Result<ClassicalEnsemble> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be >= 1".into()));
    }
    if !(hbar > 0.0) {
        return Err(Error::InvalidParameter(format!("hbar must be > 0, got {hbar}")));
    }
    let sigma = (hbar / 2.0).sqrt();
    let samples = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            (x0 + sigma * a, p0 + sigma * b)
        })
        .collect();
    ClassicalEnsemble::new(samples)
}

/// An ensemble under Langevin dynamics with its own noise streams.
///
/// Sample `i` draws kicks from a ChaCha8 stream keyed by `(seed, i)`, so the
/// evolved ensemble depends only on the seed, never on how work is scheduled.
#[derive(Debug, Clone)]
pub struct LangevinRun {
    pub ensemble: ClassicalEnsemble,
    pub spec: HamiltonianSpec,
    pub diffusion: f64,
    pub dt: f64,
    steps_done: u64,
    rngs: Vec<ChaCha8Rng>,
}

impl LangevinRun {
    pub fn new(ensemble: ClassicalEnsemble, spec: &HamiltonianSpec, diffusion: f64, dt: f64, seed: u64) -> Result<Self> {
        spec.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
        }
        if !(diffusion >= 0.0 && diffusion.is_finite()) {
            return Err(Error::InvalidParameter(format!("diffusion must be >= 0, got {diffusion}")));
        }
        let rngs = (0..ensemble.len() as u64)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ KICK_KEY);
                rng.set_stream(i);
                rng
            })
            .collect();
        Ok(Self {
            ensemble,
            spec: *spec,
            diffusion,
            dt,
            steps_done: 0,
            rngs,
        })
    }

    pub fn time(&self) -> f64 {
        self.steps_done as f64 * self.dt
    }

    /// Advances to the step nearest `t`; earlier times are an error.
    pub fn advance_to(&mut self, t: f64) -> Result<()> {
        let target = (t / self.dt).round() as u64;
        if target < self.steps_done {
            return Err(Error::InvalidParameter(format!(
                "cannot go back from t = {} to t = {t}",
                self.time()
            )));
        }
        let (start, dt, d, spec) = (self.steps_done, self.dt, self.diffusion, self.spec);
        let sqrt_dt = dt.sqrt();
        self.ensemble
            .samples
            .par_iter_mut()
            .zip(self.rngs.par_iter_mut())
            .for_each(|(s, rng)| {
                for step in start..target {
                    let dw = if d > 0.0 {
                        sqrt_dt * rng.sample::<f64, _>(StandardNormal)
                    } else {
                        0.0
                    };
                    *s = langevin_step(*s, &spec, d, step as f64 * dt, dt, dw);
                }
            });
        self.steps_done = target;
        if self.ensemble.samples.iter().any(|(x, p)| !x.is_finite() || !p.is_finite()) {
            return Err(Error::Domain(format!("classical samples diverged before t = {t}")));
        }
        Ok(())
    }
}

/// Normalized 2-D histogram on the nodes of `axes`: each node owns the cell of
/// size `dx × dp` centred on it.
pub fn density_histogram(ensemble: &ClassicalEnsemble, axes: &WignerGrid) -> Result<WignerGrid> {
    let mut out = axes.zeros_like();
    let mut outside = 0usize;
    for &(x, p) in &ensemble.samples {
        let i = ((x - axes.x_min) / axes.dx).round();
        let j = ((p - axes.p_min) / axes.dp).round();
        if i < 0.0 || j < 0.0 || i >= axes.n_x as f64 || j >= axes.n_p as f64 {
            outside += 1;
            continue;
        }
        out.values[i as usize * axes.n_p + j as usize] += 1.0;
    }
    if outside > 0 {
        return Err(Error::OutOfRange {
            fraction: outside as f64 / ensemble.len() as f64,
        });
    }
    out.scale(1.0 / (ensemble.len() as f64 * axes.cell_area()));
    Ok(out)
}

/// State of the orbit plus tangent vector, `(x, p, δx, δp)`.
type Tangent = [f64; 4];

#[inline]
fn tangent_rhs(spec: &HamiltonianSpec, s: &Tangent, t: f64) -> Tangent {
    [
        s[1] / spec.m,
        spec.force(s[0], t),
        s[3] / spec.m,
        spec.force_dx(s[0]) * s[2],
    ]
}

#[inline]
fn rk4_tangent(spec: &HamiltonianSpec, s: &Tangent, t: f64, dt: f64) -> Tangent {
    let add = |a: &Tangent, b: &Tangent, h: f64| [a[0] + h * b[0], a[1] + h * b[1], a[2] + h * b[2], a[3] + h * b[3]];
    let k1 = tangent_rhs(spec, s, t);
    let k2 = tangent_rhs(spec, &add(s, &k1, 0.5 * dt), t + 0.5 * dt);
    let k3 = tangent_rhs(spec, &add(s, &k2, 0.5 * dt), t + 0.5 * dt);
    let k4 = tangent_rhs(spec, &add(s, &k3, dt), t + dt);
    let mut out = *s;
    for i in 0..4 {
        out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    out
}

/// Noiseless orbit from `(x0, p0)` at `t = 0` with RK4; `visit(t, x, p)` sees
/// every step including the initial point.
pub fn integrate_orbit(
    spec: &HamiltonianSpec,
    x0: f64,
    p0: f64,
    dt: f64,
    n_steps: u64,
    mut visit: impl FnMut(f64, f64, f64),
) {
    let mut s: Tangent = [x0, p0, 0.0, 0.0];
    visit(0.0, x0, p0);
    for step in 0..n_steps {
        let t = step as f64 * dt;
        s = rk4_tangent(spec, &s, t, dt);
        visit(t + dt, s[0], s[1]);
    }
}

/// Blocks used for the standard error of a single-orbit exponent.
pub const LYAPUNOV_BLOCKS: usize = 10;

/// Mean exponential separation rate and its uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LyapunovEstimate {
    pub lambda_bar: f64,
    pub std_err: f64,
    pub n_orbits: usize,
    pub t_span: f64,
}

impl LyapunovEstimate {
    /// Local rate `λ(x) = √(|∂ₓF|/m)`.
    pub fn local_lambda(spec: &HamiltonianSpec, x: f64) -> f64 {
        spec.local_lambda(x)
    }
}

fn mean_and_err(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Fails when two halves of a sample of estimates disagree by more than 3σ.
fn check_halves(estimates: &[f64], what: &str) -> Result<()> {
    if estimates.len() < 4 {
        return Ok(());
    }
    let (a, b) = estimates.split_at(estimates.len() / 2);
    let (ma, ea) = mean_and_err(a);
    let (mb, eb) = mean_and_err(b);
    let sigma = (ea * ea + eb * eb).sqrt();
    let floor = 1e-9 * (ma.abs() + mb.abs()).max(1.0);
    if (ma - mb).abs() > 3.0 * sigma + floor {
        return Err(Error::NonConvergence(format!(
            "{what}: halves give {ma} and {mb} (3 sigma = {})",
            3.0 * sigma
        )));
    }
    Ok(())
}

fn check_lyapunov_inputs(spec: &HamiltonianSpec, t_span: f64, dt: f64, renorm_every: usize) -> Result<u64> {
    spec.validate()?;
    if !(dt > 0.0) || renorm_every == 0 {
        return Err(Error::InvalidParameter("dt must be > 0 and renorm_every >= 1".into()));
    }
    if !(t_span * spec.drive_freq >= 10.0) {
        return Err(Error::InvalidParameter(format!(
            "t_span = {t_span} covers fewer than 10 radians of the drive"
        )));
    }
    let n_steps = (t_span / dt).round() as u64;
    if n_steps < (LYAPUNOV_BLOCKS * renorm_every) as u64 {
        return Err(Error::InvalidParameter(format!(
            "{n_steps} steps cannot fill {LYAPUNOV_BLOCKS} blocks of {renorm_every} steps"
        )));
    }
    Ok(n_steps)
}

/// Per-block exponents of one orbit.
fn benettin_blocks(spec: &HamiltonianSpec, x0: f64, p0: f64, dt: f64, n_steps: u64, renorm_every: usize) -> Result<Vec<f64>> {
    let inv = std::f64::consts::FRAC_1_SQRT_2;
    let mut s: Tangent = [x0, p0, inv, inv];
    let block_steps = n_steps / LYAPUNOV_BLOCKS as u64;
    let mut blocks = Vec::with_capacity(LYAPUNOV_BLOCKS);
    let mut log_sum = 0.0;
    let mut step = 0u64;
    for _ in 0..LYAPUNOV_BLOCKS {
        let block_end = step + block_steps;
        let block_start_log = log_sum;
        while step < block_end {
            s = rk4_tangent(spec, &s, step as f64 * dt, dt);
            step += 1;
            if step % renorm_every as u64 == 0 || step == block_end {
                let norm = (s[2] * s[2] + s[3] * s[3]).sqrt();
                if !(norm > 0.0 && norm.is_finite()) || !s[0].is_finite() || !s[1].is_finite() {
                    return Err(Error::NonConvergence(format!("orbit from ({x0}, {p0}) diverged at step {step}")));
                }
                log_sum += norm.ln();
                s[2] /= norm;
                s[3] /= norm;
            }
        }
        blocks.push((log_sum - block_start_log) / (block_steps as f64 * dt));
    }
    Ok(blocks)
}

/// Largest Lyapunov exponent of the noiseless orbit from `(x0, p0)` by the
/// Benettin method: RK4 on orbit and tangent vector, renormalized every
/// `renorm_every` steps. The standard error comes from [`LYAPUNOV_BLOCKS`] blocks.
pub fn lyapunov_benettin(
    spec: &HamiltonianSpec,
    x0: f64,
    p0: f64,
    t_span: f64,
    dt: f64,
    renorm_every: usize,
) -> Result<LyapunovEstimate> {
    let n_steps = check_lyapunov_inputs(spec, t_span, dt, renorm_every)?;
    let blocks = benettin_blocks(spec, x0, p0, dt, n_steps, renorm_every)?;
    check_halves(&blocks, "block exponents")?;
    let (lambda_bar, std_err) = mean_and_err(&blocks);
    Ok(LyapunovEstimate {
        lambda_bar,
        std_err,
        n_orbits: 1,
        t_span: (n_steps / LYAPUNOV_BLOCKS as u64 * LYAPUNOV_BLOCKS as u64) as f64 * dt,
    })
}

/// Phase-space average exponent: the mean of single-orbit exponents over the
/// initial conditions in `starts`, with the standard error across orbits.
pub fn lyapunov_ensemble(
    spec: &HamiltonianSpec,
    starts: &ClassicalEnsemble,
    t_span: f64,
    dt: f64,
    renorm_every: usize,
) -> Result<LyapunovEstimate> {
    let n_steps = check_lyapunov_inputs(spec, t_span, dt, renorm_every)?;
    let per_orbit: Vec<f64> = starts
        .samples
        .par_iter()
        .map(|&(x0, p0)| {
            benettin_blocks(spec, x0, p0, dt, n_steps, renorm_every)
                .map(|b| b.iter().sum::<f64>() / b.len() as f64)
        })
        .collect::<Result<_>>()?;
    check_halves(&per_orbit, "orbit exponents")?;
    let (lambda_bar, std_err) = mean_and_err(&per_orbit);
    Ok(LyapunovEstimate {
        lambda_bar,
        std_err,
        n_orbits: starts.len(),
        t_span: (n_steps / LYAPUNOV_BLOCKS as u64 * LYAPUNOV_BLOCKS as u64) as f64 * dt,
    })
}
