//! Strong (trajectory-level) and weak (density-level) classicality inequalities,
//! the action and length scales they are written in, and regime classification.
//!
//! An asymptotic relation `a ≪ b` is read as `b/a ≥ margin_factor`; `a ≲ b`
//! as `b/a ≥ 1`. Every entry keeps its raw sides and ratio so any other
//! reading can be recomputed from a report.

use std::f64::consts::{E, SQRT_2};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::cdyn::{integrate_orbit, ClassicalEnsemble};
use crate::error::{Error, Result};
use crate::model::HamiltonianSpec;
use crate::qdyn::MeasurementSpec;

/// Default reading of `≪`/`≫`.
pub const DEFAULT_MARGIN_FACTOR: f64 = 10.0;

/// `s ≫ e⁸`: the weak regime above the critical strength implies low noise.
pub fn semiclassical_threshold() -> f64 {
    8f64.exp()
}

/// `s ≫ 5⁷`: the same conclusion reached through wave-packet width bounds.
pub const WIDTH_ROUTE_THRESHOLD: f64 = 78125.0;

/// Largest relative disagreement tolerated between the two halves of an averaging run.
pub const AVERAGE_HALF_TOLERANCE: f64 = 0.1;

/// Typical magnitudes of the force and its derivatives over the motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceAverages {
    pub mass: f64,
    /// `|F|`
    pub force: f64,
    /// `|∂ₓF|`
    pub force_dx: f64,
    /// `|∂ₓ²F|`
    pub force_dxx: f64,
    /// `|p|`
    pub momentum: f64,
    /// `(x, p, t)` when evaluated at a single point instead of averaged.
    pub location: Option<(f64, f64, f64)>,
}

impl PhaseSpaceAverages {
    /// Values at one phase-space point and time.
    pub fn pointwise(spec: &HamiltonianSpec, x: f64, p: f64, t: f64) -> Self {
        Self {
            mass: spec.m,
            force: spec.force(x, t).abs(),
            force_dx: spec.force_dx(x).abs(),
            force_dxx: spec.force_dxx(x).abs(),
            momentum: p.abs(),
            location: Some((x, p, t)),
        }
    }
}

/// Time averages of `|F|, |∂ₓF|, |∂ₓ²F|, |p|` along the noiseless orbits
/// started from `starts`, pooled over orbits.
pub fn phase_space_averages(
    spec: &HamiltonianSpec,
    starts: &ClassicalEnsemble,
    t_span: f64,
    dt: f64,
) -> Result<PhaseSpaceAverages> {
    spec.validate()?;
    if !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!("dt must be > 0, got {dt}")));
    }
    if !(t_span >= 20.0 * spec.drive_period()) {
        return Err(Error::InvalidParameter(format!(
            "averaging needs at least 20 drive periods ({}), got t_span = {t_span}",
            20.0 * spec.drive_period()
        )));
    }
    let n_steps = (t_span / dt).round() as u64;
    let half = n_steps / 2;
    let mut sums = [[0.0f64; 4]; 2];
    let mut counts = [0u64; 2];
    for &(x0, p0) in &starts.samples {
        let mut step = 0u64;
        integrate_orbit(spec, x0, p0, dt, n_steps, |t, x, p| {
            let h = usize::from(step >= half);
            let s = &mut sums[h];
            s[0] += spec.force(x, t).abs();
            s[1] += spec.force_dx(x).abs();
            s[2] += spec.force_dxx(x).abs();
            s[3] += p.abs();
            counts[h] += 1;
            step += 1;
        });
    }
    let mut avg = [0.0; 4];
    for q in 0..4 {
        let a = sums[0][q] / counts[0] as f64;
        let b = sums[1][q] / counts[1] as f64;
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::NonConvergence("orbit left the finite domain".into()));
        }
        let scale = a.abs().max(b.abs());
        if scale > 0.0 && (a - b).abs() > AVERAGE_HALF_TOLERANCE * scale {
            return Err(Error::NonConvergence(format!(
                "half-span averages {a} and {b} differ by more than {}%",
                AVERAGE_HALF_TOLERANCE * 100.0
            )));
        }
        avg[q] = (sums[0][q] + sums[1][q]) / (counts[0] + counts[1]) as f64;
    }
    Ok(PhaseSpaceAverages {
        mass: spec.m,
        force: avg[0],
        force_dx: avg[1],
        force_dxx: avg[2],
        momentum: avg[3],
        location: None,
    })
}

/// Actions of the system and their ratios to ħ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionScales {
    /// `|p|³/(8m|F|)`
    pub kinetic_action: f64,
    /// `m|F|³/(|p|(∂ₓF)²)`
    pub force_action: f64,
    /// `min(kinetic, force)/ħ`
    pub trajectory_scale: f64,
    /// `A/ħ`
    pub area_scale: f64,
    /// `mλ̄|F|/(ħ|∂ₓ²F|)`
    pub nonlinearity_scale: f64,
    /// The single action used where all of the above are taken as equal.
    pub nominal: f64,
    /// Accessible phase-space area.
    pub area: f64,
}

impl ActionScales {
    /// Largest over smallest of the three dimensionless actions.
    pub fn spread(&self) -> f64 {
        let v = [self.trajectory_scale, self.area_scale, self.nonlinearity_scale];
        let max = v.iter().cloned().fold(f64::MIN, f64::max);
        let min = v.iter().cloned().fold(f64::MAX, f64::min);
        max / min
    }
}

/// Phase-space area of the rectangle `[x_lo, x_hi] × [p_lo, p_hi]`.
pub fn rectangle_area(x_lo: f64, x_hi: f64, p_lo: f64, p_hi: f64) -> f64 {
    (x_hi - x_lo) * (p_hi - p_lo)
}

pub fn action_scales(averages: &PhaseSpaceAverages, area: f64, hbar: f64, lambda_bar: f64) -> Result<ActionScales> {
    let a = averages;
    for (what, v) in [("area", area), ("hbar", hbar), ("lambda_bar", lambda_bar), ("mass", a.mass)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{what} must be > 0, got {v}")));
        }
    }
    let at = a
        .location
        .map(|(x, p, t)| format!(" at (x, p, t) = ({x}, {p}, {t})"))
        .unwrap_or_default();
    for (what, v) in [
        ("|F|", a.force),
        ("|p|", a.momentum),
        ("|dF/dx|", a.force_dx),
        ("|d2F/dx2|", a.force_dxx),
    ] {
        if v == 0.0 {
            return Err(Error::DivisionDomain(format!("{what} vanishes{at}")));
        }
    }
    let m = a.mass;
    let kinetic_action = a.momentum.powi(3) / (8.0 * m * a.force);
    let force_action = m * a.force.powi(3) / (a.momentum * a.force_dx * a.force_dx);
    let area_scale = area / hbar;
    Ok(ActionScales {
        kinetic_action,
        force_action,
        trajectory_scale: kinetic_action.min(force_action) / hbar,
        area_scale,
        nonlinearity_scale: m * lambda_bar * a.force / (hbar * a.force_dxx),
        nominal: area_scale,
        area,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    /// `lhs ≪ rhs`
    MuchLess,
    /// `lhs ≫ rhs`
    MuchGreater,
    /// `lhs ≲ rhs`
    AtMost,
    /// `lhs ≳ rhs`
    AtLeast,
}

impl Relation {
    pub fn symbol(self) -> &'static str {
        match self {
            Relation::MuchLess => "<<",
            Relation::MuchGreater => ">>",
            Relation::AtMost => "<~",
            Relation::AtLeast => ">~",
        }
    }

    fn is_asymptotic(self) -> bool {
        matches!(self, Relation::MuchLess | Relation::MuchGreater)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Satisfied,
    /// Holds as a plain inequality but not by the margin factor.
    Marginal,
    Violated,
}

/// One evaluated inequality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub name: String,
    /// The inequality written out.
    pub paper_eq: String,
    pub lhs: f64,
    pub rhs: f64,
    pub relation: Relation,
    /// `rhs/lhs` for `≪`/`≲`, `lhs/rhs` for `≫`/`≳`.
    pub ratio: f64,
    pub verdict: Verdict,
    pub satisfied: bool,
}

impl Inequality {
    pub fn new(name: &str, form: &str, lhs: f64, relation: Relation, rhs: f64, margin_factor: f64) -> Self {
        let (num, den) = match relation {
            Relation::MuchLess | Relation::AtMost => (rhs, lhs),
            Relation::MuchGreater | Relation::AtLeast => (lhs, rhs),
        };
        let ratio = if den == 0.0 && num > 0.0 { f64::INFINITY } else { num / den };
        let verdict = if ratio >= margin_factor || (!relation.is_asymptotic() && ratio >= 1.0) {
            Verdict::Satisfied
        } else if ratio >= 1.0 {
            Verdict::Marginal
        } else {
            Verdict::Violated
        };
        Self {
            name: name.to_string(),
            paper_eq: form.to_string(),
            lhs,
            rhs,
            relation,
            ratio,
            verdict,
            satisfied: verdict == Verdict::Satisfied,
        }
    }
}

/// Which localization condition applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// `|∂ₓ²F| ≪ 4|F|√(m|∂ₓF|)/ħ` holds: `k ≫ |∂ₓ²F/(8F)|·√(|∂ₓF|/(2m))`.
    WeakNonlinearity,
    /// Otherwise: `k ≫ (∂ₓ²F/(8F))²·2ħ/m`.
    StrongNonlinearity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalizationCheck {
    pub branch: Branch,
    pub branch_test: Inequality,
    pub condition: Inequality,
}

/// Whether the measurement keeps the wave packet narrow against the nonlinearity.
pub fn strong_localization(averages: &PhaseSpaceAverages, k: f64, hbar: f64, margin_factor: f64) -> LocalizationCheck {
    let a = averages;
    let m = a.mass;
    let branch_test = Inequality::new(
        "nonlinearity_branch",
        "|F''| << 4|F| sqrt(m|F'|)/hbar",
        a.force_dxx,
        Relation::MuchLess,
        4.0 * a.force * (m * a.force_dx).sqrt() / hbar,
        margin_factor,
    );
    let curvature = a.force_dxx / (8.0 * a.force);
    let (branch, condition) = if branch_test.satisfied {
        (
            Branch::WeakNonlinearity,
            Inequality::new(
                "localization",
                "k >> |F''/(8F)| sqrt(|F'|/(2m))",
                k,
                Relation::MuchGreater,
                curvature * (a.force_dx / (2.0 * m)).sqrt(),
                margin_factor,
            ),
        )
    } else {
        (
            Branch::StrongNonlinearity,
            Inequality::new(
                "localization",
                "k >> (F''/(8F))^2 2hbar/m",
                k,
                Relation::MuchGreater,
                curvature * curvature * 2.0 * hbar / m,
                margin_factor,
            ),
        )
    };
    LocalizationCheck {
        branch,
        branch_test,
        condition,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowNoiseCheck {
    /// `2|∂ₓF|/(s̄ħ) ≪ k`
    pub lower: Inequality,
    /// `k ≪ |∂ₓF|s̄/(4ħ)`
    pub upper: Inequality,
    /// The same window with `|∂ₓF|` replaced by `mλ̄²`.
    pub lyapunov_lower: Inequality,
    pub lyapunov_upper: Inequality,
    /// The window is nonempty, `s̄ > √8`.
    pub feasible: bool,
}

impl LowNoiseCheck {
    pub fn satisfied(&self) -> bool {
        self.lower.satisfied && self.upper.satisfied
    }
}

/// Whether noise on the measured trajectory is negligible. Bounds are expressed on `k`.
pub fn strong_low_noise(
    averages: &PhaseSpaceAverages,
    trajectory_scale: f64,
    k: f64,
    hbar: f64,
    lambda_bar: f64,
    margin_factor: f64,
) -> LowNoiseCheck {
    let s = trajectory_scale;
    let fx = averages.force_dx;
    let rate = 2.0 * averages.mass * lambda_bar * lambda_bar / hbar;
    LowNoiseCheck {
        lower: Inequality::new(
            "low_noise_lower",
            "2|F'|/s_bar << hbar k",
            2.0 * fx / (s * hbar),
            Relation::MuchLess,
            k,
            margin_factor,
        ),
        upper: Inequality::new(
            "low_noise_upper",
            "hbar k << |F'| s_bar/4",
            k,
            Relation::MuchLess,
            fx * s / (4.0 * hbar),
            margin_factor,
        ),
        lyapunov_lower: Inequality::new(
            "low_noise_lower_lyapunov",
            "(2m lambda^2/hbar)/s_bar << k",
            rate / s,
            Relation::MuchLess,
            k,
            margin_factor,
        ),
        lyapunov_upper: Inequality::new(
            "low_noise_upper_lyapunov",
            "k << (2m lambda^2/hbar) s_bar/8",
            k,
            Relation::MuchLess,
            rate * s / 8.0,
            margin_factor,
        ),
        feasible: s * s > 8.0,
    }
}

/// How the initial-structure parameter `ξ ∈ [1, A/ħ]` is fixed for the critical strength.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XiMode {
    /// `ξ = 1`, the most stringent choice.
    #[default]
    Min,
    /// `ξ = A/ħ`.
    Max,
}

impl XiMode {
    pub fn value(self, area_scale: f64) -> f64 {
        match self {
            XiMode::Min => 1.0,
            XiMode::Max => area_scale,
        }
    }
}

fn check_area_scale(area_scale: f64) -> Result<()> {
    if !(area_scale > 1.0) {
        return Err(Error::Domain(format!(
            "A/hbar = {area_scale} must exceed 1 for a positive logarithm"
        )));
    }
    Ok(())
}

/// `2mλ̄²/(ħ ln(ξ A/ħ))`.
pub fn k_crit_with_xi(m: f64, lambda_bar: f64, hbar: f64, area_scale: f64, xi: f64) -> Result<f64> {
    check_area_scale(area_scale)?;
    if !(xi >= 1.0) {
        return Err(Error::InvalidParameter(format!("xi must be >= 1, got {xi}")));
    }
    Ok(2.0 * m * lambda_bar * lambda_bar / (hbar * (xi * area_scale).ln()))
}

/// Strength separating the weak transition while structures still form (above)
/// from the one after structure growth saturates (below), with `ξ = 1`.
pub fn k_crit(m: f64, lambda_bar: f64, hbar: f64, area_scale: f64) -> Result<f64> {
    k_crit_with_xi(m, lambda_bar, hbar, area_scale, 1.0)
}

/// Largest strength for which the smearing area stays small: `(2mλ̄²/ħ)(A/ħ)/ln(A/ħ)`.
pub fn weak_upper_bound(m: f64, lambda_bar: f64, hbar: f64, area_scale: f64) -> Result<f64> {
    check_area_scale(area_scale)?;
    Ok(2.0 * m * lambda_bar * lambda_bar / hbar * area_scale / area_scale.ln())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakWindow {
    pub k_crit: f64,
    /// `k_crit ≲ k`
    pub lower: Inequality,
    /// `k ≪ upper bound`
    pub upper: Inequality,
}

impl WeakWindow {
    pub fn satisfied(&self) -> bool {
        self.lower.satisfied && self.upper.satisfied
    }
}

pub fn weak_window(
    m: f64,
    lambda_bar: f64,
    hbar: f64,
    area_scale: f64,
    k: f64,
    xi_mode: XiMode,
    margin_factor: f64,
) -> Result<WeakWindow> {
    let kc = k_crit_with_xi(m, lambda_bar, hbar, area_scale, xi_mode.value(area_scale))?;
    let upper = weak_upper_bound(m, lambda_bar, hbar, area_scale)?;
    Ok(WeakWindow {
        k_crit: kc,
        lower: Inequality::new(
            "weak_lower",
            "(2m lambda^2/hbar)/ln(s_tilde) <~ k",
            kc,
            Relation::AtMost,
            k,
            margin_factor,
        ),
        upper: Inequality::new(
            "weak_upper",
            "k << (2m lambda^2/hbar) s_tilde/ln(s_tilde)",
            k,
            Relation::MuchLess,
            upper,
            margin_factor,
        ),
    })
}

/// Momentum diffusion that settles at smearing area `l²`: `2mλ̄²l²/ln(ξA/l²)`.
pub fn diffusion_for_area(m: f64, lambda_bar: f64, xi: f64, area: f64, l2: f64) -> f64 {
    2.0 * m * lambda_bar * lambda_bar * l2 / (xi * area / l2).ln()
}

/// Tolerated relative residual of [`solve_l`].
pub const SOLVE_L_TOLERANCE: f64 = 1e-10;

/// Steady-state smearing length `l` for momentum diffusion `d`, restricted to
/// `l² < ξA/e` where the relation is monotone.
pub fn solve_l(d: f64, m: f64, lambda_bar: f64, xi: f64, area: f64) -> Result<f64> {
    for (what, v) in [("D", d), ("m", m), ("lambda_bar", lambda_bar), ("A", area)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{what} must be > 0, got {v}")));
        }
    }
    if !(xi >= 1.0) {
        return Err(Error::InvalidParameter(format!("xi must be >= 1, got {xi}")));
    }
    let top = xi * area / E;
    let d_max = diffusion_for_area(m, lambda_bar, xi, area, top);
    if d >= d_max {
        return Err(Error::Infeasible(format!(
            "D = {d} is at or above {d_max}, the largest diffusion with l^2 small against the accessible area"
        )));
    }
    // bisection in log l² so tiny areas resolve as well as large ones
    let (mut lo, mut hi) = (top * 1e-300, top);
    for _ in 0..2000 {
        let mid = (lo * hi).sqrt();
        if mid <= lo || mid >= hi {
            break;
        }
        if diffusion_for_area(m, lambda_bar, xi, area, mid) < d {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let l2 = if (diffusion_for_area(m, lambda_bar, xi, area, lo) - d).abs()
        <= (diffusion_for_area(m, lambda_bar, xi, area, hi) - d).abs()
    {
        lo
    } else {
        hi
    };
    let residual = (diffusion_for_area(m, lambda_bar, xi, area, l2) - d).abs() / d;
    if residual > SOLVE_L_TOLERANCE {
        return Err(Error::NonConvergence(format!("smearing length residual {residual}")));
    }
    Ok(l2.sqrt())
}

/// Length and time scales of the weak transition for one diffusion rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakScales {
    pub diffusion: f64,
    pub mass: f64,
    pub lambda_bar: f64,
    pub hbar: f64,
    pub xi: f64,
    pub area: f64,
    /// Steady-state smearing length.
    pub l: f64,
    /// Time at which diffusive smearing meets the shrinking classical structure.
    pub t_star: f64,
    /// Time after which interference fringes are washed out, `mħλ̄/D`.
    pub t_qc: f64,
}

impl WeakScales {
    /// Diffusive smearing length `√(Dt/(mλ̄))`.
    pub fn l_cl(&self, t: f64) -> f64 {
        (self.diffusion * t / (self.mass * self.lambda_bar)).sqrt()
    }

    /// Fringe wash-out length `ħ/l_cl(t)`.
    pub fn l_qu(&self, t: f64) -> f64 {
        self.hbar / self.l_cl(t)
    }

    /// Scale of classical structure `√(ξA)e^{−λ̄t}`.
    pub fn delta(&self, t: f64) -> f64 {
        (self.xi * self.area).sqrt() * (-self.lambda_bar * t).exp()
    }

    /// `l_cl(t_qc)² ≳ ħ`.
    pub fn fringe_check(&self, margin_factor: f64) -> Inequality {
        let l = self.l_cl(self.t_qc);
        Inequality::new("fringe_smearing", "l_cl^2 >~ hbar", l * l, Relation::AtLeast, self.hbar, margin_factor)
    }
}

pub fn weak_times(d: f64, m: f64, lambda_bar: f64, hbar: f64, xi: f64, area: f64) -> Result<WeakScales> {
    let l = solve_l(d, m, lambda_bar, xi, area)?;
    // ln l_cl − ln δ is increasing in t
    let gap = |t: f64| 0.5 * (d * t / (m * lambda_bar)).ln() - 0.5 * (xi * area).ln() + lambda_bar * t;
    let mut hi = 1.0 / lambda_bar;
    while gap(hi) < 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gap(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(WeakScales {
        diffusion: d,
        mass: m,
        lambda_bar,
        hbar,
        xi,
        area,
        l,
        t_star: 0.5 * (lo + hi),
        t_qc: m * hbar * lambda_bar / d,
    })
}

/// Conditions on the nominal action under which the weak transition carries the strong one with it.
pub fn weak_implies_strong(scales: &ActionScales, margin_factor: f64) -> Result<Vec<Inequality>> {
    let s = scales.nominal;
    check_area_scale(s)?;
    let ln = s.ln();
    Ok(vec![
        Inequality::new(
            "semiclassical_threshold",
            "s >> e^8",
            s,
            Relation::MuchGreater,
            semiclassical_threshold(),
            margin_factor,
        ),
        Inequality::new(
            "width_route_threshold",
            "s >> 5^7",
            s,
            Relation::MuchGreater,
            WIDTH_ROUTE_THRESHOLD,
            margin_factor,
        ),
        Inequality::new(
            "width_route_consistency",
            "1/ln(s) << s^(1/7)/ln(32 s^5 ln(s)^(-3/2))",
            1.0 / ln,
            Relation::MuchLess,
            s.powf(1.0 / 7.0) / (32.0 * s.powi(5) * ln.powf(-1.5)).ln(),
            margin_factor,
        ),
        Inequality::new(
            "localization_redundant_weak_nonlinearity",
            "s >> ln(s)/(16 sqrt 2)",
            s,
            Relation::MuchGreater,
            ln / (16.0 * SQRT_2),
            margin_factor,
        ),
        Inequality::new(
            "localization_redundant_strong_nonlinearity",
            "s >> sqrt(ln s)/8",
            s,
            Relation::MuchGreater,
            ln.sqrt() / 8.0,
            margin_factor,
        ),
    ])
}

/// Upper bounds on `k` from requiring the smearing area to confine each
/// trajectory's wave packet enough for the three strong conditions.
pub fn width_bounds(
    scales: &ActionScales,
    k: f64,
    m: f64,
    lambda_bar: f64,
    hbar: f64,
    margin_factor: f64,
) -> Result<Vec<Inequality>> {
    let s = scales.nominal;
    check_area_scale(s)?;
    let ln = s.ln();
    let rate = 2.0 * m * lambda_bar / hbar;
    Ok(vec![
        Inequality::new(
            "width_bound_localization",
            "k << (4m lambda^2/hbar) s/ln(s/2)",
            k,
            Relation::MuchLess,
            4.0 * m * lambda_bar * lambda_bar / hbar * s / (s / 2.0).ln(),
            margin_factor,
        ),
        Inequality::new(
            "width_bound_low_noise_lower",
            "k << (2m lambda/hbar) 2^(2/3) s^(1/3)/ln(2 s^4/ln s)",
            k,
            Relation::MuchLess,
            rate * 2f64.powf(2.0 / 3.0) * s.cbrt() / (2.0 * s.powi(4) / ln).ln(),
            margin_factor,
        ),
        Inequality::new(
            "width_bound_low_noise_upper",
            "k << (2m lambda/hbar) 8^(-1/7) s^(1/7)/ln(32 s^5 ln(s)^(-3/2))",
            k,
            Relation::MuchLess,
            rate * 8f64.powf(-1.0 / 7.0) * s.powf(1.0 / 7.0) / (32.0 * s.powi(5) * ln.powf(-1.5)).ln(),
            margin_factor,
        ),
    ])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegimeLabel {
    #[serde(rename = "strong+weak")]
    StrongAndWeak,
    #[serde(rename = "weak-while-structures-form")]
    WeakWhileStructuresForm,
    #[serde(rename = "weak-after-steady-state")]
    WeakAfterSteadyState,
    #[serde(rename = "noise-dominated")]
    NoiseDominated,
    #[serde(rename = "no-transition")]
    NoTransition,
    #[serde(rename = "outside-theory-domain")]
    OutsideTheoryDomain,
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RegimeLabel::StrongAndWeak => "strong+weak",
            RegimeLabel::WeakWhileStructuresForm => "weak-while-structures-form",
            RegimeLabel::WeakAfterSteadyState => "weak-after-steady-state",
            RegimeLabel::NoiseDominated => "noise-dominated",
            RegimeLabel::NoTransition => "no-transition",
            RegimeLabel::OutsideTheoryDomain => "outside-theory-domain",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub strong_localized: bool,
    pub strong_low_noise: bool,
    pub weak_window: bool,
    /// Nominal action far above `e⁸`.
    pub weak_implies_strong_semiclassical: bool,
    /// Nominal action far above `5⁷`.
    pub weak_implies_strong_width: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub label: RegimeLabel,
    pub margin_factor: f64,
    pub k: f64,
    pub hbar: f64,
    pub lambda_bar: f64,
    pub branch: Branch,
    pub verdicts: Verdicts,
    pub entries: Vec<Inequality>,
    pub averages: PhaseSpaceAverages,
    pub scales: ActionScales,
    pub k_crit: Option<f64>,
    pub weak: Option<WeakScales>,
    /// Why the weak theory does not apply, when it does not.
    pub domain_note: Option<String>,
}

impl RegimeReport {
    pub fn entry(&self, name: &str) -> Option<&Inequality> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Aligned text table of all entries.
    pub fn table(&self) -> String {
        let width = self.entries.iter().map(|e| e.name.len()).max().unwrap_or(4).max(4);
        let mut out = format!(
            "{:<width$}  {:>12}  {:>2}  {:>12}  {:>12}  {}\n",
            "name", "lhs", "", "rhs", "ratio", "verdict"
        );
        for e in &self.entries {
            out += &format!(
                "{:<width$}  {:>12.5e}  {:>2}  {:>12.5e}  {:>12.5e}  {:?}\n",
                e.name,
                e.lhs,
                e.relation.symbol(),
                e.rhs,
                e.ratio,
                e.verdict
            );
        }
        out += &format!("regime: {}\n", self.label);
        out
    }
}

/// Evaluates every inequality for one system and measurement and labels the regime.
pub fn classify(
    averages: &PhaseSpaceAverages,
    meas: &MeasurementSpec,
    scales: &ActionScales,
    lambda_bar: f64,
    xi_mode: XiMode,
    margin_factor: f64,
) -> Result<RegimeReport> {
    if !(margin_factor >= 1.0 && margin_factor.is_finite()) {
        return Err(Error::InvalidParameter(format!("margin factor must be >= 1, got {margin_factor}")));
    }
    if !(lambda_bar > 0.0 && lambda_bar.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda_bar must be > 0, got {lambda_bar}")));
    }
    let (k, hbar, m) = (meas.k, meas.hbar, averages.mass);
    let loc = strong_localization(averages, k, hbar, margin_factor);
    let low = strong_low_noise(averages, scales.trajectory_scale, k, hbar, lambda_bar, margin_factor);
    let mut entries = vec![
        loc.branch_test.clone(),
        loc.condition.clone(),
        low.lower.clone(),
        low.upper.clone(),
        low.lyapunov_lower.clone(),
        low.lyapunov_upper.clone(),
    ];
    let mut verdicts = Verdicts {
        strong_localized: loc.condition.satisfied,
        strong_low_noise: low.satisfied(),
        weak_window: false,
        weak_implies_strong_semiclassical: false,
        weak_implies_strong_width: false,
    };
    let strong = verdicts.strong_localized && verdicts.strong_low_noise;
    let mut report = RegimeReport {
        label: RegimeLabel::OutsideTheoryDomain,
        margin_factor,
        k,
        hbar,
        lambda_bar,
        branch: loc.branch,
        verdicts,
        entries: Vec::new(),
        averages: *averages,
        scales: *scales,
        k_crit: None,
        weak: None,
        domain_note: None,
    };

    let s_tilde = scales.area_scale;
    if !(s_tilde > 1.0) {
        report.domain_note = Some(format!("A/hbar = {s_tilde} is not above 1"));
        report.entries = entries;
        return Ok(report);
    }
    let window = weak_window(m, lambda_bar, hbar, s_tilde, k, xi_mode, margin_factor)?;
    entries.push(window.lower.clone());
    entries.push(window.upper.clone());
    let implied = weak_implies_strong(scales, margin_factor)?;
    verdicts.weak_window = window.satisfied();
    verdicts.weak_implies_strong_semiclassical = implied[0].satisfied;
    verdicts.weak_implies_strong_width = implied[1].satisfied;
    entries.extend(implied);
    entries.extend(width_bounds(scales, k, m, lambda_bar, hbar, margin_factor)?);
    report.k_crit = Some(window.k_crit);
    report.verdicts = verdicts;

    report.label = if k == 0.0 {
        RegimeLabel::NoTransition
    } else {
        let xi = xi_mode.value(s_tilde);
        match weak_times(meas.diffusion(), m, lambda_bar, hbar, xi, scales.area) {
            Err(Error::Infeasible(why)) => {
                report.domain_note = Some(why);
                RegimeLabel::OutsideTheoryDomain
            }
            Err(e) => return Err(e),
            Ok(weak) => {
                entries.push(weak.fringe_check(margin_factor));
                report.weak = Some(weak);
                if !window.upper.satisfied {
                    RegimeLabel::NoiseDominated
                } else if strong {
                    RegimeLabel::StrongAndWeak
                } else if window.lower.satisfied {
                    RegimeLabel::WeakWhileStructuresForm
                } else {
                    RegimeLabel::WeakAfterSteadyState
                }
            }
        }
    };
    report.entries = entries;
    Ok(report)
}
