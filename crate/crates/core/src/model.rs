//! Driven polynomial Hamiltonians `H = p²/2m − αx² + βx⁴ + drive(x, t)`.
//!
//! Quantum propagation, the classical Langevin integrator and the criteria
//! evaluator all pull the potential and force derivatives from here, so the
//! three sides of every comparison see exactly the same system.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How the periodic drive enters the potential.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DriveCoupling {
    /// `Λ·x·cos(ωt)`: the standard driven Duffing oscillator.
    #[default]
    LinearInX,
    /// `Λ·cos(ωt)`: a pure time-dependent energy offset, dynamically inert.
    Additive,
}

/// Fields missing from a serialized spec take their values from the chaotic
/// Duffing default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HamiltonianSpec {
    pub m: f64,
    pub alpha: f64,
    pub beta: f64,
    pub drive_amp: f64,
    pub drive_freq: f64,
    pub drive_coupling: DriveCoupling,
}

impl Default for HamiltonianSpec {
    fn default() -> Self {
        Self::chaotic_duffing()
    }
}

impl HamiltonianSpec {
    pub fn new(
        m: f64,
        alpha: f64,
        beta: f64,
        drive_amp: f64,
        drive_freq: f64,
        drive_coupling: DriveCoupling,
    ) -> Result<Self> {
        let spec = Self {
            m,
            alpha,
            beta,
            drive_amp,
            drive_freq,
            drive_coupling,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// The chaotic Duffing oscillator `(m, α, β, Λ, ω) = (1, 10, 0.5, 10, 6.07)`.
    pub fn chaotic_duffing() -> Self {
        Self {
            m: 1.0,
            alpha: 10.0,
            beta: 0.5,
            drive_amp: 10.0,
            drive_freq: 6.07,
            drive_coupling: DriveCoupling::LinearInX,
        }
    }

    /// `V = ½ m ω₀² x²`, undriven.
    pub fn harmonic(m: f64, omega0: f64) -> Self {
        Self {
            m,
            alpha: -0.5 * m * omega0 * omega0,
            beta: 0.0,
            drive_amp: 0.0,
            drive_freq: 1.0,
            drive_coupling: DriveCoupling::LinearInX,
        }
    }

    pub fn free(m: f64) -> Self {
        Self::harmonic(m, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.m,
            self.alpha,
            self.beta,
            self.drive_amp,
            self.drive_freq,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidParameter(
                "Hamiltonian parameters must be finite".into(),
            ));
        }
        if self.m <= 0.0 {
            return Err(Error::InvalidParameter(format!("mass must be > 0, got {}", self.m)));
        }
        if self.beta < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "quartic coefficient must be >= 0, got {}",
                self.beta
            )));
        }
        if self.drive_freq <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "drive frequency must be > 0, got {}",
                self.drive_freq
            )));
        }
        Ok(())
    }

    pub fn drive_period(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.drive_freq
    }

    /// Time-independent part `−αx² + βx⁴`.
    #[inline]
    pub fn static_potential(&self, x: f64) -> f64 {
        let x2 = x * x;
        -self.alpha * x2 + self.beta * x2 * x2
    }

    /// Coefficient `c(t)` of the drive: the drive term is `c(t)·x` or `c(t)`.
    #[inline]
    pub fn drive_strength(&self, t: f64) -> f64 {
        self.drive_amp * (self.drive_freq * t).cos()
    }

    #[inline]
    pub fn potential(&self, x: f64, t: f64) -> f64 {
        let drive = self.drive_strength(t);
        match self.drive_coupling {
            DriveCoupling::LinearInX => self.static_potential(x) + drive * x,
            DriveCoupling::Additive => self.static_potential(x) + drive,
        }
    }

    /// `F = −∂ₓV`.
    #[inline]
    pub fn force(&self, x: f64, t: f64) -> f64 {
        let f = 2.0 * self.alpha * x - 4.0 * self.beta * x * x * x;
        match self.drive_coupling {
            DriveCoupling::LinearInX => f - self.drive_strength(t),
            DriveCoupling::Additive => f,
        }
    }

    /// `∂ₓF`; the drive is at most linear in x so this is time independent.
    #[inline]
    pub fn force_dx(&self, x: f64) -> f64 {
        2.0 * self.alpha - 12.0 * self.beta * x * x
    }

    #[inline]
    pub fn force_dxx(&self, x: f64) -> f64 {
        -24.0 * self.beta * x
    }

    /// Classical energy `p²/2m + V(x, t)`.
    #[inline]
    pub fn energy(&self, x: f64, p: f64, t: f64) -> f64 {
        p * p / (2.0 * self.m) + self.potential(x, t)
    }

    /// Local stretching rate `λ(x) = √(|∂ₓF|/m)`.
    #[inline]
    pub fn local_lambda(&self, x: f64) -> f64 {
        (self.force_dx(x).abs() / self.m).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn duffing() -> HamiltonianSpec {
        HamiltonianSpec::chaotic_duffing()
    }

    #[test]
    fn potential_values() {
        let h = duffing();
        assert_eq!(h.potential(0.0, 0.0), 0.0);
        assert_abs_diff_eq!(h.potential(1.0, 0.0), 0.5, epsilon = 1e-12);
        let t = PI / (2.0 * h.drive_freq);
        assert_abs_diff_eq!(h.potential(2.0, t), -32.0, epsilon = 1e-12);
    }

    #[test]
    fn force_values() {
        let h = duffing();
        assert_abs_diff_eq!(h.force(1.0, 0.0), 8.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h.force(-3.0, 0.0), -16.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h.force_dx(-3.0), -34.0, epsilon = 1e-12);
        assert_abs_diff_eq!(h.force_dxx(-3.0), 36.0, epsilon = 1e-12);
    }

    #[test]
    fn additive_drive_is_inert() {
        let mut h = duffing();
        h.drive_coupling = DriveCoupling::Additive;
        let mut h0 = h;
        h0.drive_amp = 0.0;
        for &x in &[-4.0, -1.3, 0.0, 0.7, 3.2] {
            for &t in &[0.0, 0.3, 1.7, 11.0] {
                assert_eq!(h.force(x, t), h0.force(x, t));
                assert_eq!(h.force(x, t), h.force(x, 0.0));
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        use DriveCoupling::LinearInX;
        assert!(HamiltonianSpec::new(0.0, 1.0, 0.0, 0.0, 1.0, LinearInX).is_err());
        assert!(HamiltonianSpec::new(1.0, 1.0, -0.1, 0.0, 1.0, LinearInX).is_err());
        assert!(HamiltonianSpec::new(1.0, 1.0, 0.1, 0.0, 0.0, LinearInX).is_err());
        assert!(HamiltonianSpec::new(1.0, 10.0, 0.5, 10.0, 6.07, LinearInX).is_ok());
    }

    fn coupling() -> impl Strategy<Value = DriveCoupling> {
        prop_oneof![Just(DriveCoupling::LinearInX), Just(DriveCoupling::Additive)]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn force_is_minus_potential_gradient(x in -6.0f64..6.0, t in 0.0f64..20.0, c in coupling()) {
            let mut h = duffing();
            h.drive_coupling = c;
            let dx = 1e-4;
            let fd = -(h.potential(x + dx, t) - h.potential(x - dx, t)) / (2.0 * dx);
            let f = h.force(x, t);
            prop_assert!((f - fd).abs() <= 1e-6 * f.abs().max(1.0));
        }

        #[test]
        fn force_derivatives_match_differences(x in -6.0f64..6.0, t in 0.0f64..20.0) {
            let h = duffing();
            let dx = 1e-4;
            let d1 = (h.force(x + dx, t) - h.force(x - dx, t)) / (2.0 * dx);
            let d2 = (h.force_dx(x + dx) - h.force_dx(x - dx)) / (2.0 * dx);
            prop_assert!((h.force_dx(x) - d1).abs() <= 1e-6 * d1.abs().max(1.0));
            prop_assert!((h.force_dxx(x) - d2).abs() <= 1e-6 * d2.abs().max(1.0));
        }
    }
}
