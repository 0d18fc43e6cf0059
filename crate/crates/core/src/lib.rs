//! Simulation and analysis of the quantum-to-classical transition for a
//! continuously position-measured particle in one dimension.
//!
//! * [`model`]: driven polynomial Hamiltonians shared by every other module.
//! * [`qstate`]: wave functions on a grid, moments, Wigner transform, grid dumps.
//! * [`qdyn`]: conditioned (measured) evolution, ensemble averages, a Lindblad oracle.
//! * [`cdyn`]: classical Langevin ensembles, histograms, Lyapunov exponents.
//! * [`criteria`]: strong and weak classicality inequalities and regime classification.
//! * [`compare`]: distances between quantum and classical densities, trajectory noise.

pub mod cdyn;
pub mod compare;
pub mod criteria;
pub mod error;
pub mod model;
pub mod qdyn;
pub mod qstate;

pub use error::{Error, Result};
