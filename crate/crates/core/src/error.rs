use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("grid cannot resolve momentum {required}: Nyquist bound is {p_max}")]
    MomentumResolution { p_max: f64, required: f64 },

    #[error("coherent state leaks {mass:e} of its probability outside the grid")]
    Truncation { mass: f64 },

    #[error("state norm collapsed to {norm:e} before renormalization (dt too large?)")]
    NormCollapse { norm: f64 },

    #[error("boundary probability {leak:e} exceeds the {limit:e} monitor limit at t = {t}")]
    BoundaryLeak { leak: f64, limit: f64, t: f64 },

    #[error("density matrix lost positivity: minimum eigenvalue {min_eigenvalue:e} at t = {t}")]
    PositivityLoss { min_eigenvalue: f64, t: f64 },

    #[error("samples escape the histogram axes (escaping fraction {fraction:e})")]
    OutOfRange { fraction: f64 },

    #[error("averages did not converge: {0}")]
    NonConvergence(String),

    #[error("zero denominator while evaluating {0}")]
    DivisionDomain(String),

    #[error("outside the domain of {0}")]
    Domain(String),

    #[error("outside weak-theory domain: {0}")]
    Infeasible(String),

    #[error("phase-space axes do not match: {0}")]
    AxisMismatch(String),

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("malformed grid dump: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Errors caused by asking for a quantity outside the region where it is defined,
    /// as opposed to the dynamics breaking an invariant at runtime.
    pub fn is_numerical_domain(&self) -> bool {
        matches!(
            self,
            Error::DivisionDomain(_)
                | Error::Domain(_)
                | Error::Infeasible(_)
                | Error::Truncation { .. }
                | Error::MomentumResolution { .. }
        )
    }

    pub fn is_parameter(&self) -> bool {
        matches!(self, Error::InvalidParameter(_))
    }
}
