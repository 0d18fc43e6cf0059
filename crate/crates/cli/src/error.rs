use serde::Serialize;
use thiserror::Error;

/// Everything a command can fail with, mapped onto the process exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] qct_core::Error),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DOMAIN: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

#[derive(Debug, Serialize)]
struct ErrorReport<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Core(e) if e.is_parameter() => EXIT_CONFIG,
            CliError::Core(e) if e.is_numerical_domain() => EXIT_DOMAIN,
            CliError::Core(_) => EXIT_INVARIANT,
            CliError::Io(_) => EXIT_IO,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            EXIT_CONFIG => "config",
            EXIT_DOMAIN => "numerical-domain",
            EXIT_INVARIANT => "invariant-violation",
            _ => "io",
        }
    }

    /// One-line JSON message for stderr.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&ErrorReport {
            error: self.kind(),
            message: self.to_string(),
            exit_code: self.exit_code(),
        })
        .expect("plain struct serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use qct_core::Error;

    #[test]
    fn exit_codes_follow_error_class() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::from(Error::InvalidParameter("x".into())).exit_code(), 2);
        assert_eq!(CliError::from(Error::Infeasible("x".into())).exit_code(), 3);
        assert_eq!(CliError::from(Error::DivisionDomain("x".into())).exit_code(), 3);
        assert_eq!(CliError::from(Error::NormCollapse { norm: 0.0 }).exit_code(), 4);
        assert_eq!(
            CliError::from(Error::PositivityLoss {
                min_eigenvalue: -1.0,
                t: 0.0
            })
            .exit_code(),
            4
        );
        assert_eq!(CliError::from(std::io::Error::other("disk")).exit_code(), 1);
    }

    #[test]
    fn json_report_is_parseable() {
        let e = CliError::from(Error::Infeasible("D too large".into()));
        let v: serde_json::Value = serde_json::from_str(&e.to_json()).unwrap();
        assert_eq!(v["error"], "numerical-domain");
        assert_eq!(v["exit_code"], 3);
        assert!(v["message"].as_str().unwrap().contains("D too large"));
    }
}
