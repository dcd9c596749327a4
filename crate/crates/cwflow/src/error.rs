use std::fmt;

use cwflow_core::Error;

/// Failure classes of the binary, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags or configuration (exit 2).
    Usage(String),
    /// A numerical routine failed (exit 3).
    Numerical(String),
    /// Too few Monte Carlo paths were accepted (exit 4).
    Acceptance(String),
    /// Reading or writing files (exit 1).
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Acceptance(_) => 4,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Acceptance(m) => write!(f, "insufficient acceptance: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

fn flag_for(what: &str) -> String {
    let name = what.split(" (").next().unwrap_or(what);
    match name {
        "beta" | "beta_prime" | "t" | "t_max" | "n" | "window" => format!("--{}", name.replace('_', "-")),
        "magnetization" | "initial magnetization" => "--m / --m0 / --m-prime".into(),
        "transport grid" => "--grid".into(),
        other => other.into(),
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain { what, .. } | Error::Range { what, .. } => {
                CliError::Usage(format!("{e} (flag {})", flag_for(what)))
            }
            Error::OutOfRegime(_) => CliError::Usage(e.to_string()),
            Error::InsufficientAcceptance { .. } => CliError::Acceptance(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
