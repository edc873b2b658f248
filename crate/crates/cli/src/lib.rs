//! Command-line front end: validation runs, simulation campaigns, power
//! fitting and box-ellipse plots.

pub mod commands;
pub mod config;
pub mod fsio;
pub mod plot;

/// Process exit codes.
pub mod exit {
    /// Validated by the joint-ellipse test (or command succeeded).
    pub const OK: i32 = 0;
    /// Runtime error.
    pub const ERROR: i32 = 1;
    /// Bad flags, missing input file, malformed plan or curve.
    pub const USAGE: i32 = 2;
    /// Rejected by the joint-ellipse test.
    pub const REJECTED: i32 = 3;
}

/// Error split by exit class.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Failure(anyhow::Error),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Failure(_) => exit::ERROR,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Failure(e) => write!(f, "{e:#}"),
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for CliError {
    fn from(e: E) -> Self {
        CliError::Failure(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Version string written into run manifests.
pub fn version_string() -> String {
    format!("mcjoint v{}", env!("CARGO_PKG_VERSION"))
}
