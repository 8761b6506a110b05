//! Error type shared by all modules.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Shape or dimension contract violated by the caller.
    Dimension { op: &'static str, detail: String },
    /// Exactly singular pivot during factorization.
    SingularMatrix { op: &'static str },
    /// Iterative method hit its iteration cap; carries the final residual.
    NonConvergence {
        op: &'static str,
        iterations: usize,
        residual: f64,
    },
    /// A non-finite value appeared where finite data is required.
    NonFinite { op: &'static str, detail: String },
    /// Scalar argument outside its admissible range.
    InvalidArgument { op: &'static str, detail: String },
    /// Parameter vector outside the problem's parameter box.
    OutOfDomain { detail: String },
    /// Snapshot set ran out of rank before the requested basis size.
    RankDeficient { requested: usize, achievable: usize },
    /// Training aborted (e.g. too many regularized reduced solves in one epoch).
    Training(String),
    /// A pipeline stage failed; carries the stage context.
    Pipeline(String),
    /// Bad configuration file or CLI usage.
    Config(String),
    /// A required artifact file is absent.
    MissingArtifact(String),
    /// Filesystem failure while reading or writing artifacts.
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Dimension { op, detail } => write!(f, "{op}: dimension mismatch: {detail}"),
            Error::SingularMatrix { op } => write!(f, "{op}: matrix is singular"),
            Error::NonConvergence {
                op,
                iterations,
                residual,
            } => write!(
                f,
                "{op}: no convergence after {iterations} iterations (residual {residual:.3e})"
            ),
            Error::NonFinite { op, detail } => write!(f, "{op}: non-finite value: {detail}"),
            Error::InvalidArgument { op, detail } => write!(f, "{op}: invalid argument: {detail}"),
            Error::OutOfDomain { detail } => write!(f, "parameter outside domain: {detail}"),
            Error::RankDeficient {
                requested,
                achievable,
            } => write!(
                f,
                "rank deficient: requested {requested} modes, only {achievable} available"
            ),
            Error::Training(detail) => write!(f, "training aborted: {detail}"),
            Error::Pipeline(detail) => write!(f, "pipeline failure: {detail}"),
            Error::Config(detail) => write!(f, "configuration error: {detail}"),
            Error::MissingArtifact(path) => write!(f, "missing artifact: {path}"),
            Error::Io(detail) => write!(f, "i/o error: {detail}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Process exit code for the CLI: 2 config, 3 numerical, 4 missing artifact.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument { .. } => 2,
            Error::MissingArtifact(_) | Error::Io(_) => 4,
            _ => 3,
        }
    }
}
