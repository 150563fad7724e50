use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("scenario has no exit cells")]
    NoExit,

    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("eikonal problem has an empty zero set")]
    EmptyZeroSet,

    #[error("eikonal iteration did not converge after {sweeps} sweeps (residual {residual:e})")]
    NotConverged { sweeps: usize, residual: f64 },

    /// A walkable cell has no admissible path to any exit.
    #[error("enclosed region: cell ({i}, {j}) has no path to an exit")]
    EnclosedRegion { i: usize, j: usize },

    #[error("CFL violation: dt = {dt:e} exceeds the stable limit {limit:e}")]
    Cfl { dt: f64, limit: f64 },

    #[error("bezier parameter {0} outside [0, 1]")]
    Parameter(f64),

    #[error("degenerate design: {0}")]
    Degenerate(String),

    #[error("no feasible point found after {0} resamples")]
    NoFeasiblePoint(usize),

    #[error("infeasible starting point")]
    InfeasibleStart,

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
