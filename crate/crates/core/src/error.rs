use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("the zero vector does not define a ray")]
    ZeroRay,

    #[error("{what} = {value} is outside {range}")]
    Domain {
        what: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("row {row}: {msg}")]
    Parse { row: usize, msg: String },

    #[error("data validation failed: {0}")]
    Validation(String),

    #[error("cannot estimate probabilities: {0}")]
    Estimation(String),

    #[error("unknown state {0:?} (expected GHZ, W, beta, eta or prod)")]
    UnknownState(String),

    #[error(
        "no grid point reaches epsilon {target:.4} within [{lo:.4}, {hi:.4}] with F_GHZ in range; \
         nearest point has epsilon {nearest_epsilon:.4}, F_GHZ {nearest_fidelity:.4}"
    )]
    CalibrationInfeasible {
        target: f64,
        lo: f64,
        hi: f64,
        nearest_epsilon: f64,
        nearest_fidelity: f64,
    },

    #[error("noise calibration not found at {0}; run `ks8 calibrate` first")]
    MissingCalibration(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
