use std::path::PathBuf;

use crate::geometry::Vec3;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ray does not intersect the trajectory cylinder (direction is vertical)")]
    NoIntersection,

    #[error("point ({:.3}, {:.3}, {:.3}) lies outside the room: {context}", point.x, point.y, point.z)]
    OutsideRoom { point: Vec3, context: String },

    #[error("insufficient decay: energy decay curve never reaches {target_db} dB (floor {reached_db:.1} dB)")]
    InsufficientDecay { target_db: f64, reached_db: f64 },

    #[error("infeasible room: Sabine absorption {absorption:.4} >= 1 for rt60 {rt60} s")]
    InfeasibleRoom { absorption: f64, rt60: f64 },

    #[error("rir #{index}: {source}")]
    AtRir {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("scheduling failed after {attempts} attempts: {reason}")]
    SchedulingFailure { attempts: usize, reason: String },

    #[error("need at least {needed} rooms for disjoint folds, found {found}")]
    InsufficientRooms { needed: usize, found: usize },

    #[error("metrics undefined: reference contains no events")]
    UndefinedMetrics,

    #[error("{}:{line}: {msg}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("manifest {}: {msg}", path.display())]
    Manifest { path: PathBuf, msg: String },

    #[error("integrity check failed for {}: expected {expected}, got {actual}", path.display())]
    Integrity {
        path: PathBuf,
        expected: String,
        actual: String,
    },

    #[error("{}: {source}", path.display())]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid room spec: {0}")]
    Spec(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the command line front end.
    ///
    /// 2 input/config, 3 insufficient data, 4 infeasible physics, 5 scheduling.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::AtRir { source, .. } => source.exit_code(),
            Error::InsufficientDecay { .. } | Error::UndefinedMetrics => 3,
            Error::InfeasibleRoom { .. } | Error::OutsideRoom { .. } | Error::NoIntersection => 4,
            Error::SchedulingFailure { .. } => 5,
            _ => 2,
        }
    }
}
