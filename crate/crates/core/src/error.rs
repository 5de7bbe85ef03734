use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(
        "ramp saturation: nominal crossing {excursion:.4} V plus 4 sigma leaves the linear edge (half range {half_range:.4} V)"
    )]
    RampSaturation { excursion: f64, half_range: f64 },

    #[error("calibration range: {0}")]
    CalibrationRange(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("index {index} out of range 0..{len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("reference SET {set} is not signal-free: {diagnostic}")]
    ReferenceNotClean { set: usize, diagnostic: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("[{stage}] {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Tag an error with the pipeline stage it came from.
    pub fn at(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }
}
