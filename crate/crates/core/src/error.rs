use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An input lies outside the domain of a hydraulic relation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Head is below the minimum generating head; the caller must idle or stop the turbines.
    #[error("turbine gated off: |head| = {head_m} m is below the minimum generating head {h_mt_m} m")]
    TurbineGated { head_m: f64, h_mt_m: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite {what} at t = {t_s} s")]
    NonFinite { what: &'static str, t_s: f64 },

    #[error("tide gap of {gap_s} s between t = {start_s} s and t = {end_s} s exceeds the interpolation tolerance of {tolerance_s} s")]
    TideGap { start_s: f64, end_s: f64, gap_s: f64, tolerance_s: f64 },

    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("segmentation failed: {0}")]
    Segmentation(String),

    #[error("training diverged: {0}")]
    Divergence(String),

    #[error("checkpoint format version {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("{context}: {source}")]
    Io { context: String, #[source] source: std::io::Error },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io { context: context.into(), source }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), line, message: message.into() }
    }
}
