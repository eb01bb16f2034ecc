use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid sensor configuration: {0}")]
    InvalidConfig(String),

    #[error("non-finite or negative input: {0}")]
    NonFiniteInput(f64),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("dimension mismatch: {left:?} vs {right:?}")]
    DimensionMismatch { left: (u32, u32), right: (u32, u32) },

    #[error("image too small for SSIM window: {width}x{height} (minimum side {min})")]
    ImageTooSmall { width: u32, height: u32, min: u32 },

    #[error("flux map has no positive entry; no exposure can reach the target density")]
    AllZeroFlux,

    #[error("target density {0} outside (0, 1)")]
    InvalidTarget(f64),

    #[error("target density {target} unreachable; density spans [{lo}, {hi}] over the exposure bracket")]
    TargetUnreachable { target: f64, lo: f64, hi: f64 },

    #[error("count {count} saturates the detector: count * dead time >= exposure")]
    Saturated { count: f64 },

    #[error("renewal sampler exceeded iteration cap of {cap} detections")]
    IterationCap { cap: u64 },

    #[error("invalid augmentation: {0}")]
    InvalidAugment(String),

    #[error("invalid bit stack: {0}")]
    InvalidStack(String),

    #[error("no images found under {0}")]
    EmptyDataset(PathBuf),

    #[error("cannot decode image {path}: {reason}")]
    Undecodable { path: PathBuf, reason: String },

    #[error("no matching image pairs between {reference} and {test}")]
    NoMatchedPairs { reference: PathBuf, test: PathBuf },

    #[error("sample {sample_id}: {source}")]
    Sample {
        sample_id: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed manifest: {0}")]
    Manifest(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by user-supplied inputs (files, images, values)
    /// as opposed to configuration or internal faults.
    pub fn is_input_error(&self) -> bool {
        match self {
            Error::Sample { source, .. } => source.is_input_error(),
            Error::NonFiniteInput(_)
            | Error::UnsupportedFormat(_)
            | Error::DimensionMismatch { .. }
            | Error::ImageTooSmall { .. }
            | Error::AllZeroFlux
            | Error::Saturated { .. }
            | Error::InvalidStack(_)
            | Error::EmptyDataset(_)
            | Error::Undecodable { .. }
            | Error::NoMatchedPairs { .. }
            | Error::Manifest(_)
            | Error::Format { .. }
            | Error::Image(_) => true,
            Error::Io(e) => e.kind() == std::io::ErrorKind::NotFound,
            _ => false,
        }
    }

    /// True for errors caused by invalid configuration values.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::Sample { source, .. } => source.is_config_error(),
            Error::InvalidConfig(_)
            | Error::InvalidTarget(_)
            | Error::TargetUnreachable { .. }
            | Error::InvalidAugment(_)
            | Error::IterationCap { .. } => true,
            _ => false,
        }
    }
}
