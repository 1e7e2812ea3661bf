use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the alignment library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unsupported or corrupt image: {0}")]
    Format(String),
    #[error("invalid image dimensions {width}x{height}")]
    Dimensions { width: usize, height: usize },
    #[error("sample ({x}, {y}) outside the image domain")]
    OutOfDomain { x: f64, y: f64 },
    #[error("image too small: {0}")]
    TooSmall(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("pixel ({x}, {y}) lies on the descriptor border")]
    Border { x: usize, y: usize },
    #[error("degenerate warp: {0}")]
    DegenerateWarp(String),
    #[error("warp model mismatch: expected {expected}, got {actual}")]
    ModelMismatch {
        expected: &'static str,
        actual: &'static str,
    },
    #[error("invalid parameter count {actual} for {model} (expected {expected})")]
    ParamCount {
        model: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("degenerate template (zero Hessian)")]
    DegenerateTemplate,
    #[error("rank-deficient system")]
    RankDeficient,
    #[error("insufficient overlap: {valid:.3} of template pixels valid")]
    InsufficientOverlap { valid: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
