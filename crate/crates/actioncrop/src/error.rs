use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("frames disagree in size: {first_w}x{first_h} vs {other_w}x{other_h} ({path})")]
    MixedDimensions {
        first_w: u32,
        first_h: u32,
        other_w: u32,
        other_h: u32,
        path: PathBuf,
    },

    #[error("sequence has {found} frame(s), at least 2 required")]
    TooFewFrames { found: usize },

    #[error("failed to decode {path}: {reason}")]
    DecodeError { path: PathBuf, reason: String },

    #[error("frame dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),

    #[error("fewer than 2 distinct feature points, cannot cluster")]
    SingleClusterError,

    #[error("all cluster masks empty after cleaning")]
    AllMasksEmpty,

    #[error("no interior cluster component found")]
    NoInteriorC3,

    #[error("track is empty")]
    EmptyTrack,

    #[error("patch (x={x}, y={y}, d={d}) out of bounds for {w}x{h} frame")]
    PatchOutOfBounds { x: f64, y: f64, d: f64, w: u32, h: u32 },

    #[error("track lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("subject escapes frame at t={t}")]
    SubjectEscapesFrame { t: usize },

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad manifest {path}: {reason}")]
    BadManifest { path: PathBuf, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;
