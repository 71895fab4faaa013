use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rle decode error at byte {offset}: {reason}")]
    RleDecode { offset: usize, reason: &'static str },

    #[error("mask integrity error: {0}")]
    Integrity(String),

    #[error("dimension mismatch: {a_width}x{a_height} vs {b_width}x{b_height}")]
    DimensionMismatch {
        a_width: u32,
        a_height: u32,
        b_width: u32,
        b_height: u32,
    },

    #[error("mask is empty")]
    EmptyMask,

    #[error("invalid gaussian component: {0}")]
    InvalidComponent(String),

    #[error("innovation covariance is singular")]
    SingularCovariance,

    #[error("degenerate update: every weighted likelihood is zero")]
    DegenerateUpdate,

    #[error("degenerate box {w}x{h} for appearance model")]
    DegenerateBox { w: u32, h: u32 },

    #[error("matrix shape mismatch: {0}")]
    Shape(String),

    #[error("{}:{line}: {reason}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("frame {frame}: image {} not found", path.display())]
    MissingFrame { frame: u32, path: PathBuf },

    #[error("frame {frame}: image is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    FrameSize {
        frame: u32,
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },

    #[error("frame index {got} is not after previous frame {prev}")]
    FrameOrder { prev: u32, got: u32 },

    #[error("instance index {0} does not fit the class*1000+index id convention")]
    IdOverflow(u32),

    #[error("frame {frame}: ground-truth masks {a} and {b} overlap")]
    OverlappingGroundTruth { frame: u32, a: u32, b: u32 },

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
