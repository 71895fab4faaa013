//! Online multi-object tracking and segmentation with a Gaussian-mixture
//! PHD filter, hierarchical data association and simple affinity fusion.
//!
//! Start with [`tracker::Tracker`]; [`io`] reads detection files and frames,
//! [`eval`] scores results and [`synth`] generates test sequences.

pub mod affinity;
pub mod assignment;
pub mod config;
pub mod error;
pub mod eval;
pub mod gmphd;
pub mod io;
pub mod kcf;
pub mod mask;
pub mod synth;
pub mod tracker;
pub mod viz;

pub use config::{MergeMode, ObjectClass, Pipeline, TrackerConfig};
pub use error::{Error, Result};
pub use mask::{box_iou, mask_bbox, mask_iou, rle_decode, rle_encode, BBox, BinaryMask};
pub use tracker::{FrameResult, Segment, TrackedObject, Tracker};
