//! Subject-centered square video retargeting.
//!
//! The pipeline localizes a square patch of focused action in every frame
//! (dense optical flow, motion clustering, connected-component selection),
//! then fits a piecewise Bezier curve through temporally cohesive pivot
//! frames to remove viewpoint jitter, and finally crops the video along
//! the smoothed track.

pub mod error;
pub mod evalharness;
pub mod localize;
pub mod motionseg;
pub mod opticalflow;
pub mod pipeline;
pub mod retarget;
pub mod temporal;
pub mod videoio;

pub use error::{Error, Result};
