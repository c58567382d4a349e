//! LUT-realizable image restoration with rotation-ensemble fusion.
//!
//! Small-kernel lookup tables are queried under the four quarter-turn
//! rotations of their input patch, and the inverse-rotated predictions are
//! fused by average pooling, generalized median pooling (a softmin around
//! the cross-orientation mean) or orientation-aware pooling (per-patch
//! weights from a tiny coefficient table). Tables can be baked from
//! oracles or trained directly through their interpolated queries.

pub mod harness;
pub mod image;
pub mod lut;
pub mod metrics;
pub mod orientation;
pub mod par;
pub mod pipeline;
pub mod pooling;
pub mod training;

pub use image::ImageBuffer;
pub use par::Execution;
