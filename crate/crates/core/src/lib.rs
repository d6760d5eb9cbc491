//! Vision-only court localization from floor line markings.
//!
//! The crate covers the whole workflow: a synthetic court renderer stands in
//! for a camera, frames are reduced to sparse line-edge maps by an HSV white
//! mask plus a radial scan, a dense ReLU network regresses the robot's
//! `(x, y)` position, and Integrated Gradients explains its predictions.
//! Supporting modules reproduce the correlation analysis of the prediction
//! losses and the operation counts of standard vs. depthwise-separable
//! convolutions.

pub mod costmodel;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod image;
pub mod nn;
pub mod preprocess;
pub mod profile;
pub mod render;
pub mod stats;
pub mod xai;

mod textfmt;

pub use error::{Error, Result};
pub use geometry::{CameraRig, CourtSpec, LineMark, Pose2D, YawMode};
pub use image::ImageBuffer;
pub use nn::{AdamState, MlpModel, TrainConfig};
pub use preprocess::{PreprocessConfig, RadialScanConfig, WhiteMaskConfig};
pub use profile::Profile;
pub use render::RenderStyle;
pub use stats::CorrelationResult;

