//! Gaussian-splatting refinement of per-view depth maps.
//!
//! Every Gaussian is anchored to a pixel of the view it was initialized
//! from: its world position is the back-projection of that pixel, moved by
//! at most half a pixel, at a learned log-depth. Position therefore has one
//! free direction (along the ray) instead of three, and the rendered depth
//! can be tied back to the per-view depth map through a visibility term.
//!
//! The crate provides the model ([`scene`]), a CPU rasterizer with an
//! analytic backward pass ([`rasterizer`]), losses and schedules
//! ([`losses`]), the optimizer loop ([`training`]), evaluation metrics
//! ([`metrics`]) and file formats plus a synthetic ground-truth generator
//! ([`harness`]).

pub mod error;
pub mod geometry;
pub mod gradcheck;
pub mod harness;
pub mod image;
pub mod losses;
pub mod metrics;
pub mod rasterizer;
pub mod scenarios;
pub mod scene;
pub mod ssim;
pub mod training;

pub use error::{Error, Result};
pub use geometry::{Camera, PixelCoord, Pose};
pub use image::{RgbImage, ScalarMap};
pub use rasterizer::{render, render_backward, DepthMode, RenderOutput, RenderSettings};
pub use scene::{MaterializedGaussian, Scene, SceneView, ViewParameters};
pub use training::{train, Quiet, TrainConfig};
