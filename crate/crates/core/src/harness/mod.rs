//! Everything around the core model: file formats, datasets, the synthetic
//! ground-truth generator, checkpoints, evaluation and the command line.

pub mod camera_json;
pub mod checkpoint;
pub mod cli;
pub mod dataset;
pub mod eval;
pub mod io;
pub mod pfm;
pub mod ppm;
pub mod synth;

pub use dataset::{Dataset, DatasetView};
pub use eval::{evaluate, EvalReport};
pub use synth::{synthesize, SceneKind, SynthSpec, Texture};
