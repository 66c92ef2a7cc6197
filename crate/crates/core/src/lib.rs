//! Multi-scale sliding-window brain extraction.
//!
//! A breadth search with coarse and fine window models localizes a region of
//! interest; a cascade of progressively smaller windows then refines it, and
//! the per-stage masks are fused by voxel-wise majority vote. Predictors are
//! pluggable (see [`predictor`]), so the cascade can be exercised with
//! ground-truth oracles, noisy oracles, or trained networks running in an
//! external process. [`synth`] generates the randomized training pairs the
//! window models are meant to be trained on.

pub mod cascade;
pub mod config;
pub mod defaults;
pub mod error;
pub mod metrics;
pub mod morphology;
pub mod nifti;
pub mod predictor;
pub mod seed;
pub mod simulate;
pub mod synth;
pub mod volume;
pub mod windowing;

pub use error::{Error, Result};
pub use volume::{BoundingBox, Interpolation, Volume, VolumeKind};
