//! Per-model defaults: window size, sliding step and synthesis ranges for the
//! four window models A-D, plus the pipeline constants.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// DFS binarization threshold applied to accumulated probability maps.
pub const ALPHA: f32 = 0.2;
/// Side of the isotropic cube every input is conformed to.
pub const CONFORM_SIDE: usize = 192;
/// Target spacing (mm) of the conforming resample.
pub const CONFORM_SPACING: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelId {
    A,
    B,
    C,
    D,
}

impl ModelId {
    pub const ALL: [ModelId; 4] = [ModelId::A, ModelId::B, ModelId::C, ModelId::D];

    pub fn row(self) -> &'static ModelRow {
        &MODEL_TABLE[self as usize]
    }
}

impl fmt::Display for ModelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self)
    }
}

impl FromStr for ModelId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(ModelId::A),
            "B" => Ok(ModelId::B),
            "C" => Ok(ModelId::C),
            "D" => Ok(ModelId::D),
            other => Err(format!("unknown model `{other}` (expected A, B, C or D)")),
        }
    }
}

/// One model's published configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelRow {
    pub window: usize,
    pub n_shapes: usize,
    /// mm
    pub shift_max: f64,
    /// degrees
    pub rot_max: f64,
    pub scale_max: f64,
    /// mm
    pub blur_sd_max: f64,
    pub noise_sd_max: f64,
    /// Sliding-window step at inference, voxels.
    pub step: usize,
}

pub const MODEL_TABLE: [ModelRow; 4] = [
    ModelRow {
        window: 128,
        n_shapes: 24,
        shift_max: 48.0,
        rot_max: 180.0,
        scale_max: 0.6,
        blur_sd_max: 0.6,
        noise_sd_max: 0.40,
        step: 64,
    },
    ModelRow {
        window: 96,
        n_shapes: 24,
        shift_max: 32.0,
        rot_max: 180.0,
        scale_max: 0.4,
        blur_sd_max: 0.4,
        noise_sd_max: 0.20,
        step: 32,
    },
    ModelRow {
        window: 64,
        n_shapes: 24,
        shift_max: 12.0,
        rot_max: 180.0,
        scale_max: 0.4,
        blur_sd_max: 0.2,
        noise_sd_max: 0.15,
        step: 32,
    },
    ModelRow {
        window: 32,
        n_shapes: 8,
        shift_max: 6.0,
        rot_max: 180.0,
        scale_max: 0.3,
        blur_sd_max: 0.1,
        noise_sd_max: 0.15,
        step: 32,
    },
];

/// Models scanning the whole volume during localization.
pub const BFS_MODELS: [ModelId; 2] = [ModelId::A, ModelId::D];
/// Models of the refinement cascade, in order.
pub const DFS_MODELS: [ModelId; 3] = [ModelId::B, ModelId::C, ModelId::D];
