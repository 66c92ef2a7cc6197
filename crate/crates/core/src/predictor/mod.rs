//! Predictors map a cubic `w³` patch to a same-size probability patch.
//!
//! Every backend receives the patch origin in full-volume voxel coordinates
//! alongside the intensities; oracles need it to look up ground truth and the
//! noisy oracle keys its randomness on it.

mod external;
mod oracle;
pub mod protocol;

use std::sync::Arc;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Volume, VolumeKind};

pub use external::ExternalPredictor;
pub use oracle::{ConstantPredictor, NoisyOraclePredictor, OraclePredictor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Oracle,
    NoisyOracle,
    External,
    Constant,
}

/// A predictor implementation. Returns `w³` values in the crate's linear order.
pub trait Backend: Send + Sync {
    fn kind(&self) -> BackendKind;

    fn predict(&self, patch: &Volume, origin: [i64; 3]) -> std::result::Result<Vec<f32>, String>;
}

/// Corruption applied by the noisy oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseSpec {
    /// Expected number of spherical false-positive blobs per patch.
    pub fp_blob_rate: f64,
    /// Blob radius range in voxels, sampled uniformly.
    pub fp_blob_radius: [f64; 2],
    /// Expected number of spherical deletion holes per patch.
    pub fn_hole_rate: f64,
    /// Probability that a ground-truth negative voxel is reported positive.
    pub per_voxel_fp: f64,
    pub seed_offset: u64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            fp_blob_rate: 0.0,
            fp_blob_radius: [2.0, 6.0],
            fn_hole_rate: 0.0,
            per_voxel_fp: 0.0,
            seed_offset: 0,
        }
    }
}

impl NoiseSpec {
    pub fn per_voxel(p: f64) -> Self {
        NoiseSpec {
            per_voxel_fp: p,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite_nonneg = |x: f64| x.is_finite() && x >= 0.0;
        if !finite_nonneg(self.fp_blob_rate) || !finite_nonneg(self.fn_hole_rate) {
            return Err(Error::invalid("noise rates must be finite and non-negative"));
        }
        if !(0.0..1.0).contains(&self.per_voxel_fp) {
            return Err(Error::invalid(format!(
                "per_voxel_fp must be in [0, 1), got {}",
                self.per_voxel_fp
            )));
        }
        let [lo, hi] = self.fp_blob_radius;
        if !(finite_nonneg(lo) && finite_nonneg(hi) && lo <= hi) {
            return Err(Error::invalid(format!("invalid blob radius range {:?}", self.fp_blob_radius)));
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.fp_blob_rate == 0.0 && self.fn_hole_rate == 0.0 && self.per_voxel_fp == 0.0
    }
}

/// A named predictor bound to one window size. Cheap to clone and share
/// across threads.
#[derive(Clone)]
pub struct PredictorHandle {
    id: String,
    window: usize,
    backend: Arc<dyn Backend>,
}

impl std::fmt::Debug for PredictorHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PredictorHandle")
            .field("id", &self.id)
            .field("window", &self.window)
            .field("backend", &self.backend.kind())
            .finish()
    }
}

impl PredictorHandle {
    pub fn new(id: impl Into<String>, window: usize, backend: Arc<dyn Backend>) -> Result<Self> {
        if window == 0 {
            return Err(Error::invalid("predictor window must be positive"));
        }
        Ok(PredictorHandle {
            id: id.into(),
            window,
            backend,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn backend_kind(&self) -> BackendKind {
        self.backend.kind()
    }

    /// Renames the handle (model ids are assigned by the stage that uses it).
    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    /// Runs the backend on one patch. Output values are clamped to `[0, 1]`.
    pub fn predict(&self, patch: &Volume, origin: [i64; 3]) -> Result<Volume> {
        let w = self.window;
        let fail = |message: String| Error::Predictor {
            model: self.id.clone(),
            origin,
            message,
        };
        if patch.dims() != [w; 3] {
            return Err(fail(format!("patch dims {:?} do not match window {w}", patch.dims())));
        }
        let mut out = self.backend.predict(patch, origin).map_err(&fail)?;
        if out.len() != w * w * w {
            return Err(fail(format!("backend returned {} values, expected {}", out.len(), w * w * w)));
        }
        for v in &mut out {
            if v.is_nan() {
                return Err(fail("backend returned NaN".into()));
            }
            *v = v.clamp(0.0, 1.0);
        }
        Ok(Volume::from_parts([w; 3], patch.spacing(), VolumeKind::Probability, out))
    }
}

fn require_gt(gt: &Volume) -> Result<()> {
    if gt.kind() != VolumeKind::Mask {
        return Err(Error::invalid(format!("oracle ground truth must be a mask, got {:?}", gt.kind())));
    }
    Ok(())
}

/// Perfect predictor returning the ground truth under each window.
pub fn make_oracle(gt: Arc<Volume>, w: usize) -> Result<PredictorHandle> {
    require_gt(&gt)?;
    PredictorHandle::new("oracle", w, Arc::new(OraclePredictor::new(gt, w)))
}

/// Oracle corrupted by seeded false-positive blobs, per-voxel flips and
/// deletion holes. Streams for different `model_seed`s are independent.
pub fn make_noisy_oracle(
    gt: Arc<Volume>,
    w: usize,
    noise: NoiseSpec,
    model_seed: u64,
) -> Result<PredictorHandle> {
    require_gt(&gt)?;
    noise.validate()?;
    PredictorHandle::new(
        "noisy_oracle",
        w,
        Arc::new(NoisyOraclePredictor::new(gt, w, noise, model_seed)),
    )
}

/// Predictor that returns `value` everywhere.
pub fn make_constant(value: f32, w: usize) -> Result<PredictorHandle> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::invalid(format!("constant output {value} outside [0, 1]")));
    }
    PredictorHandle::new("constant", w, Arc::new(ConstantPredictor { value, window: w }))
}

/// Spawns `command` and speaks the binary predictor protocol with it.
pub fn make_external(command: &[String], w: usize, timeout: Duration) -> Result<PredictorHandle> {
    let backend = ExternalPredictor::spawn(command, w, timeout)?;
    PredictorHandle::new("external", w, Arc::new(backend))
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Wild;
    impl Backend for Wild {
        fn kind(&self) -> BackendKind {
            BackendKind::Constant
        }
        fn predict(&self, patch: &Volume, _: [i64; 3]) -> std::result::Result<Vec<f32>, String> {
            Ok((0..patch.len()).map(|i| if i % 2 == 0 { -3.0 } else { 7.0 }).collect())
        }
    }

    #[test]
    fn output_is_clamped_and_dims_checked() {
        let h = PredictorHandle::new("wild", 4, Arc::new(Wild)).unwrap();
        let patch = Volume::zeros([4; 3], [1.0; 3], VolumeKind::Intensity).unwrap();
        let out = h.predict(&patch, [0; 3]).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0 || v == 1.0));
        let wrong = Volume::zeros([5; 3], [1.0; 3], VolumeKind::Intensity).unwrap();
        let err = h.predict(&wrong, [1, 2, 3]).unwrap_err();
        assert!(matches!(err, Error::Predictor { origin: [1, 2, 3], .. }));
    }

    #[test]
    fn noise_spec_validation() {
        assert!(NoiseSpec::per_voxel(1.0).validate().is_err());
        assert!(NoiseSpec::per_voxel(0.1).validate().is_ok());
        let bad = NoiseSpec {
            fp_blob_rate: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(make_constant(1.5, 8).is_err());
    }
}
