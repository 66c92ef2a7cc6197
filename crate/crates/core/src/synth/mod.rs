//! Synthetic training pairs from brain label maps.
//!
//! A label map with brain structures `1..=7` is cropped around the brain,
//! spatially augmented, its background is partly replaced by random shape
//! labels, and a gray-scale image is rendered with one random intensity per
//! label followed by noise, blur, bias field and resolution loss.
//!
//! Random draws happen in a fixed order: transform parameters, shapes,
//! label intensities, corruption parameters.

mod batch;
mod image;
mod phantom;
mod shapes;
mod spatial;

use serde::{Deserialize, Serialize};

use crate::defaults::ModelId;
use crate::error::{Error, Result};
use crate::seed::Rng;
use crate::volume::{extract_window, Volume, VolumeKind};

pub use batch::{generate_batch, write_pair, LabelSource};
pub use image::{synthesize_image, ImageRecord};
pub use phantom::{make_phantom_label_map, BRAIN_LABELS};
pub use shapes::add_random_shapes;
pub use spatial::{apply_spatial, augment_spatial, sample_spatial, SpatialTransform, WARP_GRID};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthesisParams {
    pub window: usize,
    pub n_shapes: usize,
    /// Translation amplitude per axis, mm.
    pub shift_max: f64,
    /// Rotation amplitude per axis, degrees.
    pub rot_max: f64,
    /// Isotropic scale is drawn from `[1 - scale_max, 1 + scale_max]`.
    pub scale_max: f64,
    /// Gaussian blur SD upper bound, mm.
    pub blur_sd_max: f64,
    /// Additive Gaussian noise SD upper bound, intensity units.
    pub noise_sd_max: f64,
    /// Smooth displacement amplitude, mm.
    pub warp_max: f64,
    /// Upper bound of the log-amplitude of the multiplicative bias field.
    pub bias_amplitude: f64,
    pub downsample_factor_max: usize,
}

pub const DEFAULT_WARP_MAX: f64 = 3.0;
pub const DEFAULT_BIAS_AMPLITUDE: f64 = 0.3;
pub const DEFAULT_DOWNSAMPLE_MAX: usize = 2;

impl SynthesisParams {
    pub fn for_model(model: ModelId) -> Self {
        let r = model.row();
        SynthesisParams {
            window: r.window,
            n_shapes: r.n_shapes,
            shift_max: r.shift_max,
            rot_max: r.rot_max,
            scale_max: r.scale_max,
            blur_sd_max: r.blur_sd_max,
            noise_sd_max: r.noise_sd_max,
            warp_max: DEFAULT_WARP_MAX,
            bias_amplitude: DEFAULT_BIAS_AMPLITUDE,
            downsample_factor_max: DEFAULT_DOWNSAMPLE_MAX,
        }
    }

    /// No augmentation and no corruption.
    pub fn identity(window: usize) -> Self {
        SynthesisParams {
            window,
            n_shapes: 0,
            shift_max: 0.0,
            rot_max: 0.0,
            scale_max: 0.0,
            blur_sd_max: 0.0,
            noise_sd_max: 0.0,
            warp_max: 0.0,
            bias_amplitude: 0.0,
            downsample_factor_max: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 {
            return Err(Error::invalid("synthesis window must be positive"));
        }
        let maxima = [
            self.shift_max,
            self.rot_max,
            self.scale_max,
            self.blur_sd_max,
            self.noise_sd_max,
            self.warp_max,
            self.bias_amplitude,
        ];
        if maxima.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::invalid("synthesis maxima must be finite and non-negative"));
        }
        if self.scale_max >= 1.0 {
            return Err(Error::invalid("scale_max must be below 1"));
        }
        Ok(())
    }
}

/// Sampled parameters of one pair, serialized as the JSON sidecar.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub seed: Option<u64>,
    pub window: usize,
    pub transform: spatial::TransformRecord,
    pub n_shapes: usize,
    pub shape_labels_present: usize,
    pub image: ImageRecord,
    /// Fraction of the source brain volume that ends up inside the window.
    pub brain_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingPair {
    pub image: Volume,
    pub gt: Volume,
    pub record: PairRecord,
}

/// Mask of the brain labels.
pub fn brain_mask(lm: &Volume) -> Volume {
    let data = lm
        .data()
        .iter()
        .map(|&l| BRAIN_LABELS.contains(&(l as u32)) as u8 as f32)
        .collect();
    Volume::from_parts(lm.dims(), lm.spacing(), VolumeKind::Mask, data)
}

fn require_label(lm: &Volume) -> Result<()> {
    if lm.kind() != VolumeKind::Label {
        return Err(Error::invalid(format!("expected a label map, got {:?}", lm.kind())));
    }
    Ok(())
}

/// Crops or pads `lm` to `window³` with the brain centroid at the centre.
pub fn center_on_brain(lm: &Volume, window: usize) -> Volume {
    let centroid = brain_mask(lm)
        .centroid()
        .unwrap_or_else(|| lm.dims().map(|d| (d as f64 - 1.0) / 2.0));
    let half = (window as f64 - 1.0) / 2.0;
    let origin = centroid.map(|c| (c - half).round() as i64);
    extract_window(lm, origin, [window; 3])
}

pub fn make_training_pair(lm: &Volume, p: &SynthesisParams, rng: &mut Rng) -> Result<TrainingPair> {
    require_label(lm)?;
    p.validate()?;
    let source_brain = brain_mask(lm).count_nonzero();
    let centered = center_on_brain(lm, p.window);

    let transform = sample_spatial(p, rng);
    let augmented = apply_spatial(&centered, &transform);
    let with_shapes = add_random_shapes(&augmented, p.n_shapes, rng)?;
    let (image, image_record) = synthesize_image(&with_shapes, p, rng)?;

    let gt = brain_mask(&augmented);
    let inside = gt.count_nonzero();
    let expected = source_brain as f64 * transform.scale.powi(3);
    let brain_fraction = if inside == 0 || expected == 0.0 {
        0.0
    } else {
        (inside as f64 / expected).min(1.0)
    };
    let shape_labels_present = {
        let mut seen = vec![false; p.n_shapes];
        for &l in with_shapes.data() {
            let l = l as usize;
            if l >= 8 && l < 8 + p.n_shapes {
                seen[l - 8] = true;
            }
        }
        seen.into_iter().filter(|&s| s).count()
    };

    Ok(TrainingPair {
        image,
        gt,
        record: PairRecord {
            seed: None,
            window: p.window,
            transform: transform.record(),
            n_shapes: p.n_shapes,
            shape_labels_present,
            image: image_record,
            brain_fraction,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;

    #[test]
    fn table_defaults_load() {
        let a = SynthesisParams::for_model(ModelId::A);
        assert_eq!(
            (a.window, a.n_shapes, a.shift_max, a.rot_max, a.scale_max, a.blur_sd_max, a.noise_sd_max),
            (128, 24, 48.0, 180.0, 0.6, 0.6, 0.40)
        );
        let d = SynthesisParams::for_model(ModelId::D);
        assert_eq!((d.window, d.n_shapes, d.shift_max, d.scale_max), (32, 8, 6.0, 0.3));
        assert!(a.validate().is_ok());
    }

    #[test]
    fn identity_pair_is_centered_phantom() {
        let lm = make_phantom_label_map(&mut rng_from(4), [64; 3]).unwrap();
        let p = SynthesisParams::identity(64);
        let pair = make_training_pair(&lm, &p, &mut rng_from(9)).unwrap();
        let expect = brain_mask(&center_on_brain(&lm, 64));
        assert_eq!(pair.gt, expect);
        assert_eq!(pair.record.brain_fraction, 1.0);
        // piecewise constant: one intensity per label
        let mut seen = std::collections::HashMap::new();
        let centered = center_on_brain(&lm, 64);
        for (&l, &v) in centered.data().iter().zip(pair.image.data()) {
            let e = seen.entry(l as u32).or_insert(v);
            assert_eq!(*e, v);
        }
    }

    #[test]
    fn model_d_pair_shape() {
        let lm = make_phantom_label_map(&mut rng_from(1), [96; 3]).unwrap();
        let p = SynthesisParams::for_model(ModelId::D);
        let pair = make_training_pair(&lm, &p, &mut rng_from(2)).unwrap();
        assert_eq!(pair.image.dims(), [32; 3]);
        assert_eq!(pair.gt.dims(), [32; 3]);
        let (lo, hi) = pair.image.min_max();
        assert!(lo >= 0.0 && hi <= 1.0);
    }

    #[test]
    fn pairs_are_deterministic() {
        let lm = make_phantom_label_map(&mut rng_from(3), [80; 3]).unwrap();
        let p = SynthesisParams::for_model(ModelId::C);
        let a = make_training_pair(&lm, &p, &mut rng_from(17)).unwrap();
        let b = make_training_pair(&lm, &p, &mut rng_from(17)).unwrap();
        assert_eq!(a.image, b.image);
        assert_eq!(a.gt, b.gt);
        assert_eq!(a.record, b.record);
    }

    #[test]
    fn rejects_non_label_input() {
        let v = Volume::zeros([32; 3], [1.0; 3], VolumeKind::Intensity).unwrap();
        assert!(make_training_pair(&v, &SynthesisParams::identity(32), &mut rng_from(0)).is_err());
    }
}
