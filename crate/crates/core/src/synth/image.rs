use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SynthesisParams;
use crate::error::{Error, Result};
use crate::seed::Rng;
use crate::volume::{minmax_normalize, resample, resample_to_grid, Interpolation, Volume, VolumeKind};

const BIAS_GRID: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageRecord {
    /// Mean intensity drawn for each label value `0..=max_label`.
    pub label_intensities: Vec<f32>,
    pub noise_sd: f64,
    pub blur_sd_mm: f64,
    pub bias_amplitude: f64,
    pub downsample_factor: usize,
    /// Range before the final min-max normalization.
    pub raw_min: f32,
    pub raw_max: f32,
}

/// Renders a gray-scale image from a label map: one uniform random intensity
/// per label, then additive Gaussian noise, Gaussian blur, a smooth
/// multiplicative bias field, down/up-sampling, and min-max normalization.
pub fn synthesize_image(lm: &Volume, p: &SynthesisParams, rng: &mut Rng) -> Result<(Volume, ImageRecord)> {
    if lm.kind() != VolumeKind::Label {
        return Err(Error::invalid("image synthesis needs a label map"));
    }
    let max_label = lm.data().iter().fold(0.0f32, |m, &v| m.max(v)) as usize;
    let label_intensities: Vec<f32> = (0..=max_label).map(|_| rng.random::<f32>()).collect();
    let noise_sd = rng.random::<f64>() * p.noise_sd_max;
    let blur_sd_mm = rng.random::<f64>() * p.blur_sd_max;
    let bias_amplitude = rng.random::<f64>() * p.bias_amplitude;
    let downsample_factor = rng.random_range(1..=p.downsample_factor_max.max(1));
    let bias: Vec<f64> = (0..BIAS_GRID.pow(3))
        .map(|_| StandardNormal.sample(rng))
        .map(|z: f64| z * bias_amplitude)
        .collect();

    let mut data: Vec<f32> = lm.data().iter().map(|&l| label_intensities[l as usize]).collect();
    if noise_sd > 0.0 {
        let normal = Normal::new(0.0, noise_sd).map_err(|e| Error::invalid(e.to_string()))?;
        for v in data.iter_mut() {
            *v += normal.sample(rng) as f32;
        }
    }
    let mut img = Volume::from_vec(lm.dims(), lm.spacing(), VolumeKind::Intensity, data)?;
    if blur_sd_mm > 0.0 {
        img = gaussian_blur(&img, blur_sd_mm);
    }
    if bias_amplitude > 0.0 {
        img = apply_bias(&img, &bias);
    }
    if downsample_factor > 1 {
        let coarse = lm.spacing().map(|s| s * downsample_factor as f64);
        let low = resample(&img, coarse, Interpolation::Linear)?;
        img = resample_to_grid(&low, lm.dims(), lm.spacing(), Interpolation::Linear)?;
    }
    let (raw_min, raw_max) = img.min_max();
    let record = ImageRecord {
        label_intensities,
        noise_sd,
        blur_sd_mm,
        bias_amplitude,
        downsample_factor,
        raw_min,
        raw_max,
    };
    Ok((minmax_normalize(&img), record))
}

fn gaussian_kernel(sd: f64) -> Vec<f64> {
    let radius = (3.0 * sd).ceil().max(1.0) as i64;
    let w: Vec<f64> = (-radius..=radius).map(|x| (-(x * x) as f64 / (2.0 * sd * sd)).exp()).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

/// Separable Gaussian blur, `sd_mm` converted per axis; edges are clamped.
pub fn gaussian_blur(vol: &Volume, sd_mm: f64) -> Volume {
    let dims = vol.dims();
    let mut data = vol.data().to_vec();
    for axis in 0..3 {
        let sd = sd_mm / vol.spacing()[axis];
        if sd < 1e-3 {
            continue;
        }
        let kernel = gaussian_kernel(sd);
        let r = (kernel.len() / 2) as i64;
        let stride = match axis {
            0 => dims[1] * dims[2],
            1 => dims[2],
            _ => 1,
        };
        let n = dims[axis] as i64;
        let src = data.clone();
        data.par_iter_mut().enumerate().for_each(|(idx, out)| {
            let pos = (idx / stride) as i64 % n;
            let base = idx as i64 - pos * stride as i64;
            let mut acc = 0.0f64;
            for (t, w) in kernel.iter().enumerate() {
                let q = (pos + t as i64 - r).clamp(0, n - 1);
                acc += w * src[(base + q * stride as i64) as usize] as f64;
            }
            *out = acc as f32;
        });
    }
    Volume::from_parts(dims, vol.spacing(), vol.kind(), data)
}

/// Multiplies by `exp(b)`, `b` trilinearly interpolated from a coarse grid.
fn apply_bias(vol: &Volume, grid: &[f64]) -> Volume {
    let dims = vol.dims();
    let g = BIAS_GRID;
    let taps: Vec<Vec<(usize, f64)>> = dims
        .iter()
        .map(|&d| {
            (0..d)
                .map(|x| {
                    let pos = if d > 1 { x as f64 * (g - 1) as f64 / (d - 1) as f64 } else { 0.0 };
                    let lo = (pos.floor() as usize).min(g - 2);
                    (lo, pos - lo as f64)
                })
                .collect()
        })
        .collect();
    Volume::from_fn(dims, vol.spacing(), vol.kind(), |i, j, k| {
        let (ti, tj, tk) = (taps[0][i], taps[1][j], taps[2][k]);
        let mut b = 0.0;
        for (di, wi) in [(0, 1.0 - ti.1), (1, ti.1)] {
            for (dj, wj) in [(0, 1.0 - tj.1), (1, tj.1)] {
                for (dk, wk) in [(0, 1.0 - tk.1), (1, tk.1)] {
                    b += wi * wj * wk * grid[((ti.0 + di) * g + tj.0 + dj) * g + tk.0 + dk];
                }
            }
        }
        (vol.get(i, j, k) as f64 * b.exp()) as f32
    })
    .expect("dims already validated")
}
