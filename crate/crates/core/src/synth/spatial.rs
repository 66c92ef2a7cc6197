use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SynthesisParams;
use crate::seed::Rng;
use crate::volume::Volume;

/// Control points per axis of the smooth displacement field.
pub const WARP_GRID: usize = 8;

/// Affine part (about the volume centre) plus a smooth displacement field.
#[derive(Debug, Clone, PartialEq)]
pub struct SpatialTransform {
    pub translation_mm: [f64; 3],
    pub rotation_deg: [f64; 3],
    pub scale: f64,
    pub warp_amplitude: f64,
    /// `WARP_GRID³` control displacements (mm) per axis, axis-major.
    pub warp: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransformRecord {
    pub translation_mm: [f64; 3],
    pub rotation_deg: [f64; 3],
    pub scale: f64,
    pub warp_amplitude_mm: f64,
}

impl SpatialTransform {
    pub fn identity() -> Self {
        SpatialTransform {
            translation_mm: [0.0; 3],
            rotation_deg: [0.0; 3],
            scale: 1.0,
            warp_amplitude: 0.0,
            warp: vec![[0.0; 3]; WARP_GRID.pow(3)],
        }
    }

    pub fn translation(t: [f64; 3]) -> Self {
        SpatialTransform {
            translation_mm: t,
            ..Self::identity()
        }
    }

    pub fn record(&self) -> TransformRecord {
        TransformRecord {
            translation_mm: self.translation_mm,
            rotation_deg: self.rotation_deg,
            scale: self.scale,
            warp_amplitude_mm: self.warp_amplitude,
        }
    }

    /// Inverse of `R · s`, where `R = Rz · Ry · Rx` rotates about axes 0, 1, 2.
    fn inverse_linear(&self) -> [[f64; 3]; 3] {
        let [a, b, c] = self.rotation_deg.map(f64::to_radians);
        let (sa, ca) = a.sin_cos();
        let (sb, cb) = b.sin_cos();
        let (sc, cc) = c.sin_cos();
        let rx = [[1.0, 0.0, 0.0], [0.0, ca, -sa], [0.0, sa, ca]];
        let ry = [[cb, 0.0, sb], [0.0, 1.0, 0.0], [-sb, 0.0, cb]];
        let rz = [[cc, -sc, 0.0], [sc, cc, 0.0], [0.0, 0.0, 1.0]];
        let r = matmul(&rz, &matmul(&ry, &rx));
        let inv_s = 1.0 / self.scale;
        // R is orthonormal: R⁻¹ = Rᵀ
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = r[j][i] * inv_s;
            }
        }
        m
    }
}

fn matmul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

/// Uniform draw on `[-m, m]`; always consumes exactly one value.
fn symmetric(rng: &mut Rng, m: f64) -> f64 {
    (2.0 * rng.random::<f64>() - 1.0) * m
}

pub fn sample_spatial(p: &SynthesisParams, rng: &mut Rng) -> SpatialTransform {
    let translation_mm = [0, 1, 2].map(|_| symmetric(rng, p.shift_max));
    let rotation_deg = [0, 1, 2].map(|_| symmetric(rng, p.rot_max));
    let scale = 1.0 + symmetric(rng, p.scale_max);
    let warp_amplitude = rng.random::<f64>() * p.warp_max;
    let warp = (0..WARP_GRID.pow(3))
        .map(|_| [0, 1, 2].map(|_| symmetric(rng, warp_amplitude)))
        .collect();
    SpatialTransform {
        translation_mm,
        rotation_deg,
        scale,
        warp_amplitude,
        warp,
    }
}

/// Per-axis control-grid interpolation taps: `(lower index, fraction)`.
fn grid_taps(d: usize) -> Vec<(usize, f64)> {
    let g = WARP_GRID;
    (0..d)
        .map(|x| {
            let pos = if d > 1 { x as f64 * (g - 1) as f64 / (d - 1) as f64 } else { 0.0 };
            let lo = (pos.floor() as usize).min(g - 2);
            (lo, pos - lo as f64)
        })
        .collect()
}

/// Resamples `vol` through `t` with nearest-neighbour lookup. Output voxel `y`
/// reads input position `A⁻¹(y - c - t) + c + u(y)`, `c` the volume centre and
/// `u` the interpolated displacement; positions outside the input read 0.
pub fn apply_spatial(vol: &Volume, t: &SpatialTransform) -> Volume {
    let dims = vol.dims();
    let sp = vol.spacing();
    let center = [0, 1, 2].map(|a| (dims[a] as f64 - 1.0) / 2.0 * sp[a]);
    let m = t.inverse_linear();
    let taps = [grid_taps(dims[0]), grid_taps(dims[1]), grid_taps(dims[2])];
    let has_warp = t.warp_amplitude > 0.0;
    let g = WARP_GRID;
    let warp_at = |i: usize, j: usize, k: usize| -> [f64; 3] {
        if !has_warp {
            return [0.0; 3];
        }
        let (ti, tj, tk) = (taps[0][i], taps[1][j], taps[2][k]);
        let mut d = [0.0; 3];
        for (di, wi) in [(0, 1.0 - ti.1), (1, ti.1)] {
            for (dj, wj) in [(0, 1.0 - tj.1), (1, tj.1)] {
                for (dk, wk) in [(0, 1.0 - tk.1), (1, tk.1)] {
                    let w = wi * wj * wk;
                    let c = &t.warp[((ti.0 + di) * g + tj.0 + dj) * g + tk.0 + dk];
                    for a in 0..3 {
                        d[a] += w * c[a];
                    }
                }
            }
        }
        d
    };

    let plane = dims[1] * dims[2];
    let mut out = vec![0.0f32; vol.len()];
    out.par_chunks_mut(plane).enumerate().for_each(|(i, slab)| {
        for j in 0..dims[1] {
            for k in 0..dims[2] {
                let y = [i as f64 * sp[0], j as f64 * sp[1], k as f64 * sp[2]];
                let v = [0, 1, 2].map(|a| y[a] - center[a] - t.translation_mm[a]);
                let u = warp_at(i, j, k);
                let src = [0, 1, 2].map(|a| {
                    let mm = m[a][0] * v[0] + m[a][1] * v[1] + m[a][2] * v[2] + center[a] + u[a];
                    (mm / sp[a]).round()
                });
                slab[j * dims[2] + k] = vol.get_or_zero(src.map(|s| s as i64));
            }
        }
    });
    crate::volume::Volume::from_parts(dims, sp, vol.kind(), out)
}

pub fn augment_spatial(lm: &Volume, p: &SynthesisParams, rng: &mut Rng) -> Volume {
    apply_spatial(lm, &sample_spatial(p, rng))
}
