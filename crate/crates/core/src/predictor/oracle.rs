use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, Poisson};

use super::{Backend, BackendKind, NoiseSpec};
use crate::seed::{mix, rng_from, splitmix64, Rng};
use crate::volume::{extract_window, Volume};

pub struct OraclePredictor {
    gt: Arc<Volume>,
    window: usize,
}

impl OraclePredictor {
    pub fn new(gt: Arc<Volume>, window: usize) -> Self {
        OraclePredictor { gt, window }
    }
}

impl Backend for OraclePredictor {
    fn kind(&self) -> BackendKind {
        BackendKind::Oracle
    }

    fn predict(&self, _patch: &Volume, origin: [i64; 3]) -> Result<Vec<f32>, String> {
        Ok(extract_window(&self.gt, origin, [self.window; 3]).into_data())
    }
}

pub struct ConstantPredictor {
    pub(super) value: f32,
    pub(super) window: usize,
}

impl Backend for ConstantPredictor {
    fn kind(&self) -> BackendKind {
        BackendKind::Constant
    }

    fn predict(&self, _patch: &Volume, _origin: [i64; 3]) -> Result<Vec<f32>, String> {
        Ok(vec![self.value; self.window.pow(3)])
    }
}

/// Oracle with seeded corruption.
///
/// Per-voxel flips are a pure function of `(model seed, seed offset, global
/// voxel)`, so a model reports the same spurious voxel in every window that
/// covers it. Blobs and holes are drawn per window from a stream keyed by
/// `(model seed, seed offset, window origin)`.
pub struct NoisyOraclePredictor {
    oracle: OraclePredictor,
    noise: NoiseSpec,
    key: u64,
    flip_threshold: u64,
}

const FLIP_TAG: u64 = 0xF11F;
const BLOB_TAG: u64 = 0xB10B;

#[inline]
fn pack(p: [i64; 3]) -> u64 {
    const BIAS: i64 = 1 << 20;
    const MASK: u64 = (1 << 21) - 1;
    let f = |c: i64| ((c + BIAS) as u64) & MASK;
    (f(p[0]) << 42) | (f(p[1]) << 21) | f(p[2])
}

impl NoisyOraclePredictor {
    pub fn new(gt: Arc<Volume>, window: usize, noise: NoiseSpec, model_seed: u64) -> Self {
        let key = mix(&[model_seed, noise.seed_offset]);
        // u < p  <=>  hash < p * 2^64 (to within one ulp of the hash space)
        let flip_threshold = (noise.per_voxel_fp * 18_446_744_073_709_551_616.0) as u64;
        NoisyOraclePredictor {
            oracle: OraclePredictor::new(gt, window),
            noise,
            key,
            flip_threshold,
        }
    }

    fn flipped(&self, p: [i64; 3]) -> bool {
        splitmix64(self.key ^ FLIP_TAG.wrapping_mul(0x9E37) ^ splitmix64(pack(p))) < self.flip_threshold
    }

    fn window_rng(&self, origin: [i64; 3]) -> Rng {
        rng_from(mix(&[self.key, BLOB_TAG, pack(origin)]))
    }

    fn poisson(rng: &mut Rng, rate: f64) -> u64 {
        if rate <= 0.0 {
            return 0;
        }
        Poisson::new(rate).map(|d| d.sample(rng) as u64).unwrap_or(0)
    }

    fn paint_sphere(out: &mut [f32], w: usize, center: [f64; 3], radius: f64, value: f32) {
        let lo = |c: f64| ((c - radius).ceil().max(0.0)) as usize;
        let hi = |c: f64| ((c + radius).floor().min(w as f64 - 1.0)).max(-1.0) as i64;
        let r2 = radius * radius;
        let (i0, i1) = (lo(center[0]), hi(center[0]));
        let (j0, j1) = (lo(center[1]), hi(center[1]));
        let (k0, k1) = (lo(center[2]), hi(center[2]));
        for i in i0 as i64..=i1 {
            for j in j0 as i64..=j1 {
                for k in k0 as i64..=k1 {
                    let d = [i as f64 - center[0], j as f64 - center[1], k as f64 - center[2]];
                    if d[0] * d[0] + d[1] * d[1] + d[2] * d[2] <= r2 {
                        out[(i as usize * w + j as usize) * w + k as usize] = value;
                    }
                }
            }
        }
    }
}

impl Backend for NoisyOraclePredictor {
    fn kind(&self) -> BackendKind {
        BackendKind::NoisyOracle
    }

    fn predict(&self, patch: &Volume, origin: [i64; 3]) -> Result<Vec<f32>, String> {
        let w = self.oracle.window;
        let mut out = self.oracle.predict(patch, origin)?;
        if self.noise.is_zero() {
            return Ok(out);
        }

        // Draw order is fixed: blob count, blobs, hole count, holes.
        let mut rng = self.window_rng(origin);
        let [rmin, rmax] = self.noise.fp_blob_radius;
        let sphere = |rng: &mut Rng| {
            let c = [0, 1, 2].map(|_| rng.random::<f64>() * w as f64 - 0.5);
            let r = if rmax > rmin { rng.random_range(rmin..rmax) } else { rmin };
            (c, r)
        };
        let blobs = Self::poisson(&mut rng, self.noise.fp_blob_rate);
        let blob_shapes: Vec<_> = (0..blobs).map(|_| sphere(&mut rng)).collect();
        let holes = Self::poisson(&mut rng, self.noise.fn_hole_rate);
        let hole_shapes: Vec<_> = (0..holes).map(|_| sphere(&mut rng)).collect();

        for (c, r) in blob_shapes {
            Self::paint_sphere(&mut out, w, c, r, 1.0);
        }

        if self.flip_threshold > 0 {
            for i in 0..w {
                for j in 0..w {
                    let row = (i * w + j) * w;
                    for k in 0..w {
                        if out[row + k] == 0.0 {
                            let g = [origin[0] + i as i64, origin[1] + j as i64, origin[2] + k as i64];
                            if self.flipped(g) {
                                out[row + k] = 1.0;
                            }
                        }
                    }
                }
            }
        }

        for (c, r) in hole_shapes {
            Self::paint_sphere(&mut out, w, c, r, 0.0);
        }
        Ok(out)
    }
}
