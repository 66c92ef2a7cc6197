use std::f64::consts::TAU;

use rand::Rng as _;

use crate::error::{Error, Result};
use crate::seed::Rng;
use crate::volume::{Volume, VolumeKind};

/// First label value used for random shapes.
pub const FIRST_SHAPE_LABEL: u32 = 8;

struct Shape {
    center: [f64; 3],
    radii: [f64; 3],
    /// rows of a rotation matrix
    axes: [[f64; 3]; 3],
    /// `None` for a plain ellipsoid, otherwise surface-ripple phases.
    ripple: Option<[f64; 3]>,
}

impl Shape {
    // Fixed number of draws regardless of the branch taken.
    fn sample(rng: &mut Rng, dims: [usize; 3]) -> Shape {
        let blobby = rng.random::<bool>();
        let center = dims.map(|d| rng.random::<f64>() * d as f64);
        let r_hi = (*dims.iter().min().unwrap() as f64 / 4.0).max(2.0 + 1e-9);
        let radii = [0, 1, 2].map(|_| rng.random_range(2.0..r_hi));
        let [a, b, c] = [0, 1, 2].map(|_| rng.random::<f64>() * TAU);
        let phases = [0, 1, 2].map(|_| rng.random::<f64>() * TAU);
        let (sa, ca) = a.sin_cos();
        let (sb, cb) = b.sin_cos();
        let (sc, cc) = c.sin_cos();
        // Rz·Ry·Rx
        let axes = [
            [cc * cb, cc * sb * sa - sc * ca, cc * sb * ca + sc * sa],
            [sc * cb, sc * sb * sa + cc * ca, sc * sb * ca - cc * sa],
            [-sb, cb * sa, cb * ca],
        ];
        Shape {
            center,
            radii,
            axes,
            ripple: blobby.then_some(phases),
        }
    }

    fn contains(&self, p: [f64; 3]) -> bool {
        let d = [0, 1, 2].map(|a| p[a] - self.center[a]);
        let u = [0, 1, 2].map(|r| {
            (self.axes[r][0] * d[0] + self.axes[r][1] * d[1] + self.axes[r][2] * d[2]) / self.radii[r]
        });
        let r2: f64 = u.iter().map(|x| x * x).sum();
        let limit = match self.ripple {
            None => 1.0,
            Some(ph) => {
                let r = r2.sqrt().max(1e-12);
                let n = u.map(|x| x / r);
                let wobble = 0.25 * ((3.0 * n[0] + ph[0]).sin() + (3.0 * n[1] + ph[1]).sin() + (3.0 * n[2] + ph[2]).sin()) / 3.0;
                (1.0 + wobble).powi(2)
            }
        };
        r2 <= limit
    }

    fn reach(&self) -> f64 {
        self.radii.iter().cloned().fold(0.0, f64::max) * 1.3
    }
}

/// Paints `n` random shapes with labels `8..8+n` into background voxels of
/// `lm`. Brain voxels are never touched; later shapes overwrite earlier ones.
pub fn add_random_shapes(lm: &Volume, n: usize, rng: &mut Rng) -> Result<Volume> {
    if lm.kind() != VolumeKind::Label {
        return Err(Error::invalid("random shapes need a label map"));
    }
    let dims = lm.dims();
    let mut out = lm.clone();
    for s in 0..n {
        let label = (FIRST_SHAPE_LABEL as usize + s) as f32;
        let shape = Shape::sample(rng, dims);
        let reach = shape.reach();
        let lo = shape.center.map(|c| (c - reach).floor().max(0.0) as usize);
        let hi = [0, 1, 2].map(|a| ((shape.center[a] + reach).ceil().max(0.0) as usize + 1).min(dims[a]));
        for i in lo[0]..hi[0] {
            for j in lo[1]..hi[1] {
                for k in lo[2]..hi[2] {
                    if lm.get(i, j, k) == 0.0 && shape.contains([i as f64, j as f64, k as f64]) {
                        out.set(i, j, k, label);
                    }
                }
            }
        }
    }
    Ok(out)
}
