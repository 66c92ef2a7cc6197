use rand::Rng as _;

use crate::error::{Error, Result};
use crate::seed::Rng;
use crate::volume::{Volume, VolumeKind};

/// Label values that make up the brain.
pub const BRAIN_LABELS: [u32; 7] = [1, 2, 3, 4, 5, 6, 7];

/// An ellipsoid in coordinates normalized by the outer brain semi-axes.
struct Structure {
    label: u32,
    center: [f64; 3],
    radii: [f64; 3],
}

// Painted in order; later structures overwrite earlier ones.
const STRUCTURES: [Structure; 7] = [
    // cortical shell: the whole outer ellipsoid, hollowed by white matter below
    Structure { label: 1, center: [0.0, 0.0, 0.0], radii: [1.0, 1.0, 1.0] },
    Structure { label: 2, center: [0.0, 0.0, 0.0], radii: [0.82, 0.82, 0.82] },
    Structure { label: 6, center: [0.0, 0.0, 0.0], radii: [0.3, 0.3, 0.3] },
    Structure { label: 3, center: [0.05, -0.2, 0.0], radii: [0.4, 0.12, 0.18] },
    Structure { label: 4, center: [0.05, 0.2, 0.0], radii: [0.4, 0.12, 0.18] },
    Structure { label: 5, center: [-0.75, 0.0, -0.55], radii: [0.35, 0.55, 0.3] },
    Structure { label: 7, center: [-0.45, 0.0, -0.85], radii: [0.2, 0.18, 0.35] },
];

/// One interior point per label that is forced to carry it, so every label
/// survives on small grids.
const ANCHORS: [(u32, [f64; 3]); 7] = [
    (1, [0.91, 0.0, 0.0]),
    (2, [0.0, 0.0, 0.6]),
    (3, [0.05, -0.2, 0.0]),
    (4, [0.05, 0.2, 0.0]),
    (5, [-0.75, 0.0, -0.55]),
    (6, [0.0, 0.0, 0.0]),
    (7, [-0.45, 0.0, -0.85]),
];

/// Builds a synthetic brain label map: background 0 and seven nested or
/// adjacent ellipsoidal structures `1..=7` forming one connected brain, with
/// randomized position and semi-axes.
pub fn make_phantom_label_map(rng: &mut Rng, dims: [usize; 3]) -> Result<Volume> {
    if dims.iter().any(|&d| d < 32) {
        return Err(Error::invalid(format!("phantom dims must be at least 32, got {dims:?}")));
    }
    let m = *dims.iter().min().unwrap() as f64;
    let center = dims.map(|d| d as f64 * rng.random_range(0.35..0.65));
    let radii = [0, 1, 2].map(|_| m * rng.random_range(0.16..0.24));

    let mut vol = Volume::from_fn(dims, [1.0; 3], VolumeKind::Label, |i, j, k| {
        let u = [
            (i as f64 - center[0]) / radii[0],
            (j as f64 - center[1]) / radii[1],
            (k as f64 - center[2]) / radii[2],
        ];
        let mut label = 0u32;
        for s in &STRUCTURES {
            let r2: f64 = (0..3).map(|a| ((u[a] - s.center[a]) / s.radii[a]).powi(2)).sum();
            if r2 <= 1.0 {
                label = s.label;
            }
        }
        label as f32
    })?;

    for (label, at) in ANCHORS {
        let p = [0, 1, 2].map(|a| (center[a] + at[a] * radii[a]).round() as usize);
        vol.set(p[0], p[1], p[2], label as f32);
    }
    Ok(vol)
}
