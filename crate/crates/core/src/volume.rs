//! Dense 3D scalar volumes and the voxel-space geometry shared by every stage
//! of the pipeline.
//!
//! Voxel data is stored in a single `Vec<f32>` with axis 0 slowest and axis 2
//! fastest: the linear index of `(i, j, k)` is `(i * dims[1] + j) * dims[2] + k`.
//! File I/O, window extraction and labeling all address voxels through this
//! order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What the values of a [`Volume`] mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VolumeKind {
    Intensity,
    Label,
    Probability,
    Mask,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    Linear,
    Nearest,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: [usize; 3],
    spacing: [f64; 3],
    data: Vec<f32>,
    kind: VolumeKind,
}

fn check_dims(dims: [usize; 3]) -> Result<()> {
    if dims.iter().any(|&d| d == 0) {
        return Err(Error::invalid(format!("dims must be positive, got {dims:?}")));
    }
    Ok(())
}

fn check_spacing(spacing: [f64; 3]) -> Result<()> {
    if spacing.iter().any(|&s| !(s.is_finite() && s > 0.0)) {
        return Err(Error::invalid(format!(
            "spacing must be finite and positive, got {spacing:?}"
        )));
    }
    Ok(())
}

fn check_values(kind: VolumeKind, data: &[f32]) -> Result<()> {
    match kind {
        VolumeKind::Mask => {
            if let Some(v) = data.iter().find(|&&v| v != 0.0 && v != 1.0) {
                return Err(Error::invalid(format!("mask value {v} is not 0 or 1")));
            }
        }
        VolumeKind::Label => {
            if let Some(v) = data.iter().find(|&&v| !(v >= 0.0 && v.fract() == 0.0)) {
                return Err(Error::invalid(format!(
                    "label value {v} is not a non-negative integer"
                )));
            }
        }
        VolumeKind::Intensity | VolumeKind::Probability => {
            if data.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid("volume contains non-finite values"));
            }
        }
    }
    Ok(())
}

impl Volume {
    pub fn zeros(dims: [usize; 3], spacing: [f64; 3], kind: VolumeKind) -> Result<Self> {
        check_dims(dims)?;
        check_spacing(spacing)?;
        Ok(Volume {
            dims,
            spacing,
            data: vec![0.0; dims.iter().product()],
            kind,
        })
    }

    pub fn filled(dims: [usize; 3], spacing: [f64; 3], kind: VolumeKind, value: f32) -> Result<Self> {
        let mut v = Self::zeros(dims, spacing, kind)?;
        v.data.fill(value);
        check_values(kind, &v.data[..1])?;
        Ok(v)
    }

    pub fn from_vec(
        dims: [usize; 3],
        spacing: [f64; 3],
        kind: VolumeKind,
        data: Vec<f32>,
    ) -> Result<Self> {
        check_dims(dims)?;
        check_spacing(spacing)?;
        let n: usize = dims.iter().product();
        if data.len() != n {
            return Err(Error::invalid(format!(
                "data length {} does not match dims {dims:?} ({n} voxels)",
                data.len()
            )));
        }
        check_values(kind, &data)?;
        Ok(Volume {
            dims,
            spacing,
            data,
            kind,
        })
    }

    /// Builds a volume by evaluating `f(i, j, k)` at every voxel.
    pub fn from_fn(
        dims: [usize; 3],
        spacing: [f64; 3],
        kind: VolumeKind,
        f: impl Fn(usize, usize, usize) -> f32 + Sync,
    ) -> Result<Self> {
        check_dims(dims)?;
        check_spacing(spacing)?;
        let plane = dims[1] * dims[2];
        let mut data = vec![0.0f32; dims[0] * plane];
        data.par_chunks_mut(plane).enumerate().for_each(|(i, slab)| {
            for j in 0..dims[1] {
                for k in 0..dims[2] {
                    slab[j * dims[2] + k] = f(i, j, k);
                }
            }
        });
        Self::from_vec(dims, spacing, kind, data)
    }

    /// Trusted constructor for values produced by this crate that already
    /// satisfy the kind invariants.
    pub(crate) fn from_parts(
        dims: [usize; 3],
        spacing: [f64; 3],
        kind: VolumeKind,
        data: Vec<f32>,
    ) -> Self {
        debug_assert_eq!(data.len(), dims.iter().product::<usize>());
        Volume {
            dims,
            spacing,
            data,
            kind,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn kind(&self) -> VolumeKind {
        self.kind
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dims[1] + j) * self.dims[2] + k
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let k = idx % self.dims[2];
        let rest = idx / self.dims[2];
        [rest / self.dims[1], rest % self.dims[1], k]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f32 {
        self.data[self.index(i, j, k)]
    }

    /// Sets one voxel. The caller is responsible for keeping the kind invariant.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f32) {
        let idx = self.index(i, j, k);
        self.data[idx] = value;
    }

    /// Reads a voxel by signed coordinates; anything outside the grid is 0.
    #[inline]
    pub fn get_or_zero(&self, p: [i64; 3]) -> f32 {
        if p.iter().zip(self.dims.iter()).all(|(&c, &d)| c >= 0 && (c as usize) < d) {
            self.get(p[0] as usize, p[1] as usize, p[2] as usize)
        } else {
            0.0
        }
    }

    /// Reinterprets the volume under a different kind, validating the values.
    pub fn with_kind(mut self, kind: VolumeKind) -> Result<Self> {
        check_values(kind, &self.data)?;
        self.kind = kind;
        Ok(self)
    }

    pub fn with_spacing(mut self, spacing: [f64; 3]) -> Result<Self> {
        check_spacing(spacing)?;
        self.spacing = spacing;
        Ok(self)
    }

    pub fn count_nonzero(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0.0).count()
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().map(|&v| v as f64).sum()
    }

    pub fn min_max(&self) -> (f32, f32) {
        self.data
            .iter()
            .fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn full_box(&self) -> BoundingBox {
        BoundingBox::full(self.dims)
    }

    /// Centroid of the nonzero voxels in voxel coordinates, `None` if empty.
    pub fn centroid(&self) -> Option<[f64; 3]> {
        let mut acc = [0.0f64; 3];
        let mut n = 0usize;
        for (idx, &v) in self.data.iter().enumerate() {
            if v != 0.0 {
                let c = self.coords(idx);
                for a in 0..3 {
                    acc[a] += c[a] as f64;
                }
                n += 1;
            }
        }
        (n > 0).then(|| acc.map(|s| s / n as f64))
    }
}

/// Axis-aligned voxel box; `min` inclusive, `max` exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min: [usize; 3],
    pub max: [usize; 3],
}

impl BoundingBox {
    pub fn new(min: [usize; 3], max: [usize; 3]) -> Result<Self> {
        if (0..3).any(|a| min[a] >= max[a]) {
            return Err(Error::invalid(format!(
                "bounding box min {min:?} must be below max {max:?} on every axis"
            )));
        }
        Ok(BoundingBox { min, max })
    }

    pub fn full(dims: [usize; 3]) -> Self {
        BoundingBox {
            min: [0; 3],
            max: dims,
        }
    }

    /// Box of size `size` starting at `origin`.
    pub fn from_origin(origin: [usize; 3], size: [usize; 3]) -> Result<Self> {
        Self::new(origin, [0, 1, 2].map(|a| origin[a] + size[a]))
    }

    pub fn extent(&self) -> [usize; 3] {
        [0, 1, 2].map(|a| self.max[a] - self.min[a])
    }

    pub fn voxel_count(&self) -> usize {
        self.extent().iter().product()
    }

    pub fn contains(&self, p: [usize; 3]) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] < self.max[a])
    }

    pub fn contains_box(&self, other: &BoundingBox) -> bool {
        (0..3).all(|a| other.min[a] >= self.min[a] && other.max[a] <= self.max[a])
    }

    pub fn fits_within(&self, dims: [usize; 3]) -> bool {
        (0..3).all(|a| self.max[a] <= dims[a])
    }

    pub fn intersection(&self, other: &BoundingBox) -> Option<BoundingBox> {
        let min = [0, 1, 2].map(|a| self.min[a].max(other.min[a]));
        let max = [0, 1, 2].map(|a| self.max[a].min(other.max[a]));
        BoundingBox::new(min, max).ok()
    }

    /// Shifts the box by `offset` (used to map a box found inside a sub-region
    /// back into the parent volume).
    pub fn translated(&self, offset: [usize; 3]) -> BoundingBox {
        BoundingBox {
            min: [0, 1, 2].map(|a| self.min[a] + offset[a]),
            max: [0, 1, 2].map(|a| self.max[a] + offset[a]),
        }
    }
}

/// Round-half-up, guarded against representation error just below `.5`.
fn round_half_up(x: f64) -> usize {
    (x + 0.5 + 1e-9).floor().max(1.0) as usize
}

/// Output dims of resampling `dims` from `spacing` to `target`.
pub fn resampled_dims(dims: [usize; 3], spacing: [f64; 3], target: [f64; 3]) -> [usize; 3] {
    [0, 1, 2].map(|a| round_half_up(dims[a] as f64 * spacing[a] / target[a]))
}

/// Resamples `vol` to `target_spacing`, keeping the physical extent.
pub fn resample(vol: &Volume, target_spacing: [f64; 3], interp: Interpolation) -> Result<Volume> {
    check_spacing(target_spacing)?;
    let dims = resampled_dims(vol.dims, vol.spacing, target_spacing);
    resample_to_grid(vol, dims, target_spacing, interp)
}

/// Resamples onto an explicit grid whose corner coincides with the input's
/// corner. Voxel centres are aligned: output index `j` samples the input at
/// continuous index `(j + 0.5) * target / spacing - 0.5`. Linear reads clamp to
/// the edge voxels.
pub fn resample_to_grid(
    vol: &Volume,
    dims: [usize; 3],
    spacing: [f64; 3],
    interp: Interpolation,
) -> Result<Volume> {
    check_dims(dims)?;
    check_spacing(spacing)?;
    if interp == Interpolation::Linear && matches!(vol.kind, VolumeKind::Label | VolumeKind::Mask) {
        return Err(Error::invalid(format!(
            "linear interpolation is not allowed for {:?} volumes",
            vol.kind
        )));
    }
    if dims == vol.dims && spacing == vol.spacing {
        return Ok(vol.clone());
    }

    let ratio = [0, 1, 2].map(|a| spacing[a] / vol.spacing[a]);
    let src_dims = vol.dims;
    let plane = dims[1] * dims[2];
    let mut out = vec![0.0f32; dims[0] * plane];

    // Per-axis sample positions are separable; precompute them once.
    let positions: Vec<Vec<f64>> = (0..3)
        .map(|a| {
            (0..dims[a])
                .map(|j| ((j as f64 + 0.5) * ratio[a] - 0.5).clamp(0.0, (src_dims[a] - 1) as f64))
                .collect()
        })
        .collect();

    match interp {
        Interpolation::Nearest => {
            let nearest: Vec<Vec<usize>> = (0..3)
                .map(|a| {
                    positions[a]
                        .iter()
                        .map(|&x| ((x + 0.5).floor() as usize).min(src_dims[a] - 1))
                        .collect()
                })
                .collect();
            out.par_chunks_mut(plane).enumerate().for_each(|(i, slab)| {
                let si = nearest[0][i];
                for j in 0..dims[1] {
                    let sj = nearest[1][j];
                    for k in 0..dims[2] {
                        slab[j * dims[2] + k] = vol.get(si, sj, nearest[2][k]);
                    }
                }
            });
        }
        Interpolation::Linear => {
            let taps: Vec<Vec<(usize, usize, f64)>> = (0..3)
                .map(|a| {
                    positions[a]
                        .iter()
                        .map(|&x| {
                            let lo = x.floor() as usize;
                            let hi = (lo + 1).min(src_dims[a] - 1);
                            (lo, hi, x - lo as f64)
                        })
                        .collect()
                })
                .collect();
            out.par_chunks_mut(plane).enumerate().for_each(|(i, slab)| {
                let (i0, i1, fi) = taps[0][i];
                for j in 0..dims[1] {
                    let (j0, j1, fj) = taps[1][j];
                    for k in 0..dims[2] {
                        let (k0, k1, fk) = taps[2][k];
                        let c = |a: usize, b: usize, c: usize| vol.get(a, b, c) as f64;
                        let c00 = c(i0, j0, k0) * (1.0 - fk) + c(i0, j0, k1) * fk;
                        let c01 = c(i0, j1, k0) * (1.0 - fk) + c(i0, j1, k1) * fk;
                        let c10 = c(i1, j0, k0) * (1.0 - fk) + c(i1, j0, k1) * fk;
                        let c11 = c(i1, j1, k0) * (1.0 - fk) + c(i1, j1, k1) * fk;
                        let c0 = c00 * (1.0 - fj) + c01 * fj;
                        let c1 = c10 * (1.0 - fj) + c11 * fj;
                        slab[j * dims[2] + k] = (c0 * (1.0 - fi) + c1 * fi) as f32;
                    }
                }
            });
        }
    }
    Ok(Volume::from_parts(dims, spacing, vol.kind, out))
}

/// Per-axis shift applied by [`conform_cube`]: output index = input index + offset.
///
/// Margins are split evenly; an odd difference puts the extra voxel on the
/// high-index side, for both padding and cropping.
pub fn conform_offsets(dims: [usize; 3], side: usize) -> [i64; 3] {
    dims.map(|d| {
        let diff = side as i64 - d as i64;
        if diff >= 0 {
            diff / 2
        } else {
            -((-diff) / 2)
        }
    })
}

/// Copies `vol` into a zero volume of `dims` so that input voxel `p` lands at
/// `p + offset`. Voxels that fall outside are dropped.
pub fn shift_into(vol: &Volume, offset: [i64; 3], dims: [usize; 3]) -> Result<Volume> {
    check_dims(dims)?;
    let mut out = vec![0.0f32; dims.iter().product()];
    let src = vol.dims;
    // Overlap range in source coordinates per axis.
    let range = |a: usize| {
        let lo = (-offset[a]).max(0);
        let hi = (src[a] as i64).min(dims[a] as i64 - offset[a]);
        (lo, hi)
    };
    let (r0, r1, r2) = (range(0), range(1), range(2));
    if r0.0 < r0.1 && r1.0 < r1.1 && r2.0 < r2.1 {
        let run = (r2.1 - r2.0) as usize;
        for i in r0.0..r0.1 {
            for j in r1.0..r1.1 {
                let s = vol.index(i as usize, j as usize, r2.0 as usize);
                let oi = (i + offset[0]) as usize;
                let oj = (j + offset[1]) as usize;
                let ok = (r2.0 + offset[2]) as usize;
                let d = (oi * dims[1] + oj) * dims[2] + ok;
                out[d..d + run].copy_from_slice(&vol.data[s..s + run]);
            }
        }
    }
    Ok(Volume::from_parts(dims, vol.spacing, vol.kind, out))
}

/// Symmetric crop / zero-pad to a `side`³ cube, centre preserved.
pub fn conform_cube(vol: &Volume, side: usize) -> Result<Volume> {
    if side == 0 {
        return Err(Error::invalid("conform side must be positive"));
    }
    if vol.dims == [side; 3] {
        return Ok(vol.clone());
    }
    shift_into(vol, conform_offsets(vol.dims, side), [side; 3])
}

/// Inverse of [`conform_cube`] for a volume that was conformed from `orig_dims`.
pub fn unconform_cube(vol: &Volume, orig_dims: [usize; 3]) -> Result<Volume> {
    let side = vol.dims[0];
    if vol.dims != [side; 3] {
        return Err(Error::invalid(format!("expected a cube, got {:?}", vol.dims)));
    }
    let off = conform_offsets(orig_dims, side).map(|o| -o);
    shift_into(vol, off, orig_dims)
}

/// Reads `size` voxels starting at the signed `origin`; out-of-grid voxels are 0.
pub fn extract_window(vol: &Volume, origin: [i64; 3], size: [usize; 3]) -> Volume {
    let mut out = shift_into(vol, origin.map(|o| -o), size).expect("size is positive");
    out.spacing = vol.spacing;
    out
}

/// Restricts `vol` to `box`, optionally zero-padding the result symmetrically
/// up to `pad_to`. Parts of the box beyond the grid read as 0.
pub fn extract_patch(vol: &Volume, bbox: &BoundingBox, pad_to: Option<[usize; 3]>) -> Result<Volume> {
    if !(0..3).all(|a| bbox.min[a] < vol.dims[a]) {
        return Err(Error::invalid(format!(
            "box {bbox:?} does not intersect volume of dims {:?}",
            vol.dims
        )));
    }
    let ext = bbox.extent();
    let origin = bbox.min.map(|m| m as i64);
    match pad_to {
        None => Ok(extract_window(vol, origin, ext)),
        Some(target) => {
            if (0..3).any(|a| target[a] < ext[a]) {
                return Err(Error::invalid(format!(
                    "pad_to {target:?} is smaller than box extent {ext:?}"
                )));
            }
            let lead = [0, 1, 2].map(|a| ((target[a] - ext[a]) / 2) as i64);
            let patch = extract_window(vol, origin, ext);
            shift_into(&patch, lead, target)
        }
    }
}

/// Scales intensities to `[0, 1]`; a constant volume maps to all zeros.
pub fn minmax_normalize(vol: &Volume) -> Volume {
    let (lo, hi) = vol.min_max();
    let range = hi - lo;
    let data = if range > 0.0 && range.is_finite() {
        vol.data.iter().map(|&v| ((v - lo) / range).clamp(0.0, 1.0)).collect()
    } else {
        vec![0.0; vol.data.len()]
    };
    Volume::from_parts(vol.dims, vol.spacing, vol.kind, data)
}
