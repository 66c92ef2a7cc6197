//! Sliding-window planning and deterministic accumulation of per-window
//! predictions into a probability map.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predictor::PredictorHandle;
use crate::volume::{extract_window, BoundingBox, Volume, VolumeKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AccumulateMode {
    /// Overlapping predictions are added.
    #[default]
    Sum,
    /// Sums are divided by the number of windows covering each voxel.
    Mean,
}

/// Window origins covering a region. Origins are in the coordinates of the
/// volume the region lives in and are sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct WindowPlan {
    pub region: BoundingBox,
    pub window: usize,
    pub step: usize,
    pub origins: Vec<[i64; 3]>,
}

impl WindowPlan {
    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    /// Distinct origins along each axis.
    pub fn axis_origins(&self) -> [Vec<i64>; 3] {
        let mut axes: [Vec<i64>; 3] = Default::default();
        for o in &self.origins {
            for a in 0..3 {
                if !axes[a].contains(&o[a]) {
                    axes[a].push(o[a]);
                }
            }
        }
        for ax in &mut axes {
            ax.sort_unstable();
        }
        axes
    }
}

/// Origins along one axis: `r_min, r_min + s, ...` while the window fits, plus
/// a final origin snapped to the far edge when the stride leaves a remainder.
pub fn axis_origins(r_min: usize, r_max: usize, w: usize, s: usize) -> Vec<i64> {
    let (r_min, r_max, w, s) = (r_min as i64, r_max as i64, w as i64, s as i64);
    let mut out = Vec::new();
    let mut o = r_min;
    while o + w <= r_max {
        out.push(o);
        o += s;
    }
    let last = r_min.max(r_max - w);
    if out.last() != Some(&last) {
        out.push(last);
    }
    out
}

fn check_ws(w: usize, s: usize) -> Result<()> {
    if w == 0 || s == 0 {
        return Err(Error::invalid(format!("window ({w}) and step ({s}) must be positive")));
    }
    // a stride longer than the window would leave gaps
    if s > w {
        return Err(Error::invalid(format!("step ({s}) must not exceed window ({w})")));
    }
    Ok(())
}

fn product(axes: [Vec<i64>; 3]) -> Vec<[i64; 3]> {
    let mut origins = Vec::with_capacity(axes.iter().map(Vec::len).product());
    for &a in &axes[0] {
        for &b in &axes[1] {
            for &c in &axes[2] {
                origins.push([a, b, c]);
            }
        }
    }
    origins
}

pub fn plan_windows(region: BoundingBox, w: usize, s: usize) -> Result<WindowPlan> {
    check_ws(w, s)?;
    let axes = [0, 1, 2].map(|a| axis_origins(region.min[a], region.max[a], w, s));
    Ok(WindowPlan {
        region,
        window: w,
        step: s,
        origins: product(axes),
    })
}

/// Like [`plan_windows`], but moves windows so they read real voxels of a
/// volume of `dims` wherever it is large enough: an axis narrower than `w` gets
/// one window centred on the region, and every origin is clamped into
/// `[0, dims - w]`. Coverage of the region is preserved.
pub fn plan_windows_within(region: BoundingBox, w: usize, s: usize, dims: [usize; 3]) -> Result<WindowPlan> {
    check_ws(w, s)?;
    if !region.fits_within(dims) {
        return Err(Error::invalid(format!("region {region:?} exceeds volume dims {dims:?}")));
    }
    let axes = [0, 1, 2].map(|a| {
        let (lo, hi) = (region.min[a], region.max[a]);
        let extent = hi - lo;
        let upper = (dims[a] as i64 - w as i64).max(0);
        let mut ax: Vec<i64> = if extent < w {
            vec![lo as i64 - ((w - extent) / 2) as i64]
        } else {
            axis_origins(lo, hi, w, s)
        };
        for o in &mut ax {
            *o = (*o).clamp(0, upper);
        }
        ax.dedup();
        ax
    });
    Ok(WindowPlan {
        region,
        window: w,
        step: s,
        origins: product(axes),
    })
}

/// Intersection of window `[o, o + w)` with the region, in region-local
/// coordinates, per axis: `(region_lo, region_hi, window_offset)`.
fn overlap(plan: &WindowPlan, o: [i64; 3]) -> Option<[(usize, usize, usize); 3]> {
    let mut out = [(0, 0, 0); 3];
    for a in 0..3 {
        let r0 = plan.region.min[a] as i64;
        let r1 = plan.region.max[a] as i64;
        let lo = o[a].max(r0);
        let hi = (o[a] + plan.window as i64).min(r1);
        if lo >= hi {
            return None;
        }
        out[a] = ((lo - r0) as usize, (hi - r0) as usize, (lo - o[a]) as usize);
    }
    Some(out)
}

/// Number of planned windows covering each voxel of the region.
pub fn coverage_counts(plan: &WindowPlan) -> Volume {
    let ext = plan.region.extent();
    let mut counts = vec![0.0f32; ext.iter().product()];
    for &o in &plan.origins {
        if let Some(ov) = overlap(plan, o) {
            for i in ov[0].0..ov[0].1 {
                for j in ov[1].0..ov[1].1 {
                    let row = (i * ext[1] + j) * ext[2];
                    for v in &mut counts[row + ov[2].0..row + ov[2].1] {
                        *v += 1.0;
                    }
                }
            }
        }
    }
    Volume::from_parts(ext, [1.0; 3], VolumeKind::Label, counts)
}

fn accumulate(out: &mut [f32], ext: [usize; 3], plan: &WindowPlan, o: [i64; 3], pred: &Volume) {
    let Some(ov) = overlap(plan, o) else { return };
    let w = plan.window;
    let run = ov[2].1 - ov[2].0;
    for i in ov[0].0..ov[0].1 {
        let wi = i - ov[0].0 + ov[0].2;
        for j in ov[1].0..ov[1].1 {
            let wj = j - ov[1].0 + ov[1].2;
            let dst = (i * ext[1] + j) * ext[2] + ov[2].0;
            let src = (wi * w + wj) * w + ov[2].2;
            for (d, s) in out[dst..dst + run].iter_mut().zip(&pred.data()[src..src + run]) {
                *d += *s;
            }
        }
    }
}

/// Runs `predictor` on every planned window of `vol` and accumulates the
/// predictions over the plan's region.
///
/// Windows are predicted in parallel in batches, but each batch is reduced
/// sequentially in origin order, so the result is bit-identical for any
/// thread count. Windows reaching past the volume read zeros; predictions
/// outside the region are discarded.
pub fn run_windows(
    vol: &Volume,
    plan: &WindowPlan,
    predictor: &PredictorHandle,
    mode: AccumulateMode,
) -> Result<Volume> {
    let w = plan.window;
    if predictor.window() != w {
        return Err(Error::invalid(format!(
            "predictor `{}` has window {}, plan needs {w}",
            predictor.id(),
            predictor.window()
        )));
    }
    if !plan.region.fits_within(vol.dims()) {
        return Err(Error::invalid(format!(
            "region {:?} exceeds volume dims {:?}",
            plan.region,
            vol.dims()
        )));
    }
    let ext = plan.region.extent();
    let mut out = vec![0.0f32; ext.iter().product()];

    // Bounded batches keep at most a few windows in memory per worker.
    let batch = (rayon::current_num_threads() * 2).max(1);
    for chunk in plan.origins.chunks(batch) {
        let preds: Vec<Result<Volume>> = chunk
            .par_iter()
            .map(|&o| {
                let patch = extract_window(vol, o, [w; 3]);
                predictor.predict(&patch, o)
            })
            .collect();
        for (&o, pred) in chunk.iter().zip(preds) {
            accumulate(&mut out, ext, plan, o, &pred?);
        }
    }

    if mode == AccumulateMode::Mean {
        let counts = coverage_counts(plan);
        for (v, &c) in out.iter_mut().zip(counts.data()) {
            if c > 0.0 {
                *v /= c;
            }
        }
    }
    Ok(Volume::from_parts(ext, vol.spacing(), VolumeKind::Probability, out))
}
