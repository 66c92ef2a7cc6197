//! The extraction pipeline: conform the input, localize the brain with a
//! whole-volume scan by several window models, refine the region with a
//! cascade of shrinking windows, and fuse the stage masks by majority vote.

use serde::{Deserialize, Serialize};

use crate::defaults::{ModelId, ALPHA, BFS_MODELS, CONFORM_SIDE, CONFORM_SPACING, DFS_MODELS};
use crate::error::{Error, Result};
use crate::morphology::{
    intersection, largest_component_box, majority_vote, threshold, threshold_strict, union, Connectivity,
};
use crate::predictor::PredictorHandle;
use crate::volume::{
    conform_cube, resample, resample_to_grid, resampled_dims, shift_into, unconform_cube, BoundingBox,
    Interpolation, Volume, VolumeKind,
};
use crate::windowing::{plan_windows_within, run_windows, AccumulateMode};

/// One sliding-window pass: a model, its window and step, and the threshold
/// applied to its accumulated map (refinement stages only).
#[derive(Debug, Clone)]
pub struct StageSpec {
    pub name: String,
    pub model: PredictorHandle,
    pub window: usize,
    pub step: usize,
    pub alpha: f32,
}

impl StageSpec {
    /// Stage using the default window, step and threshold of `id`.
    pub fn for_model(id: ModelId, model: PredictorHandle) -> Result<Self> {
        let row = id.row();
        let s = StageSpec {
            name: id.to_string(),
            model,
            window: row.window,
            step: row.step,
            alpha: ALPHA,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.step == 0 || self.step > self.window {
            return Err(Error::Config(format!(
                "stage {}: need 0 < step <= window, got step {} window {}",
                self.name, self.step, self.window
            )));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::Config(format!("stage {}: alpha {} outside [0, 1]", self.name, self.alpha)));
        }
        if self.model.window() != self.window {
            return Err(Error::Config(format!(
                "stage {}: predictor window {} differs from stage window {}",
                self.name,
                self.model.window(),
                self.window
            )));
        }
        Ok(())
    }
}

/// How the localization maps are combined before component analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BfsCombine {
    #[default]
    Union,
    Intersection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteRule {
    #[default]
    Majority,
}

#[derive(Debug, Clone)]
pub struct CascadeConfig {
    pub bfs_stages: Vec<StageSpec>,
    pub dfs_stages: Vec<StageSpec>,
    /// Localization keeps voxels with `p > bfs_threshold`.
    pub bfs_threshold: f32,
    pub bfs_combine: BfsCombine,
    pub accumulate_mode: AccumulateMode,
    pub vote_rule: VoteRule,
    pub connectivity: Connectivity,
    pub conform_side: usize,
    pub conform_spacing: f64,
}

impl CascadeConfig {
    pub fn new(bfs_stages: Vec<StageSpec>, dfs_stages: Vec<StageSpec>) -> Result<Self> {
        let c = CascadeConfig {
            bfs_stages,
            dfs_stages,
            bfs_threshold: 0.0,
            bfs_combine: BfsCombine::Union,
            accumulate_mode: AccumulateMode::Sum,
            vote_rule: VoteRule::Majority,
            connectivity: Connectivity::TwentySix,
            conform_side: CONFORM_SIDE,
            conform_spacing: CONFORM_SPACING,
        };
        c.validate()?;
        Ok(c)
    }

    /// Default stage layout (localize with A and D, refine with B, C, D),
    /// asking `make` for the predictor of each model.
    pub fn with_models(mut make: impl FnMut(ModelId) -> Result<PredictorHandle>) -> Result<Self> {
        let mut cache: Vec<(ModelId, PredictorHandle)> = Vec::new();
        let mut get = |id: ModelId| -> Result<StageSpec> {
            let h = match cache.iter().find(|(m, _)| *m == id) {
                Some((_, h)) => h.clone(),
                None => {
                    let h = make(id)?;
                    cache.push((id, h.clone()));
                    h
                }
            };
            StageSpec::for_model(id, h)
        };
        let bfs = BFS_MODELS.iter().map(|&m| get(m)).collect::<Result<Vec<_>>>()?;
        let dfs = DFS_MODELS.iter().map(|&m| get(m)).collect::<Result<Vec<_>>>()?;
        Self::new(bfs, dfs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bfs_stages.is_empty() {
            return Err(Error::Config("at least one localization stage is required".into()));
        }
        if self.dfs_stages.is_empty() {
            return Err(Error::Config("at least one refinement stage is required".into()));
        }
        for s in self.bfs_stages.iter().chain(&self.dfs_stages) {
            s.validate()?;
        }
        if self.dfs_stages.windows(2).any(|p| p[1].window >= p[0].window) {
            return Err(Error::Config("refinement windows must strictly decrease".into()));
        }
        if !(self.bfs_threshold >= 0.0) {
            return Err(Error::Config(format!("bfs_threshold {} must be >= 0", self.bfs_threshold)));
        }
        if self.conform_side == 0 || !(self.conform_spacing > 0.0 && self.conform_spacing.is_finite()) {
            return Err(Error::Config("conform side and spacing must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    NoBrainFound,
}

/// Region produced by one stage.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoiEntry {
    pub stage: String,
    pub windows: usize,
    pub bbox: BoundingBox,
}

#[derive(Debug, Clone)]
pub struct ExtractionResult {
    /// Fused mask on the conformed grid.
    pub mask: Volume,
    /// Localization box followed by each completed refinement stage's box.
    pub roi_trace: Vec<RoiEntry>,
    pub status: Status,
    /// Thresholded map of each completed refinement stage, placed in the full grid.
    pub stage_masks: Vec<(String, Volume)>,
    pub bfs_box: Option<BoundingBox>,
}

#[derive(Debug, Clone)]
pub struct Localization {
    pub bbox: Option<BoundingBox>,
    pub status: Status,
    pub windows: usize,
}

/// Scans the whole volume with every localization stage, keeps voxels above
/// the threshold, combines the stages and returns the box of the largest
/// connected component.
pub fn bfs_localize(vol: &Volume, cfg: &CascadeConfig) -> Result<Localization> {
    let full = BoundingBox::full(vol.dims());
    let mut masks = Vec::with_capacity(cfg.bfs_stages.len());
    let mut windows = 0;
    for st in &cfg.bfs_stages {
        let plan = plan_windows_within(full, st.window, st.step, vol.dims())?;
        windows += plan.len();
        let p = run_windows(vol, &plan, &st.model, cfg.accumulate_mode)?;
        masks.push(threshold_strict(&p, cfg.bfs_threshold));
    }
    let refs: Vec<&Volume> = masks.iter().collect();
    let combined = match cfg.bfs_combine {
        BfsCombine::Union => union(&refs)?,
        BfsCombine::Intersection => intersection(&refs)?,
    };
    let found = largest_component_box(&combined, cfg.connectivity)?;
    Ok(Localization {
        bbox: found.as_ref().map(|(_, b)| *b),
        status: if found.is_some() { Status::Ok } else { Status::NoBrainFound },
        windows,
    })
}

/// Places a region-sized mask at the region's offset in a zero volume.
pub fn reconstruct_full(s: &Volume, region: &BoundingBox, dims: [usize; 3]) -> Result<Volume> {
    if !region.fits_within(dims) {
        return Err(Error::invalid(format!("region {region:?} lies outside dims {dims:?}")));
    }
    if s.dims() != region.extent() {
        return Err(Error::DimMismatch {
            left: s.dims(),
            right: region.extent(),
        });
    }
    shift_into(s, region.min.map(|m| m as i64), dims)
}

/// Refinement cascade. Each stage scans the current region, thresholds the
/// accumulated map, and narrows the region to the box of its largest
/// component. When a stage finds nothing the remaining stages are skipped and
/// the vote runs over the stages that completed.
pub fn dfs_refine(vol: &Volume, region: BoundingBox, cfg: &CascadeConfig) -> Result<ExtractionResult> {
    let dims = vol.dims();
    if !region.fits_within(dims) {
        return Err(Error::invalid(format!("region {region:?} lies outside dims {dims:?}")));
    }
    let mut r = region;
    let mut trace = Vec::new();
    let mut stage_masks = Vec::new();
    for st in &cfg.dfs_stages {
        let plan = plan_windows_within(r, st.window, st.step, dims)?;
        let p = run_windows(vol, &plan, &st.model, cfg.accumulate_mode)?;
        let s = threshold(&p, st.alpha)?;
        let Some((_, b)) = largest_component_box(&s, cfg.connectivity)? else {
            break;
        };
        stage_masks.push((st.name.clone(), reconstruct_full(&s, &r, dims)?));
        r = b.translated(r.min);
        trace.push(RoiEntry {
            stage: st.name.clone(),
            windows: plan.len(),
            bbox: r,
        });
    }
    let (mask, status) = if stage_masks.is_empty() {
        let empty = Volume::zeros(dims, vol.spacing(), VolumeKind::Mask)?;
        (empty, Status::NoBrainFound)
    } else {
        let refs: Vec<&Volume> = stage_masks.iter().map(|(_, m)| m).collect();
        let fused = match cfg.vote_rule {
            VoteRule::Majority => majority_vote(&refs)?,
        };
        (fused, Status::Ok)
    };
    Ok(ExtractionResult {
        mask,
        roi_trace: trace,
        status,
        stage_masks,
        bfs_box: Some(region),
    })
}

fn interpolation_for(kind: VolumeKind) -> Interpolation {
    match kind {
        VolumeKind::Intensity | VolumeKind::Probability => Interpolation::Linear,
        VolumeKind::Label | VolumeKind::Mask => Interpolation::Nearest,
    }
}

/// Resamples to isotropic `spacing` (linear for intensities, nearest for
/// labels and masks) and symmetrically crops or pads to `side³`.
pub fn conform(vol: &Volume, side: usize, spacing: f64) -> Result<Volume> {
    let iso = resample(vol, [spacing; 3], interpolation_for(vol.kind()))?;
    conform_cube(&iso, side)
}

/// Maps a conformed mask back onto a native grid of `dims` and `spacing`.
pub fn restore_native_grid(mask: &Volume, dims: [usize; 3], spacing: [f64; 3]) -> Result<Volume> {
    let iso_spacing = mask.spacing();
    let iso_dims = resampled_dims(dims, spacing, iso_spacing);
    let uncropped = unconform_cube(mask, iso_dims)?;
    resample_to_grid(&uncropped, dims, spacing, Interpolation::Nearest)
}

/// Full pipeline on a native-grid intensity volume. The result lives on the
/// conformed grid; see [`restore_native_grid`].
pub fn extract_brain(input: &Volume, cfg: &CascadeConfig) -> Result<ExtractionResult> {
    cfg.validate()?;
    if input.kind() != VolumeKind::Intensity {
        return Err(Error::invalid(format!("expected an intensity volume, got {:?}", input.kind())));
    }
    let vol = conform(input, cfg.conform_side, cfg.conform_spacing)?;
    extract_conformed(&vol, cfg)
}

/// Localization and refinement on an already conformed volume.
pub fn extract_conformed(vol: &Volume, cfg: &CascadeConfig) -> Result<ExtractionResult> {
    let loc = bfs_localize(vol, cfg)?;
    let bfs_entry = |b: BoundingBox| RoiEntry {
        stage: "localize".into(),
        windows: loc.windows,
        bbox: b,
    };
    match loc.bbox {
        None => Ok(ExtractionResult {
            mask: Volume::zeros(vol.dims(), vol.spacing(), VolumeKind::Mask)?,
            roi_trace: Vec::new(),
            status: Status::NoBrainFound,
            stage_masks: Vec::new(),
            bfs_box: None,
        }),
        Some(b) => {
            let mut res = dfs_refine(vol, b, cfg)?;
            res.roi_trace.insert(0, bfs_entry(b));
            Ok(res)
        }
    }
}
