//! Paired comparison of a single whole-volume Model A pass against the full
//! cascade, both driven by the same seeded noisy oracles on random phantoms.

use std::fmt::Write as _;
use std::io::Write;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::cascade::{extract_conformed, CascadeConfig, Status};
use crate::defaults::{ModelId, CONFORM_SIDE};
use crate::error::{Error, Result};
use crate::metrics::overlap_report;
use crate::morphology::threshold;
use crate::predictor::{make_noisy_oracle, NoiseSpec};
use crate::seed::{derive_rng, derive_seed};
use crate::synth::{brain_mask, make_phantom_label_map};
use crate::volume::{BoundingBox, Volume, VolumeKind};
use crate::windowing::{plan_windows_within, run_windows, AccumulateMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub seeds: usize,
    pub master_seed: u64,
    pub side: usize,
    pub noise: NoiseSpec,
    pub accumulate_mode: AccumulateMode,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        SimulationSpec {
            seeds: 20,
            master_seed: 0,
            side: CONFORM_SIDE,
            noise: NoiseSpec::per_voxel(0.1),
            accumulate_mode: AccumulateMode::Sum,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationRow {
    pub seed: usize,
    pub single_dice: f64,
    pub single_fp_rate: f64,
    pub cascade_dice: f64,
    pub cascade_fp_rate: f64,
    /// False-positive rate over ground-truth negatives inside the final region.
    pub cascade_roi_fp_rate: f64,
    pub final_roi_voxels: usize,
    pub status: Status,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub spec: SimulationSpec,
    pub rows: Vec<SimulationRow>,
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

/// False positives over ground-truth negatives within `region`.
pub fn fp_rate_within(pred: &Volume, gt: &Volume, region: &BoundingBox) -> f64 {
    let (mut fp, mut neg) = (0u64, 0u64);
    for i in region.min[0]..region.max[0] {
        for j in region.min[1]..region.max[1] {
            for k in region.min[2]..region.max[2] {
                if gt.get(i, j, k) == 0.0 {
                    neg += 1;
                    fp += (pred.get(i, j, k) != 0.0) as u64;
                }
            }
        }
    }
    if neg == 0 {
        0.0
    } else {
        fp as f64 / neg as f64
    }
}

pub fn run_simulation(spec: &SimulationSpec) -> Result<SimulationReport> {
    if spec.seeds == 0 {
        return Err(Error::invalid("simulation needs at least one seed"));
    }
    if spec.side < ModelId::A.row().window {
        return Err(Error::invalid(format!(
            "simulation side must be at least {}",
            ModelId::A.row().window
        )));
    }
    spec.noise.validate()?;
    let dims = [spec.side; 3];
    let mut rows = Vec::with_capacity(spec.seeds);
    for s in 0..spec.seeds {
        let lm = make_phantom_label_map(&mut derive_rng(spec.master_seed, "sim-phantom", s as u64), dims)?;
        let gt = Arc::new(brain_mask(&lm));
        let image = gt.as_ref().clone().with_kind(VolumeKind::Intensity)?;
        let mut cfg = CascadeConfig::with_models(|id| {
            let seed = derive_seed(spec.master_seed, "sim-model", (s * 4 + id as usize) as u64);
            make_noisy_oracle(gt.clone(), id.row().window, spec.noise.clone(), seed).map(|h| h.with_id(id.to_string()))
        })?;
        cfg.accumulate_mode = spec.accumulate_mode;
        cfg.conform_side = spec.side;

        // Single pass: the cascade's own Model A over the whole volume.
        let a = &cfg.bfs_stages[0];
        let plan = plan_windows_within(BoundingBox::full(dims), a.window, a.step, dims)?;
        let p = run_windows(&image, &plan, &a.model, spec.accumulate_mode)?;
        let single = threshold(&p, a.alpha)?;
        let single_rep = overlap_report(&single, &gt, [1.0; 3])?;

        let res = extract_conformed(&image, &cfg)?;
        let rep = overlap_report(&res.mask, &gt, [1.0; 3])?;
        let final_roi = res.roi_trace.last().map(|e| e.bbox);
        rows.push(SimulationRow {
            seed: s,
            single_dice: single_rep.dice,
            single_fp_rate: single_rep.fp_rate,
            cascade_dice: rep.dice,
            cascade_fp_rate: rep.fp_rate,
            cascade_roi_fp_rate: final_roi.map_or(0.0, |r| fp_rate_within(&res.mask, &gt, &r)),
            final_roi_voxels: final_roi.map_or(0, |r| r.voxel_count()),
            status: res.status,
        });
    }
    Ok(SimulationReport {
        spec: spec.clone(),
        rows,
    })
}

pub const SIM_CSV_HEADER: [&str; 8] = [
    "seed",
    "single_dice",
    "single_fp_rate",
    "cascade_dice",
    "cascade_fp_rate",
    "cascade_roi_fp_rate",
    "final_roi_voxels",
    "status",
];

impl SimulationReport {
    pub fn mean_single_dice(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.single_dice))
    }

    pub fn mean_cascade_dice(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.cascade_dice))
    }

    pub fn mean_single_fp_rate(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.single_fp_rate))
    }

    pub fn mean_cascade_roi_fp_rate(&self) -> f64 {
        mean(self.rows.iter().map(|r| r.cascade_roi_fp_rate))
    }

    /// Seeds on which the cascade scored a strictly higher Dice.
    pub fn cascade_wins(&self) -> usize {
        self.rows.iter().filter(|r| r.cascade_dice > r.single_dice).count()
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let to_err = |e: csv::Error| Error::invalid(format!("csv write failed: {e}"));
        w.write_record(SIM_CSV_HEADER).map_err(to_err)?;
        for r in &self.rows {
            w.write_record([
                r.seed.to_string(),
                format!("{:.6}", r.single_dice),
                format!("{:.6}", r.single_fp_rate),
                format!("{:.6}", r.cascade_dice),
                format!("{:.6}", r.cascade_fp_rate),
                format!("{:.6}", r.cascade_roi_fp_rate),
                r.final_roi_voxels.to_string(),
                match r.status {
                    Status::Ok => "ok".into(),
                    Status::NoBrainFound => "no_brain_found".into(),
                },
            ])
            .map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "seed  single_dice  single_fp  cascade_dice  cascade_roi_fp");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>4}  {:>11.4}  {:>9.4}  {:>12.4}  {:>14.4}",
                r.seed, r.single_dice, r.single_fp_rate, r.cascade_dice, r.cascade_roi_fp_rate
            );
        }
        let _ = writeln!(
            s,
            "mean  {:>11.4}  {:>9.4}  {:>12.4}  {:>14.4}",
            self.mean_single_dice(),
            self.mean_single_fp_rate(),
            self.mean_cascade_dice(),
            self.mean_cascade_roi_fp_rate()
        );
        let _ = writeln!(s, "cascade wins {}/{}", self.cascade_wins(), self.rows.len());
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_arms_are_exact() {
        let spec = SimulationSpec {
            seeds: 2,
            side: 128,
            noise: NoiseSpec::default(),
            ..Default::default()
        };
        let rep = run_simulation(&spec).unwrap();
        for r in &rep.rows {
            assert!(r.single_dice >= 0.99 && r.cascade_dice >= 0.99, "{r:?}");
        }
    }

    #[test]
    fn report_is_reproducible() {
        let spec = SimulationSpec {
            seeds: 1,
            side: 128,
            noise: NoiseSpec::per_voxel(0.1),
            master_seed: 5,
            ..Default::default()
        };
        let a = run_simulation(&spec).unwrap();
        let b = run_simulation(&spec).unwrap();
        assert_eq!(a, b);
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
    }
}
