//! Overlap metrics between predicted and reference masks.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::Volume;

pub const DEFAULT_SMOOTH: f64 = 1e-6;

fn same_dims(a: &Volume, b: &Volume) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimMismatch {
            left: a.dims(),
            right: b.dims(),
        });
    }
    Ok(())
}

/// Dice overlap `2|A∩B| / (|A| + |B|)`; two empty masks score 1.
pub fn dice(a: &Volume, b: &Volume) -> Result<f64> {
    same_dims(a, b)?;
    let (mut inter, mut na, mut nb) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.data().iter().zip(b.data()) {
        let (x, y) = (x != 0.0, y != 0.0);
        na += x as usize;
        nb += y as usize;
        inter += (x && y) as usize;
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (na + nb) as f64)
}

/// `(2 Σ p·g + smooth) / (Σ p + Σ g + smooth)`. The training loss is `1 - soft_dice`.
pub fn soft_dice(p: &Volume, g: &Volume, smooth: f64) -> Result<f64> {
    same_dims(p, g)?;
    if !(smooth >= 0.0) {
        return Err(Error::invalid(format!("smooth must be non-negative, got {smooth}")));
    }
    let (mut pg, mut sp, mut sg) = (0f64, 0f64, 0f64);
    for (&x, &y) in p.data().iter().zip(g.data()) {
        let (x, y) = (x as f64, y as f64);
        pg += x * y;
        sp += x;
        sg += y;
    }
    let den = sp + sg + smooth;
    if den == 0.0 {
        return Ok(1.0);
    }
    Ok((2.0 * pg + smooth) / den)
}

pub fn soft_dice_loss(p: &Volume, g: &Volume, smooth: f64) -> Result<f64> {
    Ok(1.0 - soft_dice(p, g, smooth)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapReport {
    pub dice: f64,
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// False positives over ground-truth-negative voxels.
    pub fp_rate: f64,
    pub gt_voxels: u64,
    pub pred_voxels: u64,
    pub gt_mm3: f64,
    pub pred_mm3: f64,
}

pub fn overlap_report(pred: &Volume, gt: &Volume, spacing: [f64; 3]) -> Result<OverlapReport> {
    same_dims(pred, gt)?;
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (&p, &g) in pred.data().iter().zip(gt.data()) {
        match (p != 0.0, g != 0.0) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let total = pred.len() as u64;
    let negatives = total - tp - fn_;
    let voxel_mm3 = spacing.iter().product::<f64>();
    let den = 2 * tp + fp + fn_;
    Ok(OverlapReport {
        dice: if den == 0 { 1.0 } else { 2.0 * tp as f64 / den as f64 },
        tp,
        fp,
        fn_,
        fp_rate: if negatives == 0 { 0.0 } else { fp as f64 / negatives as f64 },
        gt_voxels: tp + fn_,
        pred_voxels: tp + fp,
        gt_mm3: (tp + fn_) as f64 * voxel_mm3,
        pred_mm3: (tp + fp) as f64 * voxel_mm3,
    })
}

pub const CSV_HEADER: [&str; 10] = [
    "id", "dice", "tp", "fp", "fn", "fp_rate", "gt_voxels", "pred_voxels", "gt_mm3", "pred_mm3",
];

impl OverlapReport {
    pub fn csv_header() -> &'static [&'static str] {
        &CSV_HEADER
    }

    pub fn csv_record(&self, id: &str) -> Vec<String> {
        vec![
            id.to_string(),
            format!("{:.6}", self.dice),
            self.tp.to_string(),
            self.fp.to_string(),
            self.fn_.to_string(),
            format!("{:.6}", self.fp_rate),
            self.gt_voxels.to_string(),
            self.pred_voxels.to_string(),
            format!("{:.3}", self.gt_mm3),
            format!("{:.3}", self.pred_mm3),
        ]
    }

    /// Appends one row to `out`, writing the header first when `with_header`.
    pub fn write_csv_row(&self, id: &str, out: impl Write, with_header: bool) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        let to_err = |e: csv::Error| Error::invalid(format!("csv write failed: {e}"));
        if with_header {
            w.write_record(Self::csv_header()).map_err(to_err)?;
        }
        w.write_record(self.csv_record(id)).map_err(to_err)?;
        w.flush().map_err(|e| Error::io("<csv>", e))
    }
}
