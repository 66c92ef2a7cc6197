use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::{make_phantom_label_map, make_training_pair, PairRecord, SynthesisParams, TrainingPair};
use crate::error::{Error, Result};
use crate::nifti::{write_nifti, DataType};
use crate::seed::derive_rng;
use crate::volume::{Volume, VolumeKind};

/// Side of the phantom label maps drawn when no label map is supplied.
pub const PHANTOM_SIDE: usize = 160;

#[derive(Debug, Clone)]
pub enum LabelSource {
    /// A fresh random phantom per pair.
    Phantom,
    LabelMap(Volume),
}

/// Writes `image_####.nii` (float32), `mask_####.nii` (uint8) and
/// `params_####.json` into `dir`.
pub fn write_pair(pair: &TrainingPair, index: usize, dir: &Path) -> Result<[PathBuf; 3]> {
    let image = dir.join(format!("image_{index:04}.nii"));
    let mask = dir.join(format!("mask_{index:04}.nii"));
    let params = dir.join(format!("params_{index:04}.json"));
    write_nifti(&pair.image, &image, DataType::Float32)?;
    write_nifti(&pair.gt, &mask, DataType::Uint8)?;
    let json = serde_json::to_vec_pretty(&pair.record).map_err(|e| Error::invalid(e.to_string()))?;
    fs::write(&params, json).map_err(|e| Error::io(&params, e))?;
    Ok([image, mask, params])
}

/// Generates `count` pairs, each from its own stream derived from `seed`, so
/// the output does not depend on the thread count. Records come back in index
/// order.
pub fn generate_batch(
    source: &LabelSource,
    params: &SynthesisParams,
    count: usize,
    seed: u64,
    outdir: &Path,
) -> Result<Vec<PairRecord>> {
    params.validate()?;
    if let LabelSource::LabelMap(lm) = source {
        if lm.kind() != VolumeKind::Label {
            return Err(Error::invalid("label source must be a label map"));
        }
    }
    fs::create_dir_all(outdir).map_err(|e| Error::io(outdir, e))?;
    (0..count)
        .into_par_iter()
        .map(|i| {
            let phantom;
            let lm = match source {
                LabelSource::LabelMap(lm) => lm,
                LabelSource::Phantom => {
                    let mut rng = derive_rng(seed, "synth-phantom", i as u64);
                    phantom = make_phantom_label_map(&mut rng, [PHANTOM_SIDE; 3])?;
                    &phantom
                }
            };
            let mut rng = derive_rng(seed, "synth-pair", i as u64);
            let mut pair = make_training_pair(lm, params, &mut rng)?;
            pair.record.seed = Some(seed);
            write_pair(&pair, i, outdir)?;
            Ok(pair.record)
        })
        .collect()
}
