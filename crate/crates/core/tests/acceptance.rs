//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::Rng as _;

use brainex::cascade::{conform, extract_brain, BfsCombine, CascadeConfig, ExtractionResult, StageSpec};
use brainex::defaults::{ModelId, ALPHA, BFS_MODELS, DFS_MODELS, MODEL_TABLE};
use brainex::metrics::{dice, overlap_report, soft_dice};
use brainex::morphology::{connected_components, majority_vote, Connectivity};
use brainex::nifti::{decode, encode, read_nifti, DataType};
use brainex::predictor::{make_noisy_oracle, make_oracle, NoiseSpec};
use brainex::seed::{derive_rng, rng_from, Rng};
use brainex::simulate::{run_simulation, SimulationSpec};
use brainex::synth::{brain_mask, generate_batch, make_phantom_label_map, LabelSource, SynthesisParams};
use brainex::windowing::{axis_origins, coverage_counts, plan_windows, AccumulateMode};
use brainex::{BoundingBox, Volume, VolumeKind};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn oracle_config(gt: Arc<Volume>) -> brainex::Result<CascadeConfig> {
    CascadeConfig::with_models(|id| make_oracle(gt.clone(), id.row().window))
}

// 1 ------------------------------------------------------------------------

fn oracle_end_to_end() -> Check {
    let mut worst = f64::INFINITY;
    let mut slowest = Duration::ZERO;
    for i in 0..20u64 {
        let lm = make_phantom_label_map(&mut derive_rng(1, "acceptance-oracle", i), [192; 3]).map_err(|e| e.to_string())?;
        let gt = Arc::new(brain_mask(&lm));
        let image = gt.as_ref().clone().with_kind(VolumeKind::Intensity).unwrap();
        let cfg = oracle_config(gt.clone()).map_err(|e| e.to_string())?;
        let t = Instant::now();
        let res = extract_brain(&image, &cfg).map_err(|e| e.to_string())?;
        let took = t.elapsed();
        let d = dice(&res.mask, &gt).unwrap();
        worst = worst.min(d);
        slowest = slowest.max(took);
        ensure!(d >= 0.99, "phantom {i}: Dice {d:.4} < 0.99");
        ensure!(took <= Duration::from_secs(30), "phantom {i}: {took:?} > 30 s");
    }
    Ok(format!("20 phantoms, min Dice {worst:.4}, slowest {:.2} s", slowest.as_secs_f64()))
}

// 2 ------------------------------------------------------------------------

fn false_positive_suppression() -> Check {
    let p = 0.1;
    let expected = 3.0 * p * p * (1.0 - p) + p * p * p;
    let rep = run_simulation(&SimulationSpec::default()).map_err(|e| e.to_string())?;
    let fp = rep.mean_cascade_roi_fp_rate();
    let wins = rep.cascade_wins();
    let detail = format!(
        "ROI FP rate {fp:.4} (expected {expected:.3} ± 0.005); mean Dice single {:.4} vs cascade {:.4}; cascade wins {wins}/{}",
        rep.mean_single_dice(),
        rep.mean_cascade_dice(),
        rep.rows.len()
    );
    ensure!((fp - expected).abs() <= 0.005, "{detail}");
    ensure!(wins >= 18, "{detail}");
    ensure!(rep.mean_cascade_dice() > rep.mean_single_dice(), "{detail}");
    Ok(detail)
}

// 3 ------------------------------------------------------------------------

fn plan_coverage() -> Check {
    let mut rng = rng_from(3);
    let mut full_3d = 0;
    for case in 0..1000 {
        let ext: [usize; 3] = [0, 1, 2].map(|_| rng.random_range(32..=256));
        let w = rng.random_range(8..=*ext.iter().min().unwrap());
        let s = rng.random_range(1..=w);
        // plans are Cartesian products of per-axis origins
        for (a, &e) in ext.iter().enumerate() {
            let o = axis_origins(0, e, w, s);
            let mut cover = vec![0u32; e];
            for &x in &o {
                for v in x.max(0)..(x + w as i64).min(e as i64) {
                    cover[v as usize] += 1;
                }
            }
            ensure!(cover.iter().all(|&c| c >= 1), "case {case} axis {a}: uncovered voxel (e={e} w={w} s={s})");
            let last = *o.last().unwrap();
            ensure!(last + w as i64 >= e as i64, "case {case} axis {a}: last origin {last} + {w} < {e}");
        }
        let plan = plan_windows(BoundingBox::full(ext), w, s).map_err(|e| e.to_string())?;
        let per_axis: usize = ext.iter().map(|&e| axis_origins(0, e, w, s).len()).product();
        ensure!(plan.len() == per_axis, "case {case}: plan size {} != {per_axis}", plan.len());
        if plan.len() <= 512 {
            ensure!(
                coverage_counts(&plan).data().iter().all(|&c| c >= 1.0),
                "case {case}: 3-D coverage hole"
            );
            full_3d += 1;
        }
    }
    Ok(format!("1000 cases, {full_3d} also checked voxel-by-voxel in 3-D"))
}

// 4 ------------------------------------------------------------------------

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

fn fingerprint(res: &ExtractionResult) -> Vec<u8> {
    let mut out = encode(&res.mask, DataType::Uint8).unwrap();
    out.extend(serde_json::to_vec(&res.roi_trace).unwrap());
    for (name, m) in &res.stage_masks {
        out.extend(name.as_bytes());
        out.extend(m.data().iter().flat_map(|v| v.to_bits().to_le_bytes()));
    }
    out
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

fn determinism() -> Check {
    let lm = make_phantom_label_map(&mut rng_from(40), [176, 160, 72]).unwrap();
    let native = brain_mask(&lm).with_spacing([1.0, 1.0, 2.5]).unwrap();
    let image = native.clone().with_kind(VolumeKind::Intensity).unwrap();
    let gt = Arc::new(conform(&native, 192, 1.0).unwrap());

    let noisy = |noise: NoiseSpec| {
        let gt = gt.clone();
        CascadeConfig::with_models(move |id| make_noisy_oracle(gt.clone(), id.row().window, noise.clone(), 100 + id as u64))
    };
    let mut blobs = NoiseSpec::per_voxel(0.1);
    blobs.fp_blob_rate = 1.0;
    blobs.fn_hole_rate = 0.5;
    let mut mean_cfg = noisy(NoiseSpec::per_voxel(0.05)).unwrap();
    mean_cfg.accumulate_mode = AccumulateMode::Mean;
    mean_cfg.bfs_combine = BfsCombine::Intersection;
    mean_cfg.connectivity = Connectivity::Six;
    let extract_cfgs = [
        ("oracle, anisotropic input", oracle_config(gt.clone()).unwrap()),
        ("noisy oracle, flips + blobs + holes", noisy(blobs).unwrap()),
        ("noisy oracle, mean / intersection / 6-conn", mean_cfg),
    ];
    for (name, cfg) in &extract_cfgs {
        let runs: Vec<Vec<u8>> = [1, 1, 8, 8]
            .into_iter()
            .map(|t| in_pool(t, || fingerprint(&extract_brain(&image, cfg).unwrap())))
            .collect();
        ensure!(runs.iter().all(|r| r == &runs[0]), "extract `{name}` differs across runs/threads");
    }

    let small_lm = make_phantom_label_map(&mut rng_from(41), [64; 3]).unwrap();
    let synth_cfgs = [
        ("synth A from phantoms", LabelSource::Phantom, SynthesisParams::for_model(ModelId::A), 3, 11),
        ("synth D from a label map", LabelSource::LabelMap(small_lm), SynthesisParams::for_model(ModelId::D), 4, 12),
    ];
    let tmp = tempfile::tempdir().unwrap();
    for (n, (name, src, params, count, seed)) in synth_cfgs.iter().enumerate() {
        let mut runs = Vec::new();
        for (r, t) in [1, 1, 8, 8].into_iter().enumerate() {
            let dir = tmp.path().join(format!("{n}-{r}"));
            in_pool(t, || generate_batch(src, params, *count, *seed, &dir)).map_err(|e| e.to_string())?;
            runs.push(dir_bytes(&dir));
        }
        ensure!(runs[0].len() == count * 3, "{name}: expected {} files", count * 3);
        ensure!(runs.iter().all(|r| r == &runs[0]), "synth `{name}` differs across runs/threads");
    }
    Ok("5 configurations bit-identical over 2 runs × {1, 8} threads".into())
}

// 5 ------------------------------------------------------------------------

fn table_fidelity() -> Check {
    // window, shapes, shift mm, rotation deg, scale, blur SD mm, noise SD
    let published: [(usize, usize, f64, f64, f64, f64, f64); 4] = [
        (128, 24, 48.0, 180.0, 0.6, 0.6, 0.40),
        (96, 24, 32.0, 180.0, 0.4, 0.4, 0.20),
        (64, 24, 12.0, 180.0, 0.4, 0.2, 0.15),
        (32, 8, 6.0, 180.0, 0.3, 0.1, 0.15),
    ];
    let steps = [64, 32, 32, 32];
    let mut checked = 0;
    for (i, id) in ModelId::ALL.into_iter().enumerate() {
        let p = SynthesisParams::for_model(id);
        let (w, n, sh, rot, sc, bl, no) = published[i];
        let got = (p.window, p.n_shapes, p.shift_max, p.rot_max, p.scale_max, p.blur_sd_max, p.noise_sd_max);
        ensure!(got == (w, n, sh, rot, sc, bl, no), "model {id}: {got:?} != {:?}", published[i]);
        checked += 7;
        let gt = Arc::new(Volume::zeros([8; 3], [1.0; 3], VolumeKind::Mask).unwrap());
        let stage = StageSpec::for_model(id, make_oracle(gt, w).unwrap()).unwrap();
        ensure!(stage.window == w && stage.step == steps[i], "model {id}: stage {}/{}", stage.window, stage.step);
        ensure!(stage.alpha == ALPHA && ALPHA == 0.2, "model {id}: alpha {}", stage.alpha);
        ensure!(MODEL_TABLE[i].step == steps[i], "model {id}: table step");
    }
    ensure!(BFS_MODELS == [ModelId::A, ModelId::D], "localization models {BFS_MODELS:?}");
    ensure!(DFS_MODELS == [ModelId::B, ModelId::C, ModelId::D], "refinement models {DFS_MODELS:?}");
    Ok(format!("{checked} values, steps 64/32/32/32, alpha 0.2"))
}

// 6 ------------------------------------------------------------------------

fn bernoulli_mask(rng: &mut Rng, dims: [usize; 3], density: f64) -> Volume {
    let data = (0..dims.iter().product()).map(|_| rng.random_bool(density) as u8 as f32).collect();
    Volume::from_vec(dims, [1.0; 3], VolumeKind::Mask, data).unwrap()
}

fn random_mask(rng: &mut Rng, max: usize) -> Volume {
    let dims = [0, 1, 2].map(|_| rng.random_range(1..=max));
    let density = rng.random_range(0.05..0.7);
    bernoulli_mask(rng, dims, density)
}

/// Reference labeling by breadth-first flood fill in scan order.
fn brute_labels(m: &Volume, conn: Connectivity) -> Vec<u32> {
    let d = m.dims().map(|x| x as i64);
    let reach = if conn == Connectivity::Six { 1 } else { 3 };
    let mut labels = vec![0u32; m.len()];
    let mut next = 0;
    for start in 0..m.len() {
        if labels[start] != 0 || m.data()[start] == 0.0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        let mut queue = std::collections::VecDeque::from([start]);
        while let Some(idx) = queue.pop_front() {
            let p = m.coords(idx).map(|x| x as i64);
            for di in -1..=1i64 {
                for dj in -1..=1i64 {
                    for dk in -1..=1i64 {
                        let l1 = di.abs() + dj.abs() + dk.abs();
                        let q = [p[0] + di, p[1] + dj, p[2] + dk];
                        if l1 == 0 || l1 > reach || (0..3).any(|a| q[a] < 0 || q[a] >= d[a]) {
                            continue;
                        }
                        let qi = m.index(q[0] as usize, q[1] as usize, q[2] as usize);
                        if labels[qi] == 0 && m.data()[qi] != 0.0 {
                            labels[qi] = next;
                            queue.push_back(qi);
                        }
                    }
                }
            }
        }
    }
    labels
}

fn morphology_equivalence() -> Check {
    let mut rng = rng_from(6);
    for case in 0..200 {
        let m = random_mask(&mut rng, 16);
        for conn in [Connectivity::Six, Connectivity::TwentySix] {
            let got = connected_components(&m, conn).map_err(|e| e.to_string())?;
            let want = brute_labels(&m, conn);
            let got_labels: Vec<u32> = got.labels.data().iter().map(|&v| v as u32).collect();
            ensure!(got_labels == want, "case {case} {conn:?}: labels differ");
            let k = want.iter().copied().max().unwrap_or(0) as usize;
            let mut sizes = vec![0usize; k];
            for &l in want.iter().filter(|&&l| l > 0) {
                sizes[l as usize - 1] += 1;
            }
            ensure!(got.sizes == sizes, "case {case} {conn:?}: sizes differ");
        }

        let n = rng.random_range(1..=5);
        let masks: Vec<Volume> = (0..n).map(|_| bernoulli_mask(&mut rng, m.dims(), 0.5)).collect();
        let refs: Vec<&Volume> = masks.iter().collect();
        let vote = majority_vote(&refs).map_err(|e| e.to_string())?;
        for i in 0..m.len() {
            let yes = masks.iter().filter(|v| v.data()[i] != 0.0).count();
            ensure!((vote.data()[i] != 0.0) == (2 * yes > n), "case {case}: vote wrong at {i} ({yes}/{n})");
        }
    }
    Ok("200 masks up to 16³, 6- and 26-connectivity, votes over 1–5 masks".into())
}

// 7 ------------------------------------------------------------------------

fn metric_identities() -> Check {
    let mut rng = rng_from(7);
    let cases = 2000;
    for case in 0..cases {
        let a = random_mask(&mut rng, 12);
        let b = match case % 4 {
            0 => a.clone(),
            1 => {
                // a single flipped voxel
                let mut b = a.clone();
                let i = rng.random_range(0..a.len());
                let c = b.coords(i);
                b.set(c[0], c[1], c[2], 1.0 - a.data()[i]);
                b
            }
            _ => bernoulli_mask(&mut rng, a.dims(), 0.3),
        };
        let dab = dice(&a, &b).unwrap();
        let dba = dice(&b, &a).unwrap();
        ensure!(dab == dba, "case {case}: asymmetric {dab} vs {dba}");
        ensure!((0.0..=1.0).contains(&dab), "case {case}: out of range {dab}");
        ensure!((dab == 1.0) == (a.data() == b.data()), "case {case}: dice={dab} but equality={}", a.data() == b.data());
        let sd = soft_dice(&a, &b, 0.0).unwrap();
        ensure!((sd - dab).abs() < 1e-12, "case {case}: soft {sd} vs hard {dab}");
        let r = overlap_report(&a, &b, [1.0; 3]).unwrap();
        ensure!((r.dice - dab).abs() < 1e-12, "case {case}: report Dice mismatch");
    }
    Ok(format!("{cases} random mask pairs"))
}

// 8 ------------------------------------------------------------------------

fn header(dims: &[i16], datatype: i16, bitpix: i16, pixdim: &[f32], vox_offset: f32, slope: f32, inter: f32) -> Vec<u8> {
    let mut b = vec![0u8; vox_offset as usize];
    b[0..4].copy_from_slice(&348i32.to_le_bytes());
    b[40..42].copy_from_slice(&(dims.len() as i16).to_le_bytes());
    for a in 0..7 {
        let d = dims.get(a).copied().unwrap_or(1);
        b[42 + 2 * a..44 + 2 * a].copy_from_slice(&d.to_le_bytes());
    }
    b[70..72].copy_from_slice(&datatype.to_le_bytes());
    b[72..74].copy_from_slice(&bitpix.to_le_bytes());
    for a in 0..8 {
        let p = if a == 0 { 1.0 } else { pixdim.get(a - 1).copied().unwrap_or(1.0) };
        b[76 + 4 * a..80 + 4 * a].copy_from_slice(&p.to_le_bytes());
    }
    b[108..112].copy_from_slice(&vox_offset.to_le_bytes());
    b[112..116].copy_from_slice(&slope.to_le_bytes());
    b[116..120].copy_from_slice(&inter.to_le_bytes());
    b[344..348].copy_from_slice(b"n+1\0");
    b
}

fn nifti_roundtrip() -> Check {
    let mut rng = rng_from(8);
    for case in 0..60 {
        let dims = [0, 1, 2].map(|_| rng.random_range(1..=20));
        let sp = [0, 1, 2].map(|_| rng.random_range(0.3..4.0f32) as f64);
        let (dt, kind, hi) = match case % 3 {
            0 => (DataType::Uint8, VolumeKind::Label, 255),
            1 => (DataType::Int16, VolumeKind::Label, 32767),
            _ => (DataType::Float32, VolumeKind::Intensity, 0),
        };
        let data = (0..dims.iter().product())
            .map(|_| if hi > 0 { rng.random_range(0..=hi) as f32 } else { rng.random_range(-1e6f32..1e6) })
            .collect();
        let v = Volume::from_vec(dims, sp, kind, data).unwrap();
        let back = decode(&encode(&v, dt).unwrap(), kind).map_err(|e| e.to_string())?;
        ensure!(back.dims() == dims && back.spacing() == sp, "case {case}: geometry {:?} {:?}", back.dims(), back.spacing());
        ensure!(back.data() == v.data(), "case {case}: {dt:?} voxels differ");
    }

    // uint8 2x3x4, anisotropic, file order x fastest
    let mut b = header(&[2, 3, 4], 2, 8, &[0.5, 0.75, 2.0], 352.0, 0.0, 0.0);
    b.extend((0..24u8).map(|v| v * 10));
    let v = decode(&b, VolumeKind::Label).map_err(|e| e.to_string())?;
    ensure!(v.dims() == [2, 3, 4] && v.spacing() == [0.5, 0.75, 2.0], "uint8 fixture geometry");
    for (x, y, z) in [(0, 0, 0), (1, 0, 0), (0, 1, 0), (1, 2, 3), (0, 2, 1)] {
        let want = ((x + 2 * (y + 3 * z)) * 10) as f32;
        ensure!(v.get(x, y, z) == want, "uint8 fixture voxel ({x},{y},{z}) = {}", v.get(x, y, z));
    }
    // same bytes, gzipped, through the file reader
    let tmp = tempfile::tempdir().unwrap();
    let gz = tmp.path().join("fixture.nii.gz");
    let mut enc = flate2::write::GzEncoder::new(fs::File::create(&gz).unwrap(), flate2::Compression::default());
    enc.write_all(&b).unwrap();
    enc.finish().unwrap();
    ensure!(read_nifti(&gz).map_err(|e| e.to_string())?.data() == v.data(), "gzip fixture differs");

    // int16 with scaling and an extension gap before the data
    let mut b = header(&[3, 1, 2], 4, 16, &[1.0, 1.0, 1.0], 400.0, 2.0, -1.0);
    for raw in [-3i16, 0, 7, 100, -32768, 32767] {
        b.extend(raw.to_le_bytes());
    }
    let v = decode(&b, VolumeKind::Intensity).map_err(|e| e.to_string())?;
    let want = [-7.0f32, -1.0, 13.0, 199.0, -65537.0, 65533.0];
    for (n, w) in want.iter().enumerate() {
        let (x, z) = (n % 3, n / 3);
        ensure!(v.get(x, 0, z) == *w, "int16 fixture voxel {n} = {}", v.get(x, 0, z));
    }

    // float32, 4-D header with a singleton time axis
    let mut b = header(&[2, 2, 1, 1], 16, 32, &[1.5, 1.5, 3.0, 2.0], 352.0, 1.0, 0.0);
    for f in [0.25f32, -1.5, 3.0e-7, 1.0e20] {
        b.extend(f.to_le_bytes());
    }
    let v = decode(&b, VolumeKind::Intensity).map_err(|e| e.to_string())?;
    ensure!(v.dims() == [2, 2, 1] && v.spacing() == [1.5, 1.5, 3.0], "float fixture geometry");
    ensure!(v.get(1, 0, 0) == -1.5 && v.get(1, 1, 0) == 1.0e20, "float fixture voxels");

    // writer emits the documented header fields
    let out = encode(&Volume::zeros([4, 5, 6], [0.5, 1.0, 2.5], VolumeKind::Mask).unwrap(), DataType::Uint8).unwrap();
    let i16_at = |o: usize| i16::from_le_bytes([out[o], out[o + 1]]);
    let f32_at = |o: usize| f32::from_le_bytes(out[o..o + 4].try_into().unwrap());
    ensure!(i32::from_le_bytes(out[0..4].try_into().unwrap()) == 348, "sizeof_hdr");
    ensure!((i16_at(40), i16_at(42), i16_at(44), i16_at(46)) == (3, 4, 5, 6), "dim field");
    ensure!((i16_at(70), i16_at(72)) == (2, 8), "datatype/bitpix");
    ensure!((f32_at(80), f32_at(84), f32_at(88)) == (0.5, 1.0, 2.5), "pixdim");
    ensure!(f32_at(108) == 352.0 && &out[344..348] == b"n+1\0", "vox_offset/magic");
    ensure!(out.len() == 352 + 120, "file length {}", out.len());

    // rejected inputs
    let mut be = header(&[2, 2, 2], 2, 8, &[1.0; 3], 352.0, 0.0, 0.0);
    be[0..4].copy_from_slice(&348i32.to_be_bytes());
    ensure!(decode(&be, VolumeKind::Label).is_err(), "big-endian accepted");
    let mut pair = header(&[2, 2, 2], 2, 8, &[1.0; 3], 352.0, 0.0, 0.0);
    pair[344..348].copy_from_slice(b"ni1\0");
    ensure!(decode(&pair, VolumeKind::Label).is_err(), "two-file magic accepted");
    let short = header(&[2, 2, 2], 2, 8, &[1.0; 3], 352.0, 0.0, 0.0);
    ensure!(decode(&short, VolumeKind::Label).is_err(), "truncated payload accepted");
    Ok("60 random uint8/int16/float32 round trips, 3 hand-built headers + gzip, 3 rejections".into())
}

// 9 ------------------------------------------------------------------------

fn preprocessing_conformance() -> Check {
    let dims = [256, 256, 60];
    let sp = [1.0, 1.0, 3.0];
    // ellipsoid off-centre, in voxel units of each axis
    let c = [120.0, 140.0, 27.0];
    let r = [45.0, 38.0, 13.0];
    let img = Volume::from_fn(dims, sp, VolumeKind::Intensity, |i, j, k| {
        let u = [i as f64, j as f64, k as f64];
        let d: f64 = (0..3).map(|a| ((u[a] - c[a]) / r[a]).powi(2)).sum();
        if d <= 1.0 {
            0.8
        } else {
            0.0
        }
    })
    .unwrap();
    let native = img.centroid().unwrap();
    let out = conform(&img, 192, 1.0).map_err(|e| e.to_string())?;
    ensure!(out.dims() == [192; 3] && out.spacing() == [1.0; 3], "got {:?} at {:?}", out.dims(), out.spacing());
    let binary = Volume::from_vec(
        out.dims(),
        out.spacing(),
        VolumeKind::Mask,
        out.data().iter().map(|&v| (v >= 0.4) as u8 as f32).collect(),
    )
    .unwrap();
    let got = binary.centroid().ok_or("brain vanished")?;
    // voxel centre x·s + s/2 in mm, back to 1 mm indices, then the symmetric crop/pad shift
    let mut err2 = 0.0;
    let mut expected = [0.0; 3];
    for a in 0..3 {
        let mm = (native[a] + 0.5) * sp[a];
        let iso_len = (dims[a] as f64 * sp[a]).round();
        let diff = 192.0 - iso_len;
        let shift = if diff >= 0.0 { (diff / 2.0).floor() } else { -((-diff) / 2.0).floor() };
        expected[a] = mm - 0.5 + shift;
        err2 += (got[a] - expected[a]).powi(2);
    }
    let err = err2.sqrt();
    let detail = format!("centroid {got:.2?} vs analytic {expected:.2?}, error {err:.3} voxels");
    ensure!(err < 2.0, "{detail}");
    Ok(detail)
}

fn main() {
    let criteria: [(&str, fn() -> Check); 9] = [
        ("oracle end-to-end", oracle_end_to_end),
        ("false-positive suppression", false_positive_suppression),
        ("window-plan coverage", plan_coverage),
        ("determinism", determinism),
        ("model table fidelity", table_fidelity),
        ("morphology vs brute force", morphology_equivalence),
        ("metric identities", metric_identities),
        ("NIfTI round trip and fixtures", nifti_roundtrip),
        ("preprocessing conformance", preprocessing_conformance),
    ];
    let mut failed = 0;
    for (n, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("PASS {}: {name} — {d} [{secs:.1} s]", n + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL {}: {name} — {d} [{secs:.1} s]", n + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
