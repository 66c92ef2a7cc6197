use std::ffi::{CStr, CString};
use std::ptr;

use brainex_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(bx_last_error_message()) }.to_string_lossy().into_owned()
}

/// A 64³ mask with a 20³ cube brain at (22..42).
fn cube_mask() -> Vec<f32> {
    let n = 64;
    let mut v = vec![0.0f32; n * n * n];
    for i in 22..42 {
        for j in 22..42 {
            for k in 22..42 {
                v[(i * n + j) * n + k] = 1.0;
            }
        }
    }
    v
}

unsafe fn new_volume(kind: BxVolumeKind, data: &[f32]) -> *mut BxVolume {
    let dims = [64usize; 3];
    let spacing = [1.0f64; 3];
    let mut out = ptr::null_mut();
    let st = bx_volume_new(dims.as_ptr(), spacing.as_ptr(), kind, data.as_ptr(), data.len(), &mut out);
    assert_eq!(st, BxStatus::Ok, "{}", last_error());
    out
}

#[test]
fn volume_roundtrip_and_dice() {
    let dir = tempfile::tempdir().unwrap();
    let path = CString::new(dir.path().join("m.nii").to_str().unwrap()).unwrap();
    unsafe {
        let m = new_volume(BxVolumeKind::Mask, &cube_mask());
        assert_eq!(bx_volume_write(m, path.as_ptr(), BxDataType::Uint8), BxStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(bx_volume_read(path.as_ptr(), &mut back), BxStatus::Ok);
        let mut dims = [0usize; 3];
        let mut sp = [0f64; 3];
        assert_eq!(bx_volume_shape(back, dims.as_mut_ptr(), sp.as_mut_ptr()), BxStatus::Ok);
        assert_eq!((dims, sp), ([64; 3], [1.0; 3]));
        let mut len = 0;
        let data = bx_volume_data(back, &mut len);
        assert_eq!(std::slice::from_raw_parts(data, len), &cube_mask()[..]);
        let mut d = 0.0;
        assert_eq!(bx_dice(m, back, &mut d), BxStatus::Ok);
        assert_eq!(d, 1.0);
        bx_volume_free(m);
        bx_volume_free(back);
    }
}

#[test]
fn errors_map_to_codes() {
    unsafe {
        let missing = CString::new("/definitely/not/here.nii").unwrap();
        let mut out = ptr::null_mut();
        assert_eq!(bx_volume_read(missing.as_ptr(), &mut out), BxStatus::Io);
        assert!(last_error().contains("/definitely/not/here.nii"));
        assert!(out.is_null());

        assert_eq!(bx_volume_read(ptr::null(), &mut out), BxStatus::NullPointer);
        let mut d = 0.0;
        assert_eq!(bx_dice(ptr::null(), ptr::null(), &mut d), BxStatus::NullPointer);

        // values outside {0, 1} are not a mask
        let bad = vec![2.0f32; 64 * 64 * 64];
        let (dims, sp) = ([64usize; 3], [1.0f64; 3]);
        let st = bx_volume_new(dims.as_ptr(), sp.as_ptr(), BxVolumeKind::Mask, bad.as_ptr(), bad.len(), &mut out);
        assert_eq!(st, BxStatus::InvalidArgument);

        let a = new_volume(BxVolumeKind::Mask, &cube_mask());
        let small = [8usize; 3];
        let mut b = ptr::null_mut();
        assert_eq!(bx_volume_new(small.as_ptr(), sp.as_ptr(), BxVolumeKind::Mask, ptr::null(), 0, &mut b), BxStatus::Ok);
        assert_eq!(bx_dice(a, b, &mut d), BxStatus::DimMismatch);
        bx_volume_free(a);
        bx_volume_free(b);

        let cfg = CString::new("{\"schema_version\": 9, \"models\": {}}").unwrap();
        let img = new_volume(BxVolumeKind::Intensity, &cube_mask());
        let mut res = ptr::null_mut();
        assert_eq!(bx_extract(img, cfg.as_ptr(), ptr::null(), 0, &mut res), BxStatus::Config);
        bx_volume_free(img);
        bx_volume_free(ptr::null_mut());
        bx_result_free(ptr::null_mut());
    }
}

#[test]
fn plan_counts() {
    let mut n = 0;
    unsafe {
        assert_eq!(bx_plan_count([192usize; 3].as_ptr(), 128, 64, &mut n), BxStatus::Ok);
        assert_eq!(n, 8);
        assert_eq!(bx_plan_count([192usize; 3].as_ptr(), 96, 32, &mut n), BxStatus::Ok);
        assert_eq!(n, 64);
        assert_eq!(bx_plan_count([192usize; 3].as_ptr(), 32, 64, &mut n), BxStatus::InvalidArgument);
    }
}

#[test]
fn oracle_extraction_through_the_abi() {
    let dir = tempfile::tempdir().unwrap();
    let gt_path = dir.path().join("gt.nii");
    let gt_c = CString::new(gt_path.to_str().unwrap()).unwrap();
    let base = CString::new(dir.path().to_str().unwrap()).unwrap();
    let models: Vec<String> = ["A", "B", "C", "D"]
        .iter()
        .map(|m| format!("\"{m}\": {{\"backend\": {{\"kind\": \"oracle\", \"gt\": \"gt.nii\"}}}}"))
        .collect();
    let cfg = CString::new(format!(
        "{{\"schema_version\": 1, \"conform\": {{\"side\": 128, \"spacing\": 1.0}}, \"models\": {{{}}}}}",
        models.join(",")
    ))
    .unwrap();
    unsafe {
        let gt = new_volume(BxVolumeKind::Mask, &cube_mask());
        assert_eq!(bx_volume_write(gt, gt_c.as_ptr(), BxDataType::Uint8), BxStatus::Ok);
        let img = new_volume(BxVolumeKind::Intensity, &cube_mask());
        let mut res = ptr::null_mut();
        let st = bx_extract(img, cfg.as_ptr(), base.as_ptr(), 1, &mut res);
        assert_eq!(st, BxStatus::Ok, "{}", last_error());

        let mut status = BxExtractStatus::NoBrainFound;
        assert_eq!(bx_result_status(res, &mut status), BxStatus::Ok);
        assert_eq!(status, BxExtractStatus::Ok);
        assert_eq!(bx_result_roi_count(res), 4);
        let (mut lo, mut hi) = ([0usize; 3], [0usize; 3]);
        assert_eq!(bx_result_roi(res, 3, lo.as_mut_ptr(), hi.as_mut_ptr()), BxStatus::Ok);
        // 64³ conformed into 128³ shifts by 32
        assert_eq!((lo, hi), ([54; 3], [74; 3]));
        assert_eq!(bx_result_roi(res, 4, lo.as_mut_ptr(), hi.as_mut_ptr()), BxStatus::InvalidArgument);

        let mut mask = ptr::null_mut();
        assert_eq!(bx_result_mask(res, &mut mask), BxStatus::Ok);
        let mut d = 0.0;
        assert_eq!(bx_dice(mask, gt, &mut d), BxStatus::Ok);
        assert_eq!(d, 1.0);
        for p in [gt, img, mask] {
            bx_volume_free(p);
        }
        bx_result_free(res);
    }
}

#[test]
fn version_is_semver() {
    let v = unsafe { CStr::from_ptr(bx_version()) }.to_str().unwrap();
    assert_eq!(v.split('.').count(), 3);
}
