//! C ABI over the brainex library.
//!
//! Volumes and extraction results are opaque heap handles owned by the caller
//! and released with the matching `*_free`. Every fallible call returns a
//! [`BxStatus`]; on failure, [`bx_last_error_message`] describes the error
//! for the calling thread. Panics never cross the boundary; they surface as
//! `BX_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use brainex::cascade::{extract_brain, restore_native_grid, Status};
use brainex::config::PipelineConfig;
use brainex::metrics::dice;
use brainex::nifti::{read_nifti, write_nifti, DataType};
use brainex::volume::BoundingBox;
use brainex::windowing::plan_windows_within;
use brainex::{Error, Volume, VolumeKind};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BxStatus {
    Ok = 0,
    InvalidArgument = 1,
    DimMismatch = 2,
    EmptyMask = 3,
    Io = 4,
    Format = 5,
    Unsupported = 6,
    Predictor = 7,
    Protocol = 8,
    Config = 9,
    NullPointer = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BxVolumeKind {
    Intensity = 0,
    Label = 1,
    Probability = 2,
    Mask = 3,
}

/// On-disk voxel type for [`bx_volume_write`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BxDataType {
    Uint8 = 2,
    Int16 = 4,
    Float32 = 16,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BxExtractStatus {
    Ok = 0,
    NoBrainFound = 1,
}

/// Opaque volume handle.
pub struct BxVolume(Volume);

/// Opaque extraction result.
pub struct BxResult {
    status: Status,
    /// Fused mask on the input's native grid.
    mask: Volume,
    roi: Vec<BoundingBox>,
}

struct Failure {
    status: BxStatus,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidArgument(_) => BxStatus::InvalidArgument,
            Error::DimMismatch { .. } => BxStatus::DimMismatch,
            Error::EmptyMask => BxStatus::EmptyMask,
            Error::Io { .. } => BxStatus::Io,
            Error::Format(_) => BxStatus::Format,
            Error::Unsupported(_) => BxStatus::Unsupported,
            Error::Predictor { .. } => BxStatus::Predictor,
            Error::Protocol(_) => BxStatus::Protocol,
            Error::Config(_) => BxStatus::Config,
        };
        Failure {
            status,
            message: e.to_string(),
        }
    }
}

fn fail(status: BxStatus, message: impl Into<String>) -> Failure {
    Failure {
        status,
        message: message.into(),
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> BxStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            BxStatus::Ok
        }
        Ok(Err(e)) => {
            set_last_error(&e.message);
            e.status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("panic: {msg}"));
            BxStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| fail(BxStatus::NullPointer, format!("{what} is null")))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| fail(BxStatus::NullPointer, format!("{what} is null")))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(fail(BxStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(BxStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn read3<T: Copy>(p: *const T, what: &str) -> Result<[T; 3], Failure> {
    if p.is_null() {
        return Err(fail(BxStatus::NullPointer, format!("{what} is null")));
    }
    Ok([*p, *p.add(1), *p.add(2)])
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn bx_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next `bx_*` call on the same thread.
#[no_mangle]
pub extern "C" fn bx_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Creates a volume. `data` may be null for an all-zero volume; otherwise it
/// must hold `len = dims[0]*dims[1]*dims[2]` values, axis 2 fastest.
///
/// # Safety
/// `dims` and `spacing` point to 3 values; `data` to `len` floats or null.
#[no_mangle]
pub unsafe extern "C" fn bx_volume_new(
    dims: *const usize,
    spacing: *const f64,
    kind: BxVolumeKind,
    data: *const f32,
    len: usize,
    out: *mut *mut BxVolume,
) -> BxStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let dims = read3(dims, "dims")?;
        let spacing = read3(spacing, "spacing")?;
        let kind = match kind {
            BxVolumeKind::Intensity => VolumeKind::Intensity,
            BxVolumeKind::Label => VolumeKind::Label,
            BxVolumeKind::Probability => VolumeKind::Probability,
            BxVolumeKind::Mask => VolumeKind::Mask,
        };
        let v = if data.is_null() {
            Volume::zeros(dims, spacing, kind)?
        } else {
            let values = std::slice::from_raw_parts(data, len).to_vec();
            Volume::from_vec(dims, spacing, kind, values)?
        };
        *out = Box::into_raw(Box::new(BxVolume(v)));
        Ok(())
    })
}

/// Reads a `.nii` or `.nii.gz` file as an intensity volume.
///
/// # Safety
/// `path` is a NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn bx_volume_read(path: *const c_char, out: *mut *mut BxVolume) -> BxStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let v = read_nifti(read_str(path, "path")?)?;
        *out = Box::into_raw(Box::new(BxVolume(v)));
        Ok(())
    })
}

/// # Safety
/// `vol` is a live handle; `path` is a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn bx_volume_write(vol: *const BxVolume, path: *const c_char, datatype: BxDataType) -> BxStatus {
    guard(|| {
        let v = deref(vol, "vol")?;
        let dt = match datatype {
            BxDataType::Uint8 => DataType::Uint8,
            BxDataType::Int16 => DataType::Int16,
            BxDataType::Float32 => DataType::Float32,
        };
        write_nifti(&v.0, read_str(path, "path")?, dt)?;
        Ok(())
    })
}

/// Releases a volume; null is ignored.
///
/// # Safety
/// `vol` came from this library and is not used afterwards.
#[no_mangle]
pub unsafe extern "C" fn bx_volume_free(vol: *mut BxVolume) {
    if !vol.is_null() {
        drop(Box::from_raw(vol));
    }
}

/// # Safety
/// `vol` is a live handle; `dims` and `spacing` (either may be null) hold 3 values.
#[no_mangle]
pub unsafe extern "C" fn bx_volume_shape(vol: *const BxVolume, dims: *mut usize, spacing: *mut f64) -> BxStatus {
    guard(|| {
        let v = &deref(vol, "vol")?.0;
        for a in 0..3 {
            if !dims.is_null() {
                *dims.add(a) = v.dims()[a];
            }
            if !spacing.is_null() {
                *spacing.add(a) = v.spacing()[a];
            }
        }
        Ok(())
    })
}

/// Borrowed pointer to the voxel values; valid while `vol` lives.
///
/// # Safety
/// `vol` is a live handle; `len` is writable or null.
#[no_mangle]
pub unsafe extern "C" fn bx_volume_data(vol: *const BxVolume, len: *mut usize) -> *const f32 {
    match vol.as_ref() {
        None => ptr::null(),
        Some(v) => {
            if !len.is_null() {
                *len = v.0.len();
            }
            v.0.data().as_ptr()
        }
    }
}

/// Dice overlap of the nonzero voxels of two same-shape volumes.
///
/// # Safety
/// `a` and `b` are live handles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn bx_dice(a: *const BxVolume, b: *const BxVolume, out: *mut f64) -> BxStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = dice(&deref(a, "a")?.0, &deref(b, "b")?.0)?;
        Ok(())
    })
}

/// Number of windows needed to cover a `dims` volume with `window`/`step`.
///
/// # Safety
/// `dims` holds 3 values; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn bx_plan_count(dims: *const usize, window: usize, step: usize, out: *mut usize) -> BxStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let dims = read3(dims, "dims")?;
        if dims.contains(&0) {
            return Err(fail(BxStatus::InvalidArgument, "dims must be positive"));
        }
        *out = plan_windows_within(BoundingBox::full(dims), window, step, dims)?.len();
        Ok(())
    })
}

/// Runs the full pipeline on an intensity volume.
///
/// `config_json` is a pipeline configuration document; relative paths in it
/// resolve against `base_dir` (null means the current directory). `seed`
/// seeds noisy-oracle backends. A missing brain is not an error: check
/// [`bx_result_status`].
///
/// # Safety
/// `input` is a live handle; strings are NUL-terminated; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn bx_extract(
    input: *const BxVolume,
    config_json: *const c_char,
    base_dir: *const c_char,
    seed: u64,
    out: *mut *mut BxResult,
) -> BxStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let input = &deref(input, "input")?.0;
        let cfg = PipelineConfig::from_json(read_str(config_json, "config_json")?)?;
        let base = if base_dir.is_null() { "." } else { read_str(base_dir, "base_dir")? };
        let cascade = cfg.build(Path::new(base), seed)?;
        let input = if input.kind() == VolumeKind::Intensity {
            input.clone()
        } else {
            input.clone().with_kind(VolumeKind::Intensity)?
        };
        let res = extract_brain(&input, &cascade)?;
        let mask = restore_native_grid(&res.mask, input.dims(), input.spacing())?;
        *out = Box::into_raw(Box::new(BxResult {
            status: res.status,
            mask,
            roi: res.roi_trace.iter().map(|e| e.bbox).collect(),
        }));
        Ok(())
    })
}

/// # Safety
/// `res` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn bx_result_status(res: *const BxResult, out: *mut BxExtractStatus) -> BxStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = match deref(res, "res")?.status {
            Status::Ok => BxExtractStatus::Ok,
            Status::NoBrainFound => BxExtractStatus::NoBrainFound,
        };
        Ok(())
    })
}

/// Copies the mask (on the input's grid) into a new volume handle.
///
/// # Safety
/// `res` is a live handle; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn bx_result_mask(res: *const BxResult, out: *mut *mut BxVolume) -> BxStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let m = deref(res, "res")?.mask.clone();
        *out = Box::into_raw(Box::new(BxVolume(m)));
        Ok(())
    })
}

/// Number of regions in the trace (localization first, then each refinement stage).
///
/// # Safety
/// `res` is a live handle or null (yields 0).
#[no_mangle]
pub unsafe extern "C" fn bx_result_roi_count(res: *const BxResult) -> usize {
    res.as_ref().map_or(0, |r| r.roi.len())
}

/// Region `index` of the trace on the conformed grid; `max` is exclusive.
///
/// # Safety
/// `res` is a live handle; `min` and `max` hold 3 values.
#[no_mangle]
pub unsafe extern "C" fn bx_result_roi(res: *const BxResult, index: usize, min: *mut usize, max: *mut usize) -> BxStatus {
    guard(|| {
        let r = deref(res, "res")?;
        let b = r.roi.get(index).ok_or_else(|| {
            fail(BxStatus::InvalidArgument, format!("roi index {index} out of range ({} entries)", r.roi.len()))
        })?;
        if min.is_null() || max.is_null() {
            return Err(fail(BxStatus::NullPointer, "min/max is null"));
        }
        for a in 0..3 {
            *min.add(a) = b.min[a];
            *max.add(a) = b.max[a];
        }
        Ok(())
    })
}

/// # Safety
/// `res` came from [`bx_extract`] and is not used afterwards; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn bx_result_free(res: *mut BxResult) {
    if !res.is_null() {
        drop(Box::from_raw(res));
    }
}
