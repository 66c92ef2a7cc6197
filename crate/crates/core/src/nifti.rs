//! Minimal single-file NIfTI-1 reader/writer.
//!
//! Only little-endian, 3D, extension-free `.nii` files with `uint8`, `int16`
//! or `float32` voxels are written. Reading also accepts `.nii.gz`.
//! NIfTI stores the first axis fastest; voxel `(x, y, z)` of the file maps to
//! `Volume` index `(x, y, z)`, so data is transposed on the way in and out.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Volume, VolumeKind};

pub const HEADER_SIZE: usize = 348;
pub const VOX_OFFSET: usize = 352;
pub const MAGIC: [u8; 4] = *b"n+1\0";

mod offsets {
    pub const SIZEOF_HDR: usize = 0;
    pub const DIM: usize = 40;
    pub const DATATYPE: usize = 70;
    pub const BITPIX: usize = 72;
    pub const PIXDIM: usize = 76;
    pub const VOX_OFFSET: usize = 108;
    pub const SCL_SLOPE: usize = 112;
    pub const SCL_INTER: usize = 116;
    pub const XYZT_UNITS: usize = 123;
    pub const DESCRIP: usize = 148;
    pub const MAGIC: usize = 344;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataType {
    Uint8,
    Int16,
    Float32,
}

impl DataType {
    pub fn code(self) -> i16 {
        match self {
            DataType::Uint8 => 2,
            DataType::Int16 => 4,
            DataType::Float32 => 16,
        }
    }

    pub fn bitpix(self) -> i16 {
        match self {
            DataType::Uint8 => 8,
            DataType::Int16 => 16,
            DataType::Float32 => 32,
        }
    }

    pub fn bytes(self) -> usize {
        self.bitpix() as usize / 8
    }

    pub fn from_code(code: i16) -> Result<Self> {
        match code {
            2 => Ok(DataType::Uint8),
            4 => Ok(DataType::Int16),
            16 => Ok(DataType::Float32),
            other => Err(Error::Unsupported(format!("NIfTI datatype code {other}"))),
        }
    }

    /// Natural on-disk type for a volume kind.
    pub fn default_for(kind: VolumeKind) -> Self {
        match kind {
            VolumeKind::Mask | VolumeKind::Label => DataType::Uint8,
            VolumeKind::Intensity | VolumeKind::Probability => DataType::Float32,
        }
    }
}

/// The subset of header fields this crate interprets.
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiHeader {
    pub dims: [usize; 3],
    pub datatype: DataType,
    pub pixdim: [f64; 3],
    pub vox_offset: usize,
    pub scl_slope: f32,
    pub scl_inter: f32,
}

fn i16_at(b: &[u8], off: usize) -> i16 {
    i16::from_le_bytes([b[off], b[off + 1]])
}

fn f32_at(b: &[u8], off: usize) -> f32 {
    f32::from_le_bytes(b[off..off + 4].try_into().unwrap())
}

impl NiftiHeader {
    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_SIZE {
            return Err(Error::Format(format!(
                "header truncated: {} of {HEADER_SIZE} bytes",
                bytes.len()
            )));
        }
        let sizeof_hdr = i32::from_le_bytes(bytes[0..4].try_into().unwrap());
        if sizeof_hdr != HEADER_SIZE as i32 {
            if i32::from_be_bytes(bytes[0..4].try_into().unwrap()) == HEADER_SIZE as i32 {
                return Err(Error::Unsupported("big-endian NIfTI files".into()));
            }
            return Err(Error::Format(format!("sizeof_hdr is {sizeof_hdr}, expected 348")));
        }
        let magic = &bytes[offsets::MAGIC..offsets::MAGIC + 4];
        if magic != MAGIC {
            if magic == b"ni1\0" {
                return Err(Error::Unsupported("two-file (.hdr/.img) NIfTI pairs".into()));
            }
            return Err(Error::Format(format!("bad magic {magic:?}")));
        }

        let ndim = i16_at(bytes, offsets::DIM);
        if !(1..=7).contains(&ndim) {
            return Err(Error::Format(format!("dim[0] = {ndim} out of range")));
        }
        let mut dims = [1usize; 3];
        for a in 0..7usize {
            let d = i16_at(bytes, offsets::DIM + 2 * (a + 1));
            if a < ndim as usize {
                if d <= 0 {
                    return Err(Error::Format(format!("dim[{}] = {d} is not positive", a + 1)));
                }
                if a < 3 {
                    dims[a] = d as usize;
                } else if d != 1 {
                    return Err(Error::Unsupported(format!(
                        "{ndim}-D volume with dim[{}] = {d}",
                        a + 1
                    )));
                }
            }
        }

        let datatype = DataType::from_code(i16_at(bytes, offsets::DATATYPE))?;
        let bitpix = i16_at(bytes, offsets::BITPIX);
        if bitpix != datatype.bitpix() {
            return Err(Error::Format(format!(
                "bitpix {bitpix} inconsistent with datatype {datatype:?}"
            )));
        }

        let mut pixdim = [1.0f64; 3];
        for (a, p) in pixdim.iter_mut().enumerate() {
            let v = f32_at(bytes, offsets::PIXDIM + 4 * (a + 1)).abs();
            if a < ndim as usize {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Format(format!("pixdim[{}] = {v} is not positive", a + 1)));
                }
                *p = v as f64;
            }
        }

        let vox_offset = f32_at(bytes, offsets::VOX_OFFSET);
        if !(vox_offset >= VOX_OFFSET as f32) || vox_offset.fract() != 0.0 {
            return Err(Error::Format(format!("vox_offset {vox_offset} must be an integer ≥ 352")));
        }

        Ok(NiftiHeader {
            dims,
            datatype,
            pixdim,
            vox_offset: vox_offset as usize,
            scl_slope: f32_at(bytes, offsets::SCL_SLOPE),
            scl_inter: f32_at(bytes, offsets::SCL_INTER),
        })
    }

    /// Serializes the 348-byte header followed by the 4 zero extension bytes.
    pub fn to_bytes(&self) -> [u8; VOX_OFFSET] {
        let mut b = [0u8; VOX_OFFSET];
        let put_i16 = |b: &mut [u8], off: usize, v: i16| b[off..off + 2].copy_from_slice(&v.to_le_bytes());
        let put_f32 = |b: &mut [u8], off: usize, v: f32| b[off..off + 4].copy_from_slice(&v.to_le_bytes());

        b[offsets::SIZEOF_HDR..4].copy_from_slice(&(HEADER_SIZE as i32).to_le_bytes());
        put_i16(&mut b, offsets::DIM, 3);
        for a in 0..7 {
            let d = if a < 3 { self.dims[a] as i16 } else { 1 };
            put_i16(&mut b, offsets::DIM + 2 * (a + 1), d);
        }
        put_i16(&mut b, offsets::DATATYPE, self.datatype.code());
        put_i16(&mut b, offsets::BITPIX, self.datatype.bitpix());
        put_f32(&mut b, offsets::PIXDIM, 1.0);
        for a in 0..7 {
            let p = if a < 3 { self.pixdim[a] as f32 } else { 1.0 };
            put_f32(&mut b, offsets::PIXDIM + 4 * (a + 1), p);
        }
        put_f32(&mut b, offsets::VOX_OFFSET, self.vox_offset as f32);
        put_f32(&mut b, offsets::SCL_SLOPE, self.scl_slope);
        put_f32(&mut b, offsets::SCL_INTER, self.scl_inter);
        // NIFTI_UNITS_MM
        b[offsets::XYZT_UNITS] = 2;
        let descrip = b"brainex";
        b[offsets::DESCRIP..offsets::DESCRIP + descrip.len()].copy_from_slice(descrip);
        b[offsets::MAGIC..offsets::MAGIC + 4].copy_from_slice(&MAGIC);
        b
    }
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut bytes = Vec::new();
    let gz = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("gz"))
        .unwrap_or(false);
    if gz {
        GzDecoder::new(BufReader::new(file))
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(path, e))?;
    } else {
        BufReader::new(file)
            .read_to_end(&mut bytes)
            .map_err(|e| Error::io(path, e))?;
    }
    Ok(bytes)
}

/// Decodes a full NIfTI-1 byte image.
pub fn decode(bytes: &[u8], kind: VolumeKind) -> Result<Volume> {
    let hdr = NiftiHeader::parse(bytes)?;
    let [nx, ny, nz] = hdr.dims;
    let n = nx * ny * nz;
    let need = hdr.vox_offset + n * hdr.datatype.bytes();
    if bytes.len() < need {
        return Err(Error::io(
            "<nifti payload>",
            std::io::Error::new(
                std::io::ErrorKind::UnexpectedEof,
                format!("voxel data truncated: {} of {need} bytes", bytes.len()),
            ),
        ));
    }
    let payload = &bytes[hdr.vox_offset..need];
    let raw: Vec<f32> = match hdr.datatype {
        DataType::Uint8 => payload.iter().map(|&v| v as f32).collect(),
        DataType::Int16 => payload
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f32)
            .collect(),
        DataType::Float32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    };
    let (slope, inter) = (hdr.scl_slope, hdr.scl_inter);
    let scale = slope != 0.0 && slope.is_finite() && inter.is_finite() && !(slope == 1.0 && inter == 0.0);

    // file: x fastest; volume: axis 2 fastest
    let mut data = vec![0.0f32; n];
    for x in 0..nx {
        for y in 0..ny {
            let dst = (x * ny + y) * nz;
            for z in 0..nz {
                let v = raw[x + nx * (y + ny * z)];
                data[dst + z] = if scale { v * slope + inter } else { v };
            }
        }
    }
    Volume::from_vec(hdr.dims, hdr.pixdim, kind, data)
}

/// Reads an intensity volume.
pub fn read_nifti(path: impl AsRef<Path>) -> Result<Volume> {
    read_nifti_as(path, VolumeKind::Intensity)
}

/// Reads a volume and validates it as `kind`.
pub fn read_nifti_as(path: impl AsRef<Path>, kind: VolumeKind) -> Result<Volume> {
    let path = path.as_ref();
    let bytes = read_all(path)?;
    decode(&bytes, kind).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

fn check_representable(vol: &Volume, datatype: DataType) -> Result<()> {
    let kind = vol.kind();
    if kind == VolumeKind::Mask && vol.data().iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::invalid("mask contains values other than 0 and 1"));
    }
    let (lo, hi) = match datatype {
        DataType::Float32 => return Ok(()),
        DataType::Uint8 => (0.0, 255.0),
        DataType::Int16 => (-32768.0, 32767.0),
    };
    if matches!(kind, VolumeKind::Intensity | VolumeKind::Probability) {
        return Err(Error::invalid(format!(
            "{kind:?} volumes must be written as float32, not {datatype:?}"
        )));
    }
    if let Some(v) = vol.data().iter().find(|&&v| v < lo || v > hi || v.fract() != 0.0) {
        return Err(Error::invalid(format!("value {v} not representable as {datatype:?}")));
    }
    Ok(())
}

/// Encodes `vol` into NIfTI-1 bytes (header, 4 zero bytes, voxel data).
pub fn encode(vol: &Volume, datatype: DataType) -> Result<Vec<u8>> {
    check_representable(vol, datatype)?;
    let dims = vol.dims();
    if dims.iter().any(|&d| d > i16::MAX as usize) {
        return Err(Error::Unsupported(format!("dims {dims:?} exceed NIfTI-1 limits")));
    }
    let hdr = NiftiHeader {
        dims,
        datatype,
        pixdim: vol.spacing(),
        vox_offset: VOX_OFFSET,
        scl_slope: 1.0,
        scl_inter: 0.0,
    };
    let [nx, ny, nz] = dims;
    let mut out = Vec::with_capacity(VOX_OFFSET + vol.len() * datatype.bytes());
    out.extend_from_slice(&hdr.to_bytes());
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                let v = vol.get(x, y, z);
                match datatype {
                    DataType::Uint8 => out.push(v as u8),
                    DataType::Int16 => out.extend_from_slice(&(v as i16).to_le_bytes()),
                    DataType::Float32 => out.extend_from_slice(&v.to_le_bytes()),
                }
            }
        }
    }
    Ok(out)
}

pub fn write_nifti(vol: &Volume, path: impl AsRef<Path>, datatype: DataType) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(vol, datatype)?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&bytes).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}
