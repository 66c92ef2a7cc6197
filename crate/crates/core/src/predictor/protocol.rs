//! Binary protocol spoken with external predictor processes over stdin/stdout.
//!
//! All integers and floats are little-endian.
//!
//! ```text
//! handshake  parent -> child   "CPRD" | version: u32 = 1 | window: u32
//!            child  -> parent  "CPRD" | version: u32     | accepted window: u32
//! request    parent -> child   origin: 3 x i64 | w³ x f32 (patch, axis 2 fastest)
//! response   child  -> parent  w³ x f32 in [0, 1]
//! ```
//!
//! The child must echo the parent's window; anything else is a protocol error.

use std::io::{self, Read, Write};

pub const MAGIC: [u8; 4] = *b"CPRD";
pub const VERSION: u32 = 1;
pub const HANDSHAKE_LEN: usize = 12;

pub fn request_len(window: usize) -> usize {
    24 + 4 * window.pow(3)
}

pub fn response_len(window: usize) -> usize {
    4 * window.pow(3)
}

pub fn encode_handshake(window: u32) -> [u8; HANDSHAKE_LEN] {
    let mut b = [0u8; HANDSHAKE_LEN];
    b[0..4].copy_from_slice(&MAGIC);
    b[4..8].copy_from_slice(&VERSION.to_le_bytes());
    b[8..12].copy_from_slice(&window.to_le_bytes());
    b
}

/// Parses a handshake, returning `(version, window)`.
pub fn decode_handshake(b: &[u8; HANDSHAKE_LEN]) -> Result<(u32, u32), String> {
    if b[0..4] != MAGIC {
        return Err(format!("bad handshake magic {:?}", &b[0..4]));
    }
    let version = u32::from_le_bytes(b[4..8].try_into().unwrap());
    let window = u32::from_le_bytes(b[8..12].try_into().unwrap());
    Ok((version, window))
}

pub fn encode_request(origin: [i64; 3], patch: &[f32]) -> Vec<u8> {
    let mut b = Vec::with_capacity(24 + 4 * patch.len());
    for o in origin {
        b.extend_from_slice(&o.to_le_bytes());
    }
    for v in patch {
        b.extend_from_slice(&v.to_le_bytes());
    }
    b
}

pub fn decode_floats(b: &[u8]) -> Vec<f32> {
    b.chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

pub fn encode_floats(values: &[f32]) -> Vec<u8> {
    values.iter().flat_map(|v| v.to_le_bytes()).collect()
}

/// Reads exactly `buf.len()` bytes; `Ok(false)` on a clean EOF before the
/// first byte.
pub fn read_frame(r: &mut impl Read, buf: &mut [u8]) -> io::Result<bool> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) if filled == 0 => return Ok(false),
            Ok(0) => {
                return Err(io::Error::new(
                    io::ErrorKind::UnexpectedEof,
                    format!("frame truncated after {filled} of {} bytes", buf.len()),
                ))
            }
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(true)
}

/// Options for [`serve`], mostly useful for fault-injection fixtures.
#[derive(Debug, Clone, Default)]
pub struct ServeOptions {
    /// Reply with this window instead of echoing the parent's.
    pub advertise_window: Option<u32>,
    /// Exit without answering after this many requests.
    pub die_after: Option<usize>,
}

/// Child side of the protocol: answer requests with `respond` until the
/// parent closes the stream.
pub fn serve(
    mut input: impl Read,
    mut output: impl Write,
    opts: &ServeOptions,
    mut respond: impl FnMut(usize, [i64; 3], &[f32]) -> Vec<f32>,
) -> io::Result<()> {
    let mut hs = [0u8; HANDSHAKE_LEN];
    if !read_frame(&mut input, &mut hs)? {
        return Ok(());
    }
    let (version, window) =
        decode_handshake(&hs).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
    if version != VERSION {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("unsupported protocol version {version}"),
        ));
    }
    let advertised = opts.advertise_window.unwrap_or(window);
    output.write_all(&encode_handshake(advertised))?;
    output.flush()?;
    if advertised != window {
        return Ok(());
    }

    let w = window as usize;
    let mut req = vec![0u8; request_len(w)];
    let mut served = 0usize;
    while read_frame(&mut input, &mut req)? {
        if opts.die_after.is_some_and(|n| served >= n) {
            return Ok(());
        }
        let origin = [0, 1, 2].map(|a| i64::from_le_bytes(req[8 * a..8 * a + 8].try_into().unwrap()));
        let patch = decode_floats(&req[24..]);
        let out = respond(w, origin, &patch);
        output.write_all(&encode_floats(&out))?;
        output.flush()?;
        served += 1;
    }
    Ok(())
}
