//! `.fpc` cube files.
//!
//! ```text
//! offset  size  field
//! 0       8     magic "FPCUBE1\0"
//! 8       4     u32 version (1)
//! 12      4     u32 side
//! 16      4     u32 channels
//! 20      4     u32 flags (bit 0: upsampled)
//! 24      8     u64 metadata length M
//! 32      M     metadata, UTF-8 JSON
//! 32+M    4·N   f32 payload, channel-major, row-major per channel
//! ...     8     u64 CRC-64/XZ of the payload bytes
//! ```
//!
//! All integers and floats are little-endian.

use std::fs;
use std::path::Path;

use crc::{Crc, CRC_64_XZ};

use crate::dataset::{CubeMeta, IntensityCube};
use crate::error::{FpmError, Result};

pub const MAGIC: [u8; 8] = *b"FPCUBE1\0";
pub const VERSION: u32 = 1;
pub const FLAG_UPSAMPLED: u32 = 1;
pub const HEADER_LEN: usize = 32;
pub const TRAILER_LEN: usize = 8;

const CRC64: Crc<u64> = Crc::<u64>::new(&CRC_64_XZ);

pub fn crc64(bytes: &[u8]) -> u64 {
    CRC64.checksum(bytes)
}

fn payload_bytes(data: &[f32]) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len() * 4);
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// CRC-64 of a cube's payload, as stored in its trailer.
pub fn payload_checksum(cube: &IntensityCube) -> u64 {
    crc64(&payload_bytes(&cube.data))
}

pub fn encode(cube: &IntensityCube) -> Result<Vec<u8>> {
    let meta = serde_json::to_vec(&cube.meta)?;
    let payload = payload_bytes(&cube.data);
    let mut out = Vec::with_capacity(HEADER_LEN + meta.len() + payload.len() + TRAILER_LEN);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(cube.side as u32).to_le_bytes());
    out.extend_from_slice(&(cube.channels as u32).to_le_bytes());
    let flags = if cube.upsampled { FLAG_UPSAMPLED } else { 0 };
    out.extend_from_slice(&flags.to_le_bytes());
    out.extend_from_slice(&(meta.len() as u64).to_le_bytes());
    out.extend_from_slice(&meta);
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc64(&payload).to_le_bytes());
    Ok(out)
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().expect("4-byte slice"))
}

fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().expect("8-byte slice"))
}

pub fn decode(bytes: &[u8]) -> Result<IntensityCube> {
    if bytes.len() < MAGIC.len() {
        return Err(FpmError::Truncated(format!(
            "{} bytes, no header",
            bytes.len()
        )));
    }
    if bytes[..8] != MAGIC {
        return Err(FpmError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(FpmError::Truncated(format!(
            "{} bytes, header needs {HEADER_LEN}",
            bytes.len()
        )));
    }
    let version = u32_at(bytes, 8);
    if version != VERSION {
        return Err(FpmError::VersionMismatch {
            found: version,
            expected: VERSION,
        });
    }
    let side = u32_at(bytes, 12) as usize;
    let channels = u32_at(bytes, 16) as usize;
    let flags = u32_at(bytes, 20);
    let meta_len = u64_at(bytes, 24);

    let values = (side as u128) * (side as u128) * (channels as u128);
    let needed = HEADER_LEN as u128 + meta_len as u128 + values * 4 + TRAILER_LEN as u128;
    if (bytes.len() as u128) < needed {
        return Err(FpmError::Truncated(format!(
            "{} bytes, header promises {needed}",
            bytes.len()
        )));
    }
    if (bytes.len() as u128) > needed {
        return Err(FpmError::Truncated(format!(
            "{} trailing bytes after checksum",
            bytes.len() as u128 - needed
        )));
    }
    let meta_end = HEADER_LEN + meta_len as usize;
    let payload_end = meta_end + values as usize * 4;
    let payload = &bytes[meta_end..payload_end];
    let expected = u64_at(bytes, payload_end);
    let found = crc64(payload);
    if expected != found {
        return Err(FpmError::Checksum { expected, found });
    }

    let meta: CubeMeta = serde_json::from_slice(&bytes[HEADER_LEN..meta_end])?;
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4-byte chunk")))
        .collect();
    let mut cube = IntensityCube::new(side, channels, data, meta)?;
    cube.upsampled = flags & FLAG_UPSAMPLED != 0;
    Ok(cube)
}

pub fn write_cube(cube: &IntensityCube, path: &Path) -> Result<()> {
    let bytes = encode(cube)?;
    fs::write(path, bytes).map_err(|e| FpmError::io(path, e))
}

pub fn read_cube(path: &Path) -> Result<IntensityCube> {
    let bytes = fs::read(path).map_err(|e| FpmError::io(path, e))?;
    decode(&bytes)
}
