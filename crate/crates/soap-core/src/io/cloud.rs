//! Binary point-cloud format.
//!
//! Layout (little-endian): 8-byte magic `SOAPCLD\0`, u32 version, u32
//! reserved (zero), u64 point count, then `count` records of four f32 values
//! (x, y, z, t). Round-trips are bit-exact at f32 precision.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::FormatError;
use crate::geom::{Point, PointCloud};

pub const CLOUD_MAGIC: [u8; 8] = *b"SOAPCLD\0";
pub const CLOUD_VERSION: u32 = 1;

pub fn write_cloud(path: impl AsRef<Path>, cloud: &PointCloud) -> Result<(), FormatError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(&CLOUD_MAGIC)?;
    w.write_all(&CLOUD_VERSION.to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    w.write_all(&(cloud.points.len() as u64).to_le_bytes())?;
    for (index, p) in cloud.points.iter().enumerate() {
        if !p.is_finite() {
            return Err(FormatError::NonFiniteValue { index });
        }
        let rec = [p.x as f32, p.y as f32, p.z as f32, p.t as f32];
        if rec.iter().any(|v| !v.is_finite()) {
            return Err(FormatError::Unrepresentable { index });
        }
        for v in rec {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_cloud(path: impl AsRef<Path>) -> Result<PointCloud, FormatError> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|_| FormatError::Truncated("header"))?;
    if magic != CLOUD_MAGIC {
        return Err(FormatError::BadMagic);
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf).map_err(|_| FormatError::Truncated("version"))?;
    let version = u32::from_le_bytes(u32buf);
    if version != CLOUD_VERSION {
        return Err(FormatError::UnsupportedVersion(version));
    }
    r.read_exact(&mut u32buf).map_err(|_| FormatError::Truncated("reserved"))?;
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf).map_err(|_| FormatError::Truncated("count"))?;
    let count = u64::from_le_bytes(u64buf) as usize;
    let mut points = Vec::with_capacity(count.min(1 << 24));
    let mut rec = [0u8; 16];
    for index in 0..count {
        r.read_exact(&mut rec).map_err(|_| FormatError::Truncated("points"))?;
        let f = |o: usize| f32::from_le_bytes([rec[o], rec[o + 1], rec[o + 2], rec[o + 3]]) as f64;
        let p = Point { x: f(0), y: f(4), z: f(8), t: f(12) };
        if !p.is_finite() {
            return Err(FormatError::NonFiniteValue { index });
        }
        points.push(p);
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(FormatError::TrailingBytes);
    }
    Ok(PointCloud::new(points))
}
