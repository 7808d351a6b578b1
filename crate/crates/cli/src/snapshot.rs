//! KSF1 field snapshots.
//!
//! Layout, little-endian: magic `KSF1`, `u32` version, `u64 nx`, `u64 ny`,
//! `f64 Lx`, `f64 Ly`, `f64 t`, then `nx * ny` `f64` samples with x fastest.

use ks_core::{Field, Grid};
use std::path::Path;

pub const MAGIC: [u8; 4] = *b"KSF1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 4 + 4 + 8 + 8 + 8 + 8 + 8;

#[derive(Debug, thiserror::Error)]
pub enum SnapshotError {
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported snapshot version {0}")]
    VersionMismatch(u32),
    #[error("truncated snapshot: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: usize, found: usize },
    #[error("snapshot has {extra} bytes past the payload")]
    TrailingData { extra: usize },
    #[error("snapshot grid {nx}x{ny} on {lx}x{ly} does not match the configured grid")]
    GridMismatch { nx: u64, ny: u64, lx: f64, ly: f64 },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Field(#[from] ks_core::Error),
}

/// Decoded snapshot contents, independent of any grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub nx: u64,
    pub ny: u64,
    pub lx: f64,
    pub ly: f64,
    pub t: f64,
    pub values: Vec<f64>,
}

impl Snapshot {
    pub fn from_field(f: &Field, t: f64) -> Self {
        let g = f.grid();
        Snapshot {
            nx: g.nx() as u64,
            ny: g.ny() as u64,
            lx: g.lx(),
            ly: g.ly(),
            t,
            values: f.values().to_vec(),
        }
    }

    /// Places the samples on `grid`; sizes and lengths must match exactly.
    pub fn into_field(self, grid: &Grid) -> Result<(Field, f64), SnapshotError> {
        if self.nx != grid.nx() as u64 || self.ny != grid.ny() as u64 || self.lx != grid.lx() || self.ly != grid.ly() {
            return Err(SnapshotError::GridMismatch {
                nx: self.nx,
                ny: self.ny,
                lx: self.lx,
                ly: self.ly,
            });
        }
        Ok((Field::new(grid.clone(), self.values)?, self.t))
    }
}

pub fn encode(s: &Snapshot) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * s.values.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&s.nx.to_le_bytes());
    out.extend_from_slice(&s.ny.to_le_bytes());
    for v in [s.lx, s.ly, s.t].iter().chain(&s.values) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn le_u64(b: &[u8]) -> u64 {
    u64::from_le_bytes(b.try_into().expect("8 bytes"))
}

fn le_f64(b: &[u8]) -> f64 {
    f64::from_le_bytes(b.try_into().expect("8 bytes"))
}

pub fn decode(bytes: &[u8]) -> Result<Snapshot, SnapshotError> {
    let truncated = |expected| SnapshotError::TruncatedFile {
        expected,
        found: bytes.len(),
    };
    if bytes.len() < 4 {
        return Err(truncated(HEADER_LEN));
    }
    let magic: [u8; 4] = bytes[..4].try_into().expect("4 bytes");
    if magic != MAGIC {
        return Err(SnapshotError::BadMagic(magic));
    }
    if bytes.len() < HEADER_LEN {
        return Err(truncated(HEADER_LEN));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(SnapshotError::VersionMismatch(version));
    }
    let nx = le_u64(&bytes[8..16]);
    let ny = le_u64(&bytes[16..24]);
    let expected = nx
        .checked_mul(ny)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| usize::try_from(n).ok())
        .and_then(|n| n.checked_add(HEADER_LEN))
        .unwrap_or(usize::MAX);
    if bytes.len() < expected {
        return Err(truncated(expected));
    }
    if bytes.len() > expected {
        return Err(SnapshotError::TrailingData {
            extra: bytes.len() - expected,
        });
    }
    Ok(Snapshot {
        nx,
        ny,
        lx: le_f64(&bytes[24..32]),
        ly: le_f64(&bytes[32..40]),
        t: le_f64(&bytes[40..48]),
        values: bytes[HEADER_LEN..].chunks_exact(8).map(le_f64).collect(),
    })
}

fn io_error(path: &Path, e: std::io::Error) -> SnapshotError {
    SnapshotError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn write_snapshot(f: &Field, t: f64, path: &Path) -> Result<(), SnapshotError> {
    std::fs::write(path, encode(&Snapshot::from_field(f, t))).map_err(|e| io_error(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot, SnapshotError> {
    let bytes = std::fs::read(path).map_err(|e| io_error(path, e))?;
    decode(&bytes)
}
