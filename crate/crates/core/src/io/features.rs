//! Binary feature files.
//!
//! Layout, all integers little-endian:
//!
//! | offset | size    | field                          |
//! |--------|---------|--------------------------------|
//! | 0      | 4       | magic `FAF1`                   |
//! | 4      | 4       | version (u32, currently 1)     |
//! | 8      | 4       | frames `T` (u32)               |
//! | 12     | 4       | dimension `D` (u32)            |
//! | 16     | 4       | frame shift in microseconds    |
//! | 20     | `4*T*D` | row-major f32 payload          |

use std::path::Path;

use ndarray::Array2;

use super::atomic_write;
use crate::error::{AlignError, Result};
use crate::lattice::FeatureMatrix;

pub const MAGIC: &[u8; 4] = b"FAF1";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 20;

/// Feature payload exactly as stored.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub frame_shift_us: u32,
    pub frames: Array2<f32>,
}

impl FeatureFile {
    pub fn to_matrix(&self) -> Result<FeatureMatrix> {
        FeatureMatrix::new(self.frames.mapv(f64::from), self.frame_shift_us as f64 * 1e-6)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let (t, d) = self.frames.dim();
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * t * d);
        out.extend_from_slice(MAGIC);
        for v in [VERSION, t as u32, d as u32, self.frame_shift_us] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in self.frames.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(AlignError::format(
                path,
                format!("truncated header: {} of {HEADER_LEN} bytes", bytes.len()),
            ));
        }
        if &bytes[..4] != MAGIC {
            return Err(AlignError::format(path, format!("bad magic {:?} at byte 0", &bytes[..4])));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
        let version = word(4);
        if version != VERSION {
            return Err(AlignError::format(path, format!("unsupported version {version} at byte 4")));
        }
        let (t, d, shift) = (word(8) as usize, word(12) as usize, word(16));
        let expected = 4 * t * d;
        let actual = bytes.len() - HEADER_LEN;
        if actual != expected {
            return Err(AlignError::format(
                path,
                format!("payload at byte {HEADER_LEN}: expected {expected} bytes for {t}x{d}, found {actual}"),
            ));
        }
        let values: Vec<f32> = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let frames = Array2::from_shape_vec((t, d), values).expect("length checked");
        Ok(Self {
            frame_shift_us: shift,
            frames,
        })
    }
}

pub fn write_feature_file(path: &Path, file: &FeatureFile) -> Result<()> {
    atomic_write(path, &file.to_bytes())
}

pub fn read_feature_file(path: &Path) -> Result<FeatureFile> {
    let bytes = std::fs::read(path).map_err(|e| AlignError::io(path, e))?;
    FeatureFile::from_bytes(path, &bytes)
}

/// Reads only the 20-byte header: `(T, D, frame_shift_us)`.
pub fn read_feature_header(path: &Path) -> Result<(usize, usize, u32)> {
    use std::io::Read;
    let mut buf = [0u8; HEADER_LEN];
    let mut f = std::fs::File::open(path).map_err(|e| AlignError::io(path, e))?;
    f.read_exact(&mut buf)
        .map_err(|_| AlignError::format(path, format!("truncated header: need {HEADER_LEN} bytes")))?;
    if &buf[..4] != MAGIC {
        return Err(AlignError::format(path, "bad magic at byte 0"));
    }
    let word = |i: usize| u32::from_le_bytes(buf[i..i + 4].try_into().unwrap());
    Ok((word(8) as usize, word(12) as usize, word(16)))
}

pub fn load_features(path: &Path) -> Result<FeatureMatrix> {
    read_feature_file(path)?.to_matrix()
}
