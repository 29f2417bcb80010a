//! Checkpoint container.
//!
//! Layout, all integers little-endian, strings as u32 length + UTF-8:
//!
//! ```text
//! "FACK" | version u32
//! config text (string) | sha256 of config text (32 bytes)
//! feature_dim u32
//! vocab count u32 | symbols (string each)
//! optimizer step u64
//! param count u32 | per param: name, ndim u32, dims u32*, value f64*, m f64*, v f64*
//! ```

use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use sha2::{Digest, Sha256};

use super::atomic_write;
use super::config::{config_to_text, parse_config};
use crate::error::{AlignError, Result};
use crate::lattice::Vocabulary;
use crate::nn::{Param, ParameterStore};
use crate::train::TrainConfig;

pub const MAGIC: &[u8; 4] = b"FACK";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub config: TrainConfig,
    pub vocab: Vocabulary,
    pub feature_dim: usize,
    pub store: ParameterStore,
}

impl Checkpoint {
    /// Hex sha256 of the resolved config text.
    pub fn config_hash(&self) -> String {
        Sha256::digest(config_to_text(&self.config).as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        put_u32(&mut out, VERSION);
        let text = config_to_text(&self.config);
        put_str(&mut out, &text);
        out.extend_from_slice(&Sha256::digest(text.as_bytes()));
        put_u32(&mut out, self.feature_dim as u32);
        put_u32(&mut out, self.vocab.len() as u32);
        for s in self.vocab.symbols() {
            put_str(&mut out, s);
        }
        out.extend_from_slice(&self.store.step().to_le_bytes());
        put_u32(&mut out, self.store.len() as u32);
        for p in self.store.params() {
            put_str(&mut out, &p.name);
            put_u32(&mut out, p.value.ndim() as u32);
            for &d in p.value.shape() {
                put_u32(&mut out, d as u32);
            }
            for a in [&p.value, &p.m, &p.v] {
                for x in a.iter() {
                    out.extend_from_slice(&x.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(path: &Path, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { path, bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(AlignError::format(path, "bad magic at byte 0"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(AlignError::format(path, format!("unsupported version {version} at byte 4")));
        }
        let text = r.string()?;
        let at = r.pos;
        let digest = r.take(32)?;
        if digest != Sha256::digest(text.as_bytes()).as_slice() {
            return Err(AlignError::format(path, format!("config hash mismatch at byte {at}")));
        }
        let config = parse_config(&text).map_err(|e| AlignError::format(path, format!("embedded config: {e}")))?;
        let feature_dim = r.u32()? as usize;
        let n_vocab = r.u32()?;
        let mut symbols = Vec::new();
        for _ in 0..n_vocab {
            symbols.push(r.string()?);
        }
        let vocab = Vocabulary::from_symbols(&symbols);
        if vocab.len() != symbols.len() {
            return Err(AlignError::format(path, "duplicate vocabulary symbols"));
        }
        let step = u64::from_le_bytes(r.take(8)?.try_into().unwrap());
        let n_params = r.u32()?;
        let mut store = ParameterStore::new();
        for _ in 0..n_params {
            let name = r.string()?;
            let ndim = r.u32()? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(r.u32()? as usize);
            }
            let len: usize = shape.iter().product();
            let mut tensor = || -> Result<ArrayD<f64>> {
                let raw = r.take(8 * len)?;
                let vals = raw
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                    .collect();
                Ok(ArrayD::from_shape_vec(IxDyn(&shape), vals).expect("length checked"))
            };
            let value = tensor()?;
            let m = tensor()?;
            let v = tensor()?;
            store.push(Param { name, value, m, v })?;
        }
        if r.pos != bytes.len() {
            return Err(AlignError::format(
                path,
                format!("{} trailing bytes at byte {}", bytes.len() - r.pos, r.pos),
            ));
        }
        store.set_step(step);
        Ok(Self {
            config,
            vocab,
            feature_dim,
            store,
        })
    }
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    atomic_write(path, &ckpt.to_bytes())
}

pub fn read_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = std::fs::read(path).map_err(|e| AlignError::io(path, e))?;
    Checkpoint::from_bytes(path, &bytes)
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len() as u32);
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    path: &'a Path,
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            AlignError::format(
                self.path,
                format!("truncated at byte {}: need {n} bytes, {} left", self.pos, self.bytes.len() - self.pos),
            )
        })?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let at = self.pos;
        String::from_utf8(self.take(len)?.to_vec())
            .map_err(|_| AlignError::format(self.path, format!("invalid UTF-8 at byte {at}")))
    }
}
