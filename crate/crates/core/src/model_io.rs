//! Binary model container.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic        8 bytes   "SIGLSTM\0"
//! version      u32       FORMAT_VERSION
//! config_len   u32
//! config       JSON-encoded SiameseConfig (config_len bytes)
//! n_tensors    u32
//! per tensor:
//!   name_len   u16
//!   name       UTF-8
//!   count      u64
//!   values     count x f64
//! ```
//!
//! Tensors are written in the order of [`TENSOR_NAMES`]; every name and
//! length is checked against the architecture on load.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::siamese::{SiameseConfig, SiameseModel, TENSOR_NAMES};

pub const MAGIC: &[u8; 8] = b"SIGLSTM\0";
pub const FORMAT_VERSION: u32 = 1;

pub fn model_to_bytes(model: &SiameseModel) -> Vec<u8> {
    let config = serde_json::to_vec(model.config()).expect("config serializes");
    let mut out = Vec::with_capacity(64 + config.len() + 8 * model.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(&config);
    out.extend_from_slice(&(TENSOR_NAMES.len() as u32).to_le_bytes());
    for (name, values) in TENSOR_NAMES.iter().zip(model.tensors()) {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(values.len() as u64).to_le_bytes());
        for v in values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::ModelFormat(format!("truncated at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Reads only the header: magic, version and architecture.
pub fn read_config(bytes: &[u8]) -> Result<SiameseConfig> {
    let mut r = Reader { buf: bytes, pos: 0 };
    read_header(&mut r)
}

fn read_header(r: &mut Reader<'_>) -> Result<SiameseConfig> {
    if r.take(MAGIC.len()).map_err(|_| Error::ModelFormat("not a model file".into()))? != MAGIC {
        return Err(Error::ModelFormat("bad magic bytes, not a model file".into()));
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::ModelFormat(format!(
            "format version {version}, this build reads version {FORMAT_VERSION}"
        )));
    }
    let len = r.u32()? as usize;
    let config: SiameseConfig =
        serde_json::from_slice(r.take(len)?).map_err(|e| Error::ModelFormat(format!("config: {e}")))?;
    config.validate()?;
    Ok(config)
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<SiameseModel> {
    let mut r = Reader { buf: bytes, pos: 0 };
    let config = read_header(&mut r)?;
    let mut model = SiameseModel::zeros(config)?;
    let n = r.u32()? as usize;
    if n != TENSOR_NAMES.len() {
        return Err(Error::ModelFormat(format!("{n} tensors, expected {}", TENSOR_NAMES.len())));
    }
    for (expected, slot) in TENSOR_NAMES.iter().zip(model.tensors_mut()) {
        let name_len = r.u16()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?).map_err(|_| Error::ModelFormat("tensor name is not UTF-8".into()))?;
        if name != *expected {
            return Err(Error::ModelFormat(format!("tensor {name:?} where {expected:?} expected")));
        }
        let count = r.u64()? as usize;
        if count != slot.len() {
            return Err(Error::ModelFormat(format!(
                "tensor {name}: {count} values, architecture needs {}",
                slot.len()
            )));
        }
        let raw = r.take(count.checked_mul(8).ok_or_else(|| Error::ModelFormat("size overflow".into()))?)?;
        for (v, chunk) in slot.iter_mut().zip(raw.chunks_exact(8)) {
            *v = f64::from_le_bytes(chunk.try_into().unwrap());
            if !v.is_finite() {
                return Err(Error::ModelFormat(format!("tensor {name}: non-finite value")));
            }
        }
    }
    if r.pos != bytes.len() {
        return Err(Error::ModelFormat(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(model)
}

pub fn save_model(model: &SiameseModel, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, model_to_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<SiameseModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_bytes(&bytes)
}
