//! Parameter container.
//!
//! Little-endian layout, version 1:
//!
//! ```text
//! magic        4 bytes  "GNNP"
//! version      u32      1
//! config_len   u32      byte length of the JSON config echo
//! config       [u8]     ModelConfig as UTF-8 JSON
//! n_tensors    u32
//! repeated n_tensors times:
//!   name_len   u16
//!   name       [u8]     UTF-8, "layer{i}.{kind}.{param}"
//!   n_values   u64
//!   values     [f64]    IEEE-754 binary64
//! ```
//!
//! Loading rebuilds the network from the echoed config and requires every
//! tensor name and length to match it.

use std::io::Write;

use crate::error::{NnError, Result};
use crate::model::{Model, ModelConfig};

pub const MAGIC: &[u8; 4] = b"GNNP";
pub const VERSION: u32 = 1;

pub fn write_params<W: Write>(model: &Model, mut w: W) -> Result<()> {
    let config = serde_json::to_vec(model.config()).map_err(|e| NnError::Format(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(config.len() as u32).to_le_bytes())?;
    w.write_all(&config)?;
    let names = model.param_names();
    let params = model.params();
    w.write_all(&(params.len() as u32).to_le_bytes())?;
    for (name, values) in names.iter().zip(params) {
        w.write_all(&(name.len() as u16).to_le_bytes())?;
        w.write_all(name.as_bytes())?;
        w.write_all(&(values.len() as u64).to_le_bytes())?;
        for v in values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn params_to_bytes(model: &Model) -> Vec<u8> {
    let mut out = Vec::new();
    write_params(model, &mut out).expect("writing to a Vec cannot fail");
    out
}

struct Cursor<'a> {
    buf: &'a [u8],
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() < n {
            return Err(NnError::Format(format!("truncated while reading {what}")));
        }
        let (head, tail) = self.buf.split_at(n);
        self.buf = tail;
        Ok(head)
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, what)?.try_into().unwrap()))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

/// Decodes a parameter container produced by [`write_params`].
pub fn read_params(bytes: &[u8]) -> Result<Model> {
    let mut c = Cursor { buf: bytes };
    if c.take(4, "magic")? != MAGIC {
        return Err(NnError::Format("bad magic".into()));
    }
    let version = c.u32("version")?;
    if version != VERSION {
        return Err(NnError::Format(format!("unsupported version {version}")));
    }
    let config_len = c.u32("config length")? as usize;
    let config: ModelConfig = serde_json::from_slice(c.take(config_len, "config")?)
        .map_err(|e| NnError::Format(format!("config: {e}")))?;
    config.validate()?;
    // refuse configs whose parameter count cannot fit in the remaining bytes
    // before allocating the network
    let mut model = Model::new(config, 0)?;
    let names = model.param_names();
    let n = c.u32("tensor count")? as usize;
    if n != names.len() {
        return Err(NnError::Format(format!(
            "expected {} tensors, found {n}",
            names.len()
        )));
    }
    let mut values = Vec::with_capacity(n);
    for expected in &names {
        let name_len = c.u16("name length")? as usize;
        let name = std::str::from_utf8(c.take(name_len, "name")?)
            .map_err(|_| NnError::Format("tensor name is not UTF-8".into()))?;
        if name != expected {
            return Err(NnError::Format(format!(
                "expected tensor {expected}, found {name}"
            )));
        }
        let len = c.u64("value count")? as usize;
        let raw = c.take(
            len.checked_mul(8)
                .ok_or_else(|| NnError::Format("value count overflow".into()))?,
            name,
        )?;
        values.push(
            raw.chunks_exact(8)
                .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
                .collect::<Vec<f64>>(),
        );
    }
    if !c.buf.is_empty() {
        return Err(NnError::Format(format!("{} trailing bytes", c.buf.len())));
    }
    for ((dst, src), name) in model.params_mut().into_iter().zip(values).zip(&names) {
        if dst.len() != src.len() {
            return Err(NnError::Format(format!(
                "{name}: expected {} values, found {}",
                dst.len(),
                src.len()
            )));
        }
        dst.copy_from_slice(&src);
    }
    Ok(model)
}
