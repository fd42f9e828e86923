//! Checkpoint files: a text header (magic, version, spec stanza, parameter
//! table) followed by every parameter as little-endian `f64`, in layer order.

use std::fs;
use std::path::Path;

use super::spec::parse_registry;
use super::Model;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &str = "kanvision-checkpoint";
const VERSION: u32 = 1;
const DATA_MARKER: &str = "data";

pub fn write_checkpoint<T: Scalar>(model: &Model<T>) -> Vec<u8> {
    let mut header = format!("{CHECKPOINT_MAGIC} {VERSION}\n");
    header.push_str(&model.spec().to_stanza());
    header.push_str("--\n");
    let params = model.params();
    for (i, p) in params.iter().enumerate() {
        let dims: Vec<String> = p.value.shape().iter().map(|d| d.to_string()).collect();
        header.push_str(&format!("param {i} {} {}\n", p.name, dims.join("x")));
    }
    header.push_str(DATA_MARKER);
    header.push('\n');
    let mut out = header.into_bytes();
    for p in params {
        for v in p.value.data() {
            out.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    out
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

/// Rebuilds the model from the embedded spec and loads the stored values.
pub fn read_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<Model<T>> {
    let mut lines = Vec::new();
    let mut pos = 0;
    loop {
        let end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| bad("header is not terminated"))?;
        let line = std::str::from_utf8(&bytes[pos..pos + end]).map_err(|_| bad("header is not UTF-8"))?;
        pos += end + 1;
        if line == DATA_MARKER {
            break;
        }
        lines.push(line);
    }
    let first = lines.first().ok_or_else(|| bad("empty header"))?;
    match first.split_once(' ') {
        Some((CHECKPOINT_MAGIC, v)) if v == VERSION.to_string() => {}
        _ => return Err(bad(format!("unrecognised header line `{first}`"))),
    }
    let sep = lines.iter().position(|l| *l == "--").ok_or_else(|| bad("missing spec terminator"))?;
    let spec_text = lines[1..sep].join("\n");
    let spec = parse_registry(&spec_text)?
        .into_iter()
        .next()
        .ok_or_else(|| bad("checkpoint carries no spec"))?;
    let mut model = Model::<T>::build(&spec)?;

    let table = &lines[sep + 1..];
    let mut payload = &bytes[pos..];
    let params = model.params_mut();
    if table.len() != params.len() {
        return Err(bad(format!("{} stored tensors, model has {}", table.len(), params.len())));
    }
    for (p, entry) in params.into_iter().zip(table) {
        let dims: Vec<String> = p.value.shape().iter().map(|d| d.to_string()).collect();
        let expected_tail = format!("{} {}", p.name, dims.join("x"));
        if !entry.ends_with(&expected_tail) {
            return Err(bad(format!("entry `{entry}` does not match `{expected_tail}`")));
        }
        let n = p.value.len() * 8;
        if payload.len() < n {
            return Err(bad("payload truncated"));
        }
        for (dst, chunk) in p.value.data_mut().iter_mut().zip(payload[..n].chunks_exact(8)) {
            *dst = T::lit(f64::from_le_bytes(chunk.try_into().expect("8-byte chunk")));
        }
        payload = &payload[n..];
    }
    if !payload.is_empty() {
        return Err(bad(format!("{} trailing bytes", payload.len())));
    }
    Ok(model)
}

pub fn save_checkpoint<T: Scalar>(model: &Model<T>, path: &Path) -> Result<()> {
    fs::write(path, write_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<Model<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&bytes)
}
