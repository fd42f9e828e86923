//! IDX containers: a big-endian `u32` magic (`0x00000803` for 3-D image
//! files, `0x00000801` for 1-D label files), one big-endian `u32` per
//! dimension, then `prod(dims)` unsigned bytes.

use crate::error::DataError;

pub const IDX_MAGIC_IMAGES: u32 = 0x0000_0803;
pub const IDX_MAGIC_LABELS: u32 = 0x0000_0801;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxArray {
    pub dims: Vec<usize>,
    pub data: Vec<u8>,
}

fn read_u32(bytes: &[u8], at: usize, what: &'static str) -> Result<u32, DataError> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(DataError::Truncated {
            what,
            expected: at + 4,
            found: bytes.len(),
        })
}

pub fn parse_idx(bytes: &[u8]) -> Result<IdxArray, DataError> {
    let magic = read_u32(bytes, 0, "IDX header")?;
    let ndim = match magic {
        IDX_MAGIC_IMAGES => 3,
        IDX_MAGIC_LABELS => 1,
        other => return Err(DataError::BadMagic(other)),
    };
    let dims = (0..ndim)
        .map(|d| read_u32(bytes, 4 + 4 * d, "IDX header").map(|v| v as usize))
        .collect::<Result<Vec<_>, _>>()?;
    let header = 4 + 4 * ndim;
    let count: usize = dims.iter().product();
    let payload = &bytes[header..];
    if payload.len() < count {
        return Err(DataError::Truncated {
            what: "IDX payload",
            expected: count,
            found: payload.len(),
        });
    }
    if payload.len() > count {
        return Err(DataError::DimensionMismatch(format!(
            "dims {dims:?} describe {count} bytes but the payload has {}",
            payload.len()
        )));
    }
    Ok(IdxArray {
        dims,
        data: payload.to_vec(),
    })
}

/// Serialises 1-D or 3-D unsigned-byte arrays.
pub fn write_idx(array: &IdxArray) -> Result<Vec<u8>, DataError> {
    let magic = match array.dims.len() {
        1 => IDX_MAGIC_LABELS,
        3 => IDX_MAGIC_IMAGES,
        n => return Err(DataError::DimensionMismatch(format!("IDX rank {n} unsupported"))),
    };
    if array.dims.iter().product::<usize>() != array.data.len() {
        return Err(DataError::DimensionMismatch(format!(
            "dims {:?} vs {} bytes",
            array.dims,
            array.data.len()
        )));
    }
    let mut out = Vec::with_capacity(4 + 4 * array.dims.len() + array.data.len());
    out.extend_from_slice(&magic.to_be_bytes());
    for &d in &array.dims {
        out.extend_from_slice(&(d as u32).to_be_bytes());
    }
    out.extend_from_slice(&array.data);
    Ok(out)
}
