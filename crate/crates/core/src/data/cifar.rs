//! CIFAR-10 binary batches: 3073-byte records of one label byte followed by
//! 1024 red, 1024 green and 1024 blue bytes (row-major 32x32 planes).

use crate::error::DataError;

pub const CIFAR_RECORD_LEN: usize = 1 + 3 * 32 * 32;

/// Returns channel-planar pixels (`n * 3 * 32 * 32`) and labels.
pub fn parse_cifar_batch(bytes: &[u8]) -> Result<(Vec<u8>, Vec<u8>), DataError> {
    if !bytes.len().is_multiple_of(CIFAR_RECORD_LEN) {
        return Err(DataError::CifarLength(bytes.len()));
    }
    let n = bytes.len() / CIFAR_RECORD_LEN;
    let mut pixels = Vec::with_capacity(n * (CIFAR_RECORD_LEN - 1));
    let mut labels = Vec::with_capacity(n);
    for (index, rec) in bytes.chunks_exact(CIFAR_RECORD_LEN).enumerate() {
        if rec[0] > 9 {
            return Err(DataError::InvalidLabel { label: rec[0], index });
        }
        labels.push(rec[0]);
        pixels.extend_from_slice(&rec[1..]);
    }
    Ok((pixels, labels))
}

pub fn write_cifar_batch(pixels: &[u8], labels: &[u8]) -> Result<Vec<u8>, DataError> {
    if pixels.len() != labels.len() * (CIFAR_RECORD_LEN - 1) {
        return Err(DataError::DimensionMismatch(format!(
            "{} pixel bytes for {} labels",
            pixels.len(),
            labels.len()
        )));
    }
    let mut out = Vec::with_capacity(labels.len() * CIFAR_RECORD_LEN);
    for (&l, img) in labels.iter().zip(pixels.chunks_exact(CIFAR_RECORD_LEN - 1)) {
        out.push(l);
        out.extend_from_slice(img);
    }
    Ok(out)
}
