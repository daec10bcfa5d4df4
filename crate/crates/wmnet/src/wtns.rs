//! WTNS tensor container.
//!
//! Layout (little-endian): the magic `WTNS`, a `u32` rank, `rank` `u32`
//! extents, a dtype byte (0 for f32, 1 for f64) and the row-major samples.

use std::path::Path;

use wmnet_core::Tensor;

use crate::error::{read_file, write_file, CliError, Result};

const MAGIC: &[u8; 4] = b"WTNS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32,
    F64,
}

impl Dtype {
    fn code(self) -> u8 {
        match self {
            Dtype::F32 => 0,
            Dtype::F64 => 1,
        }
    }

    fn width(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::F64 => 8,
        }
    }
}

pub fn encode_wtns(t: &Tensor, dtype: Dtype) -> Vec<u8> {
    let mut out = Vec::with_capacity(9 + 4 * t.rank() + dtype.width() * t.numel());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(t.rank() as u32).to_le_bytes());
    for &d in t.shape() {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    out.push(dtype.code());
    for &v in t.data() {
        match dtype {
            Dtype::F32 => out.extend_from_slice(&(v as f32).to_le_bytes()),
            Dtype::F64 => out.extend_from_slice(&v.to_le_bytes()),
        }
    }
    out
}

pub fn decode_wtns(bytes: &[u8], path: &Path) -> Result<Tensor> {
    let err = |offset: usize, message: String| CliError::Parse { path: path.to_path_buf(), offset, message };
    let u32_at = |pos: usize| -> Result<usize> {
        bytes
            .get(pos..pos + 4)
            .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")) as usize)
            .ok_or_else(|| err(pos, "truncated header".into()))
    };
    if bytes.get(..4) != Some(MAGIC.as_slice()) {
        return Err(err(0, "missing WTNS magic".into()));
    }
    let rank = u32_at(4)?;
    let shape = (0..rank).map(|i| u32_at(8 + 4 * i)).collect::<Result<Vec<_>>>()?;
    let pos = 8 + 4 * rank;
    let dtype = match bytes.get(pos) {
        Some(0) => Dtype::F32,
        Some(1) => Dtype::F64,
        Some(c) => return Err(err(pos, format!("unknown dtype code {c}"))),
        None => return Err(err(pos, "truncated header".into())),
    };
    let numel = shape
        .iter()
        .try_fold(dtype.width(), |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| err(8, "shape too large".into()))?
        / dtype.width();
    let body = &bytes[pos + 1..];
    if body.len() != numel * dtype.width() {
        return Err(err(pos + 1, format!("expected {} payload bytes, found {}", numel * dtype.width(), body.len())));
    }
    let data = match dtype {
        Dtype::F32 => body.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4")) as f64).collect(),
        Dtype::F64 => body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8"))).collect(),
    };
    Ok(Tensor::new(&shape, data)?)
}

pub fn read_wtns(path: &Path) -> Result<Tensor> {
    decode_wtns(&read_file(path)?, path)
}

pub fn write_wtns(path: &Path, t: &Tensor, dtype: Dtype) -> Result<()> {
    write_file(path, &encode_wtns(t, dtype))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let t = Tensor::new(&[2, 1], vec![1.0, -0.5]).unwrap();
        let b = encode_wtns(&t, Dtype::F64);
        assert_eq!(&b[..4], b"WTNS");
        assert_eq!(&b[4..16], &[2, 0, 0, 0, 2, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(b[16], 1);
        assert_eq!(b.len(), 17 + 16);
        assert_eq!(decode_wtns(&b, Path::new("x")).unwrap(), t);
    }

    #[test]
    fn scalar_and_truncation() {
        let t = Tensor::scalar(3.25);
        let b = encode_wtns(&t, Dtype::F32);
        assert_eq!(decode_wtns(&b, Path::new("x")).unwrap(), t);
        assert!(decode_wtns(&b[..b.len() - 1], Path::new("x")).is_err());
        assert!(decode_wtns(b"WTNX", Path::new("x")).is_err());
    }
}
