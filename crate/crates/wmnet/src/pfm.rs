//! Portable float map images.
//!
//! Colour files start with `PF`, greyscale with `Pf`, followed by the width,
//! the height and a scale whose sign gives the byte order (negative means
//! little-endian). Rows are stored bottom to top as 32-bit floats with
//! interleaved channels. Frames are `[C, H, W]` tensors top row first.

use std::path::Path;

use wmnet_core::Tensor;

use crate::error::{read_file, write_file, CliError, Result};

/// Serialises a `[3, H, W]` or `[1, H, W]` frame as little-endian PFM.
pub fn encode_pfm(frame: &Tensor) -> Result<Vec<u8>> {
    let (c, h, w) = match frame.shape() {
        &[c @ (1 | 3), h, w] => (c, h, w),
        s => return Err(wmnet_core::Error::Dimension(format!("PFM needs [1|3, H, W], got {s:?}")).into()),
    };
    let magic = if c == 3 { "PF" } else { "Pf" };
    let mut out = format!("{magic}\n{w} {h}\n-1.0\n").into_bytes();
    out.reserve(c * h * w * 4);
    let d = frame.data();
    for y in (0..h).rev() {
        for x in 0..w {
            for ch in 0..c {
                out.extend_from_slice(&(d[(ch * h + y) * w + x] as f32).to_le_bytes());
            }
        }
    }
    Ok(out)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_whitespace(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    /// Next whitespace-delimited token and its offset; on failure the offset
    /// where one was expected.
    fn token(&mut self) -> std::result::Result<(usize, String), usize> {
        self.skip_whitespace();
        let start = self.pos;
        while self.pos < self.bytes.len() && !self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        match std::str::from_utf8(&self.bytes[start..self.pos]) {
            Ok(s) if !s.is_empty() => Ok((start, s.to_string())),
            _ => Err(start),
        }
    }
}

/// Parses PFM bytes; `path` only labels errors.
pub fn decode_pfm(bytes: &[u8], path: &Path) -> Result<Tensor> {
    let err = |offset: usize, message: String| CliError::Parse { path: path.to_path_buf(), offset, message };
    let mut cur = Cursor { bytes, pos: 0 };
    let channels = match cur.token().map(|(_, t)| t).as_deref() {
        Ok("PF") => 3,
        Ok("Pf") => 1,
        _ => return Err(err(0, "expected PF or Pf".into())),
    };
    let mut dim = |what: &str| -> Result<usize> {
        let (off, tok) = cur.token().map_err(|at| err(at, format!("missing {what}")))?;
        match tok.parse::<usize>() {
            Ok(v) if v > 0 => Ok(v),
            _ => Err(err(off, format!("invalid {what} {tok:?}"))),
        }
    };
    let width = dim("width")?;
    let height = dim("height")?;
    let (off, tok) = cur.token().map_err(|at| err(at, "missing scale".into()))?;
    let scale: f64 = tok.parse().map_err(|_| err(off, format!("invalid scale {tok:?}")))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(err(off, format!("invalid scale {tok:?}")));
    }
    let little = scale < 0.0;
    // exactly one whitespace byte separates the header from the samples
    if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
        return Err(err(cur.pos, "missing separator after scale".into()));
    }
    let start = cur.pos + 1;
    let expected = [width, height, 4]
        .iter()
        .try_fold(channels, |acc: usize, &d| acc.checked_mul(d))
        .ok_or_else(|| err(off, "image too large".into()))?;
    let body = &bytes[start..];
    if body.len() != expected {
        return Err(err(start, format!("expected {expected} bytes of samples, found {}", body.len())));
    }
    let mut data = vec![0.0; channels * width * height];
    for (i, chunk) in body.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
        let (pixel, ch) = (i / channels, i % channels);
        let (row, x) = (pixel / width, pixel % width);
        let y = height - 1 - row;
        data[(ch * height + y) * width + x] = v as f64;
    }
    Ok(Tensor::new(&[channels, height, width], data)?)
}

pub fn read_pfm(path: &Path) -> Result<Tensor> {
    decode_pfm(&read_file(path)?, path)
}

pub fn write_pfm(path: &Path, frame: &Tensor) -> Result<()> {
    write_file(path, &encode_pfm(frame)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_and_orientation() {
        let f = Tensor::from_fn(&[3, 2, 3], |i| i as f64 * 0.25);
        let bytes = encode_pfm(&f).unwrap();
        assert!(bytes.starts_with(b"PF\n3 2\n-1.0\n"));
        // first stored sample is the bottom-left red value
        let first = f32::from_le_bytes(bytes[12..16].try_into().unwrap());
        assert_eq!(first as f64, f.at(&[0, 1, 0]));
        assert_eq!(decode_pfm(&bytes, Path::new("x")).unwrap(), f);
    }

    #[test]
    fn big_endian_and_grey() {
        let mut bytes = b"Pf 2 1 1.0\n".to_vec();
        bytes.extend_from_slice(&1.5f32.to_be_bytes());
        bytes.extend_from_slice(&(-2.0f32).to_be_bytes());
        let t = decode_pfm(&bytes, Path::new("x")).unwrap();
        assert_eq!(t.shape(), &[1, 1, 2]);
        assert_eq!(t.data(), &[1.5, -2.0]);
    }

    #[test]
    fn errors_carry_offsets() {
        match decode_pfm(b"PF\n4 x\n-1.0\n", Path::new("x")) {
            Err(CliError::Parse { offset, .. }) => assert_eq!(offset, 5),
            other => panic!("{other:?}"),
        }
        match decode_pfm(b"PF\n1 1\n-1.0\n\0\0", Path::new("x")) {
            Err(CliError::Parse { offset, .. }) => assert_eq!(offset, 12),
            other => panic!("{other:?}"),
        }
        assert!(decode_pfm(b"P6\n1 1\n255\n", Path::new("x")).is_err());
        assert!(decode_pfm(b"PF\n99999999999 99999999999\n-1.0\n", Path::new("x")).is_err());
    }
}
