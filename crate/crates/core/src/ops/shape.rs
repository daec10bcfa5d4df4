use alloc::vec;
use alloc::vec::Vec;

use crate::error::{dim_err, Result};
use crate::tensor::Tensor;

/// Reorders axes: output axis `i` is input axis `perm[i]`.
pub fn permute(x: &Tensor, perm: &[usize]) -> Result<Tensor> {
    let shape = x.shape();
    let rank = shape.len();
    let mut seen = vec![false; rank];
    if perm.len() != rank || perm.iter().any(|&p| p >= rank || core::mem::replace(&mut seen[p], true)) {
        return Err(dim_err!("{:?} is not a permutation of {} axes", perm, rank));
    }
    let in_strides = x.strides();
    let out_shape: Vec<usize> = perm.iter().map(|&p| shape[p]).collect();
    let gather: Vec<usize> = perm.iter().map(|&p| in_strides[p]).collect();
    let src = x.data();
    let mut out = Vec::with_capacity(src.len());
    let mut idx = vec![0usize; rank];
    let mut off = 0usize;
    for _ in 0..src.len() {
        out.push(src[off]);
        for ax in (0..rank).rev() {
            idx[ax] += 1;
            off += gather[ax];
            if idx[ax] < out_shape[ax] {
                break;
            }
            off -= gather[ax] * out_shape[ax];
            idx[ax] = 0;
        }
    }
    Tensor::new(&out_shape, out)
}

pub fn inverse_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

pub fn transpose_last2(x: &Tensor) -> Result<Tensor> {
    let r = x.rank();
    if r < 2 {
        return Err(dim_err!("transpose needs rank >= 2, got {:?}", x.shape()));
    }
    let mut perm: Vec<usize> = (0..r).collect();
    perm.swap(r - 2, r - 1);
    permute(x, &perm)
}

fn outer_inner(shape: &[usize], axis: usize) -> (usize, usize) {
    (shape[..axis].iter().product(), shape[axis + 1..].iter().product())
}

/// Slice `[start, start + len)` along `axis`.
pub fn narrow(x: &Tensor, axis: usize, start: usize, len: usize) -> Result<Tensor> {
    let shape = x.shape();
    if axis >= shape.len() || len == 0 || start + len > shape[axis] {
        return Err(dim_err!(
            "narrow(axis {axis}, {start}..{}) out of range for {:?}",
            start + len,
            shape
        ));
    }
    let (outer, inner) = outer_inner(shape, axis);
    let src = x.data();
    let mut out = Vec::with_capacity(outer * len * inner);
    for o in 0..outer {
        let base = (o * shape[axis] + start) * inner;
        out.extend_from_slice(&src[base..base + len * inner]);
    }
    let mut out_shape = shape.to_vec();
    out_shape[axis] = len;
    Tensor::new(&out_shape, out)
}

/// Concatenation along `axis`; all other extents must agree.
pub fn concat(xs: &[&Tensor], axis: usize) -> Result<Tensor> {
    let first = xs.first().ok_or_else(|| dim_err!("concat of zero tensors"))?;
    let shape = first.shape();
    if axis >= shape.len() {
        return Err(dim_err!("axis {axis} out of range for {:?}", shape));
    }
    let mut total = 0;
    for x in xs {
        let s = x.shape();
        let compatible = s.len() == shape.len()
            && s.iter().zip(shape).enumerate().all(|(i, (a, b))| i == axis || a == b);
        if !compatible {
            return Err(dim_err!("cannot concat {:?} with {:?} on axis {axis}", s, shape));
        }
        total += s[axis];
    }
    let (outer, inner) = outer_inner(shape, axis);
    let mut out = Vec::with_capacity(outer * total * inner);
    for o in 0..outer {
        for x in xs {
            let n = x.shape()[axis] * inner;
            out.extend_from_slice(&x.data()[o * n..(o + 1) * n]);
        }
    }
    let mut out_shape = shape.to_vec();
    out_shape[axis] = total;
    Tensor::new(&out_shape, out)
}

/// Depth-to-space: `[N, C*r*r, H, W] -> [N, C, H*r, W*r]`.
///
/// Output pixel `(h*r + i, w*r + j)` of channel `c` comes from input channel
/// `c*r*r + i*r + j` at `(h, w)`.
pub fn pixel_shuffle(x: &Tensor, r: usize) -> Result<Tensor> {
    let s = x.shape();
    if s.len() != 4 || r == 0 || !s[1].is_multiple_of(r * r) {
        return Err(dim_err!("pixel_shuffle(r={r}) needs [N, C*r^2, H, W], got {:?}", s));
    }
    let (n, c, h, w) = (s[0], s[1] / (r * r), s[2], s[3]);
    let src = x.data();
    let mut out = vec![0.0; src.len()];
    let (oh, ow) = (h * r, w * r);
    for b in 0..n {
        for ch in 0..c {
            for i in 0..r {
                for j in 0..r {
                    let ic = ch * r * r + i * r + j;
                    let ibase = (b * s[1] + ic) * h * w;
                    let obase = (b * c + ch) * oh * ow;
                    for y in 0..h {
                        for xx in 0..w {
                            out[obase + (y * r + i) * ow + xx * r + j] = src[ibase + y * w + xx];
                        }
                    }
                }
            }
        }
    }
    Tensor::new(&[n, c, oh, ow], out)
}

/// Space-to-depth, the exact inverse of [`pixel_shuffle`].
pub fn pixel_unshuffle(x: &Tensor, r: usize) -> Result<Tensor> {
    let s = x.shape();
    if s.len() != 4 || r == 0 || !s[2].is_multiple_of(r) || !s[3].is_multiple_of(r) {
        return Err(dim_err!("pixel_unshuffle(r={r}) needs [N, C, H*r, W*r], got {:?}", s));
    }
    let (n, c, oh, ow) = (s[0], s[1], s[2], s[3]);
    let (h, w) = (oh / r, ow / r);
    let src = x.data();
    let mut out = vec![0.0; src.len()];
    for b in 0..n {
        for ch in 0..c {
            for i in 0..r {
                for j in 0..r {
                    let oc = ch * r * r + i * r + j;
                    let obase = (b * c * r * r + oc) * h * w;
                    let ibase = (b * c + ch) * oh * ow;
                    for y in 0..h {
                        for xx in 0..w {
                            out[obase + y * w + xx] = src[ibase + (y * r + i) * ow + xx * r + j];
                        }
                    }
                }
            }
        }
    }
    Tensor::new(&[n, c * r * r, h, w], out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shuffle_index_map() {
        let x = Tensor::new(&[1, 4, 1, 1], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let y = pixel_shuffle(&x, 2).unwrap();
        assert_eq!(y.shape(), &[1, 1, 2, 2]);
        assert_eq!(y.data(), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn shuffle_r1_identity_and_indivisible() {
        let x = Tensor::from_fn(&[2, 3, 4, 5], |i| i as f64);
        assert_eq!(pixel_shuffle(&x, 1).unwrap(), x);
        assert!(pixel_shuffle(&x, 2).is_err());
    }

    #[test]
    fn permute_transposes() {
        let x = Tensor::from_fn(&[2, 3], |i| i as f64);
        let y = permute(&x, &[1, 0]).unwrap();
        assert_eq!(y.shape(), &[3, 2]);
        assert_eq!(y.data(), &[0.0, 3.0, 1.0, 4.0, 2.0, 5.0]);
        assert!(permute(&x, &[0, 0]).is_err());
        assert_eq!(inverse_permutation(&[2, 0, 1]), vec![1, 2, 0]);
    }

    #[test]
    fn narrow_and_concat_roundtrip() {
        let x = Tensor::from_fn(&[2, 5, 3], |i| i as f64);
        let a = narrow(&x, 1, 0, 2).unwrap();
        let b = narrow(&x, 1, 2, 3).unwrap();
        assert_eq!(concat(&[&a, &b], 1).unwrap(), x);
        assert!(narrow(&x, 1, 4, 2).is_err());
    }
}
