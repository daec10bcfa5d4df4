use alloc::vec;
use alloc::vec::Vec;

use super::elementwise::{broadcast_shape, reduce_to_shape};
use crate::error::{dim_err, Result};
use crate::tensor::{strides_of, Tensor};

struct Plan {
    batch: Vec<usize>,
    m: usize,
    k: usize,
    n: usize,
    a_off: Vec<usize>,
    b_off: Vec<usize>,
}

fn plan(a: &[usize], b: &[usize]) -> Result<Plan> {
    if a.len() < 2 || b.len() < 2 {
        return Err(dim_err!("matmul needs rank >= 2 operands, got {:?} and {:?}", a, b));
    }
    let (m, k) = (a[a.len() - 2], a[a.len() - 1]);
    let (k2, n) = (b[b.len() - 2], b[b.len() - 1]);
    if k != k2 {
        return Err(dim_err!("inner dimensions differ: {:?} x {:?}", a, b));
    }
    let (ab, bb) = (&a[..a.len() - 2], &b[..b.len() - 2]);
    let batch = broadcast_shape(ab, bb)?;
    let count: usize = batch.iter().product();
    let offsets = |own: &[usize], mat: usize| -> Vec<usize> {
        let lead = batch.len() - own.len();
        let st = strides_of(own);
        let mut idx = vec![0usize; batch.len()];
        let mut out = Vec::with_capacity(count);
        for _ in 0..count {
            let mut off = 0;
            for (ax, &i) in idx.iter().enumerate() {
                if ax >= lead && own[ax - lead] != 1 {
                    off += i * st[ax - lead];
                }
            }
            out.push(off * mat);
            for ax in (0..batch.len()).rev() {
                idx[ax] += 1;
                if idx[ax] < batch[ax] {
                    break;
                }
                idx[ax] = 0;
            }
        }
        out
    };
    let a_off = offsets(ab, m * k);
    let b_off = offsets(bb, k * n);
    Ok(Plan { batch, m, k, n, a_off, b_off })
}

/// Batched matrix product with broadcasting over leading axes.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let p = plan(a.shape(), b.shape())?;
    let (ad, bd) = (a.data(), b.data());
    let mut out = vec![0.0; p.a_off.len() * p.m * p.n];
    for (bi, (&ao, &bo)) in p.a_off.iter().zip(&p.b_off).enumerate() {
        let oo = bi * p.m * p.n;
        for i in 0..p.m {
            let row = &mut out[oo + i * p.n..oo + (i + 1) * p.n];
            for kk in 0..p.k {
                let av = ad[ao + i * p.k + kk];
                let brow = &bd[bo + kk * p.n..bo + (kk + 1) * p.n];
                for (o, &bv) in row.iter_mut().zip(brow) {
                    *o += av * bv;
                }
            }
        }
    }
    let mut shape = p.batch.clone();
    shape.push(p.m);
    shape.push(p.n);
    Tensor::new(&shape, out)
}

/// Returns `(dL/da, dL/db)` for `out = a @ b`.
pub fn matmul_backward(a: &Tensor, b: &Tensor, grad_out: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let p = plan(a.shape(), b.shape())?;
    let (ad, bd) = (a.data(), b.data());
    let nb = p.a_off.len();
    // gradients in the broadcast batch layout, reduced afterwards
    let mut ga = vec![0.0; nb * p.m * p.k];
    let mut gb = vec![0.0; nb * p.k * p.n];
    for bi in 0..nb {
        let (ao, bo, oo) = (p.a_off[bi], p.b_off[bi], bi * p.m * p.n);
        for i in 0..p.m {
            for kk in 0..p.k {
                let mut acc = 0.0;
                for j in 0..p.n {
                    let g = grad_out[oo + i * p.n + j];
                    acc += g * bd[bo + kk * p.n + j];
                    gb[bi * p.k * p.n + kk * p.n + j] += ad[ao + i * p.k + kk] * g;
                }
                ga[bi * p.m * p.k + i * p.k + kk] = acc;
            }
        }
    }
    let mut full_a = p.batch.clone();
    full_a.extend([p.m, p.k]);
    let mut full_b = p.batch.clone();
    full_b.extend([p.k, p.n]);
    Ok((
        reduce_to_shape(&ga, &full_a, a.shape()),
        reduce_to_shape(&gb, &full_b, b.shape()),
    ))
}
