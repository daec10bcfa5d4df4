use alloc::vec;
use alloc::vec::Vec;

use crate::error::{dim_err, Result};
use crate::tensor::{strides_of, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
}

impl BinaryOp {
    #[inline]
    fn apply(self, a: f64, b: f64) -> f64 {
        match self {
            BinaryOp::Add => a + b,
            BinaryOp::Sub => a - b,
            BinaryOp::Mul => a * b,
            BinaryOp::Div => a / b,
        }
    }
}

/// Numpy-style broadcast of two shapes (trailing axes aligned).
pub fn broadcast_shape(a: &[usize], b: &[usize]) -> Result<Vec<usize>> {
    let rank = a.len().max(b.len());
    let mut out = vec![0; rank];
    for i in 0..rank {
        let da = if i + a.len() >= rank { a[i + a.len() - rank] } else { 1 };
        let db = if i + b.len() >= rank { b[i + b.len() - rank] } else { 1 };
        out[i] = match (da, db) {
            (x, y) if x == y => x,
            (1, y) => y,
            (x, 1) => x,
            _ => return Err(dim_err!("shapes {:?} and {:?} do not broadcast", a, b)),
        };
    }
    Ok(out)
}

/// Strides of `shape` viewed inside `out` (zero along broadcast axes).
fn broadcast_strides(shape: &[usize], out: &[usize]) -> Vec<usize> {
    let own = strides_of(shape);
    let lead = out.len() - shape.len();
    (0..out.len())
        .map(|i| {
            if i < lead || shape[i - lead] == 1 {
                0
            } else {
                own[i - lead]
            }
        })
        .collect()
}

/// Calls `f(out_index, a_offset, b_offset)` for every element of the broadcast result.
fn for_each_broadcast(a: &[usize], b: &[usize], out: &[usize], mut f: impl FnMut(usize, usize, usize)) {
    let sa = broadcast_strides(a, out);
    let sb = broadcast_strides(b, out);
    let n: usize = out.iter().product();
    let mut idx = vec![0usize; out.len()];
    let (mut oa, mut ob) = (0usize, 0usize);
    for i in 0..n {
        f(i, oa, ob);
        for ax in (0..out.len()).rev() {
            idx[ax] += 1;
            oa += sa[ax];
            ob += sb[ax];
            if idx[ax] < out[ax] {
                break;
            }
            oa -= sa[ax] * out[ax];
            ob -= sb[ax] * out[ax];
            idx[ax] = 0;
        }
    }
}

fn binary(a: &Tensor, b: &Tensor, op: BinaryOp) -> Result<Tensor> {
    if a.shape() == b.shape() {
        let data = a.data().iter().zip(b.data()).map(|(&x, &y)| op.apply(x, y)).collect();
        return Tensor::new(a.shape(), data);
    }
    let out = broadcast_shape(a.shape(), b.shape())?;
    let mut data = vec![0.0; out.iter().product()];
    let (ad, bd) = (a.data(), b.data());
    for_each_broadcast(a.shape(), b.shape(), &out, |i, ia, ib| data[i] = op.apply(ad[ia], bd[ib]));
    Tensor::new(&out, data)
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    binary(a, b, BinaryOp::Add)
}

pub fn sub(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    binary(a, b, BinaryOp::Sub)
}

/// Hadamard product.
pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    binary(a, b, BinaryOp::Mul)
}

pub fn div(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    binary(a, b, BinaryOp::Div)
}

/// Sums a broadcast gradient back down to `shape`.
pub fn reduce_to_shape(grad: &[f64], out: &[usize], shape: &[usize]) -> Vec<f64> {
    if out == shape {
        return grad.to_vec();
    }
    let mut acc = vec![0.0; shape.iter().product()];
    for_each_broadcast(shape, shape, out, |i, ia, _| acc[ia] += grad[i]);
    acc
}

/// Adjoints of a broadcasting binary op with respect to both operands.
pub fn binary_backward(op: BinaryOp, a: &Tensor, b: &Tensor, grad_out: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let out = broadcast_shape(a.shape(), b.shape())?;
    let n = grad_out.len();
    let mut ga = vec![0.0; n];
    let mut gb = vec![0.0; n];
    let (ad, bd) = (a.data(), b.data());
    for_each_broadcast(a.shape(), b.shape(), &out, |i, ia, ib| {
        let g = grad_out[i];
        let (x, y) = (ad[ia], bd[ib]);
        let (da, db) = match op {
            BinaryOp::Add => (g, g),
            BinaryOp::Sub => (g, -g),
            BinaryOp::Mul => (g * y, g * x),
            BinaryOp::Div => (g / y, -g * x / (y * y)),
        };
        ga[i] = da;
        gb[i] = db;
    });
    Ok((
        reduce_to_shape(&ga, &out, a.shape()),
        reduce_to_shape(&gb, &out, b.shape()),
    ))
}

/// `max(0, x)`; the subgradient at 0 is taken as 0.
pub fn relu(x: &Tensor) -> Tensor {
    x.map(|v| if v > 0.0 { v } else { 0.0 })
}

pub fn abs(x: &Tensor) -> Tensor {
    x.map(libm::fabs)
}
