use alloc::vec;
use alloc::vec::Vec;

use crate::error::{dim_err, Result};
use crate::tensor::Tensor;

pub fn sum_all(x: &Tensor) -> Tensor {
    Tensor::scalar(x.sum())
}

pub fn mean_all(x: &Tensor) -> Tensor {
    Tensor::scalar(x.mean())
}

/// Arithmetic mean over `axes`, keeping the reduced axes with extent 1.
pub fn mean_axes(x: &Tensor, axes: &[usize]) -> Result<Tensor> {
    if axes.is_empty() {
        return Err(dim_err!("mean over an empty axis list"));
    }
    let shape = x.shape();
    let mut out_shape = shape.to_vec();
    for &a in axes {
        if a >= shape.len() {
            return Err(dim_err!("axis {a} out of range for shape {:?}", shape));
        }
        out_shape[a] = 1;
    }
    let mut out = Tensor::zeros(&out_shape);
    let out_strides = out.strides();
    let mut idx = vec![0usize; shape.len()];
    let data = x.data();
    let out_len = out.numel();
    let od = out.data_mut();
    for &v in data {
        let mut off = 0;
        for (ax, &i) in idx.iter().enumerate() {
            if out_shape[ax] != 1 {
                off += i * out_strides[ax];
            }
        }
        od[off] += v;
        for ax in (0..shape.len()).rev() {
            idx[ax] += 1;
            if idx[ax] < shape[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
    let inv = out_len as f64 / x.numel() as f64;
    od.iter_mut().for_each(|v| *v *= inv);
    Ok(out)
}

fn split(shape: &[usize], axis: usize) -> Result<(usize, usize, usize)> {
    if axis >= shape.len() {
        return Err(dim_err!("axis {axis} out of range for shape {:?}", shape));
    }
    let outer = shape[..axis].iter().product();
    let inner = shape[axis + 1..].iter().product();
    Ok((outer, shape[axis], inner))
}

/// Max-stabilised softmax along `axis`.
pub fn softmax(x: &Tensor, axis: usize) -> Result<Tensor> {
    let (outer, len, inner) = split(x.shape(), axis)?;
    let src = x.data();
    let mut out = vec![0.0; src.len()];
    for o in 0..outer {
        for i in 0..inner {
            let at = |k: usize| (o * len + k) * inner + i;
            let mut max = f64::NEG_INFINITY;
            for k in 0..len {
                max = max.max(src[at(k)]);
            }
            let mut total = 0.0;
            for k in 0..len {
                let e = libm::exp(src[at(k)] - max);
                out[at(k)] = e;
                total += e;
            }
            for k in 0..len {
                out[at(k)] /= total;
            }
        }
    }
    Tensor::new(x.shape(), out)
}

/// `dL/dx = y * (g - sum_axis(g * y))` given the softmax output `y`.
pub fn softmax_backward(y: &Tensor, axis: usize, grad_out: &[f64]) -> Result<Vec<f64>> {
    let (outer, len, inner) = split(y.shape(), axis)?;
    let yd = y.data();
    let mut gx = vec![0.0; yd.len()];
    for o in 0..outer {
        for i in 0..inner {
            let at = |k: usize| (o * len + k) * inner + i;
            let dot: f64 = (0..len).map(|k| grad_out[at(k)] * yd[at(k)]).sum();
            for k in 0..len {
                gx[at(k)] = yd[at(k)] * (grad_out[at(k)] - dot);
            }
        }
    }
    Ok(gx)
}
