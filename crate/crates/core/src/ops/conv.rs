//! Direct (cross-correlation) convolutions with zero padding.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{config_err, dim_err, Result};
use crate::tensor::Tensor;

/// Zero padding for a 3D convolution, in (time, height, width) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Padding3 {
    pub t: usize,
    pub h: usize,
    pub w: usize,
}

impl Padding3 {
    pub fn new(t: usize, h: usize, w: usize) -> Self {
        Self { t, h, w }
    }

    /// Padding that keeps the temporal extent unchanged at stride 1.
    ///
    /// Fails for even temporal kernels, which cannot be padded symmetrically.
    pub fn same_temporal(kt: usize, h: usize, w: usize) -> Result<Self> {
        if kt.is_multiple_of(2) {
            return Err(config_err!(
                "temporal kernel {kt} is even; symmetric padding is impossible"
            ));
        }
        Ok(Self { t: (kt - 1) / 2, h, w })
    }
}

pub struct ConvGrads {
    pub input: Option<Tensor>,
    pub weight: Tensor,
    pub bias: Tensor,
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    n: usize,
    c: usize,
    o: usize,
    t: usize,
    h: usize,
    w: usize,
    kt: usize,
    kh: usize,
    kw: usize,
    ot: usize,
    oh: usize,
    ow: usize,
    stride: usize,
    pad: Padding3,
}

fn out_extent(len: usize, k: usize, stride: usize, pad: usize) -> Result<usize> {
    if k > len + 2 * pad {
        return Err(dim_err!(
            "kernel extent {k} exceeds padded input extent {}",
            len + 2 * pad
        ));
    }
    Ok((len + 2 * pad - k) / stride + 1)
}

/// Output indices `[lo, hi)` whose tap `k` lands inside the input.
#[inline]
fn valid_range(len: usize, out: usize, k: usize, stride: usize, pad: usize) -> (usize, usize) {
    let lo = if pad > k { (pad - k).div_ceil(stride) } else { 0 };
    if len + pad < k + 1 {
        return (0, 0);
    }
    let hi = ((len - 1 + pad - k) / stride + 1).min(out);
    (lo.min(hi), hi)
}

impl Geometry {
    fn build(
        input: &[usize],
        weight: &[usize],
        bias: &[usize],
        stride: usize,
        pad: Padding3,
    ) -> Result<Self> {
        if stride == 0 {
            return Err(config_err!("stride must be at least 1"));
        }
        let (n, c, t, h, w) = (input[0], input[1], input[2], input[3], input[4]);
        let (o, wc, kt, kh, kw) = (weight[0], weight[1], weight[2], weight[3], weight[4]);
        if wc != c {
            return Err(dim_err!(
                "input has {c} channels but weight expects {wc}"
            ));
        }
        if bias != [o] {
            return Err(dim_err!("bias shape {:?} does not match {o} outputs", bias));
        }
        let ot = out_extent(t, kt, stride, pad.t)?;
        let oh = out_extent(h, kh, stride, pad.h)?;
        let ow = out_extent(w, kw, stride, pad.w)?;
        Ok(Self { n, c, o, t, h, w, kt, kh, kw, ot, oh, ow, stride, pad })
    }

    fn out_shape5(&self) -> [usize; 5] {
        [self.n, self.o, self.ot, self.oh, self.ow]
    }

    /// Visits every (output offset, input offset, weight offset) triple.
    #[inline]
    fn for_each_tap(&self, mut f: impl FnMut(usize, usize, usize)) {
        let g = self;
        let in_plane = g.h * g.w;
        let out_plane = g.oh * g.ow;
        for n in 0..g.n {
            for o in 0..g.o {
                let out_base = (n * g.o + o) * g.ot * out_plane;
                for c in 0..g.c {
                    let in_base = (n * g.c + c) * g.t * in_plane;
                    let w_base = (o * g.c + c) * g.kt * g.kh * g.kw;
                    for dt in 0..g.kt {
                        let (t_lo, t_hi) = valid_range(g.t, g.ot, dt, g.stride, g.pad.t);
                        for dy in 0..g.kh {
                            let (y_lo, y_hi) = valid_range(g.h, g.oh, dy, g.stride, g.pad.h);
                            for dx in 0..g.kw {
                                let (x_lo, x_hi) =
                                    valid_range(g.w, g.ow, dx, g.stride, g.pad.w);
                                let wi = w_base + (dt * g.kh + dy) * g.kw + dx;
                                for ot in t_lo..t_hi {
                                    let it = ot * g.stride + dt - g.pad.t;
                                    for oy in y_lo..y_hi {
                                        let iy = oy * g.stride + dy - g.pad.h;
                                        let orow = out_base + ot * out_plane + oy * g.ow;
                                        let irow = in_base + it * in_plane + iy * g.w;
                                        for ox in x_lo..x_hi {
                                            let ix = ox * g.stride + dx - g.pad.w;
                                            f(orow + ox, irow + ix, wi);
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    fn forward(&self, input: &[f64], weight: &[f64], bias: &[f64]) -> Vec<f64> {
        let per = self.ot * self.oh * self.ow;
        let mut out = vec![0.0; self.n * self.o * per];
        for (i, chunk) in out.chunks_mut(per).enumerate() {
            chunk.fill(bias[i % self.o]);
        }
        self.for_each_tap(|oi, ii, wi| out[oi] += weight[wi] * input[ii]);
        out
    }

    fn backward(
        &self,
        input: &[f64],
        weight: &[f64],
        grad_out: &[f64],
        need_input: bool,
    ) -> (Option<Vec<f64>>, Vec<f64>, Vec<f64>) {
        let per = self.ot * self.oh * self.ow;
        let mut gb = vec![0.0; self.o];
        for (i, chunk) in grad_out.chunks(per).enumerate() {
            gb[i % self.o] += chunk.iter().sum::<f64>();
        }
        let mut gw = vec![0.0; weight.len()];
        if need_input {
            let mut gi = vec![0.0; input.len()];
            self.for_each_tap(|oi, ii, wi| {
                let g = grad_out[oi];
                gw[wi] += g * input[ii];
                gi[ii] += g * weight[wi];
            });
            (Some(gi), gw, gb)
        } else {
            self.for_each_tap(|oi, ii, wi| gw[wi] += grad_out[oi] * input[ii]);
            (None, gw, gb)
        }
    }
}

fn geometry_2d(input: &Tensor, weight: &Tensor, bias: &Tensor, stride: usize, pad: usize) -> Result<Geometry> {
    let (is, ws) = (input.shape(), weight.shape());
    if is.len() != 4 || ws.len() != 4 {
        return Err(dim_err!(
            "conv2d expects [N,C,H,W] input and [O,C,kh,kw] weight, got {:?} and {:?}",
            is,
            ws
        ));
    }
    Geometry::build(
        &[is[0], is[1], 1, is[2], is[3]],
        &[ws[0], ws[1], 1, ws[2], ws[3]],
        bias.shape(),
        stride,
        Padding3::new(0, pad, pad),
    )
}

fn geometry_3d(input: &Tensor, weight: &Tensor, bias: &Tensor, stride: usize, pad: Padding3) -> Result<Geometry> {
    let (is, ws) = (input.shape(), weight.shape());
    if is.len() != 5 || ws.len() != 5 {
        return Err(dim_err!(
            "conv3d expects [N,C,T,H,W] input and [O,C,kt,kh,kw] weight, got {:?} and {:?}",
            is,
            ws
        ));
    }
    Geometry::build(is, ws, bias.shape(), stride, pad)
}

/// 2D cross-correlation: `[N,C,H,W] * [O,C,kh,kw] + [O] -> [N,O,H',W']`.
pub fn conv2d(input: &Tensor, weight: &Tensor, bias: &Tensor, stride: usize, pad: usize) -> Result<Tensor> {
    let g = geometry_2d(input, weight, bias, stride, pad)?;
    let out = g.forward(input.data(), weight.data(), bias.data());
    Tensor::new(&[g.n, g.o, g.oh, g.ow], out)
}

pub fn conv2d_backward(
    input: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    stride: usize,
    pad: usize,
    grad_out: &[f64],
    need_input: bool,
) -> Result<ConvGrads> {
    let g = geometry_2d(input, weight, bias, stride, pad)?;
    let (gi, gw, gb) = g.backward(input.data(), weight.data(), grad_out, need_input);
    Ok(ConvGrads {
        input: gi.map(|d| Tensor::new(input.shape(), d)).transpose()?,
        weight: Tensor::new(weight.shape(), gw)?,
        bias: Tensor::new(bias.shape(), gb)?,
    })
}

/// 3D cross-correlation: `[N,C,T,H,W] * [O,C,kt,kh,kw] + [O] -> [N,O,T',H',W']`.
///
/// `stride` applies to all three axes.
pub fn conv3d(input: &Tensor, weight: &Tensor, bias: &Tensor, stride: usize, pad: Padding3) -> Result<Tensor> {
    let g = geometry_3d(input, weight, bias, stride, pad)?;
    let out = g.forward(input.data(), weight.data(), bias.data());
    Tensor::new(&g.out_shape5(), out)
}

pub fn conv3d_backward(
    input: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    stride: usize,
    pad: Padding3,
    grad_out: &[f64],
    need_input: bool,
) -> Result<ConvGrads> {
    let g = geometry_3d(input, weight, bias, stride, pad)?;
    let (gi, gw, gb) = g.backward(input.data(), weight.data(), grad_out, need_input);
    Ok(ConvGrads {
        input: gi.map(|d| Tensor::new(input.shape(), d)).transpose()?,
        weight: Tensor::new(weight.shape(), gw)?,
        bias: Tensor::new(bias.shape(), gb)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_extent_formula() {
        let x = Tensor::zeros(&[1, 3, 16, 16]);
        let w = Tensor::zeros(&[8, 3, 3, 3]);
        let b = Tensor::zeros(&[8]);
        let y = conv2d(&x, &w, &b, 2, 1).unwrap();
        assert_eq!(y.shape(), &[1, 8, 8, 8]);
        let y = conv2d(&x, &w, &b, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 8, 14, 14]);
    }

    #[test]
    fn zero_input_gives_bias() {
        let x = Tensor::zeros(&[2, 2, 5, 5]);
        let w = Tensor::full(&[3, 2, 3, 3], 0.7);
        let b = Tensor::new(&[3], vec![1.0, -2.0, 0.5]).unwrap();
        let y = conv2d(&x, &w, &b, 1, 1).unwrap();
        for n in 0..2 {
            for o in 0..3 {
                for i in 0..25 {
                    assert_eq!(y.data()[(n * 3 + o) * 25 + i], b.data()[o]);
                }
            }
        }
    }

    #[test]
    fn channel_mismatch_is_dimension_error() {
        let x = Tensor::zeros(&[1, 2, 4, 4]);
        let w = Tensor::zeros(&[1, 3, 3, 3]);
        let b = Tensor::zeros(&[1]);
        assert!(matches!(conv2d(&x, &w, &b, 1, 1), Err(crate::Error::Dimension(_))));
    }

    #[test]
    fn oversized_kernel_rejected() {
        let x = Tensor::zeros(&[1, 1, 2, 2]);
        let w = Tensor::zeros(&[1, 1, 5, 5]);
        let b = Tensor::zeros(&[1]);
        assert!(conv2d(&x, &w, &b, 1, 1).is_err());
        assert!(conv2d(&x, &w, &b, 0, 2).is_err());
    }

    #[test]
    fn even_temporal_kernel_cannot_pad_symmetrically() {
        assert!(Padding3::same_temporal(2, 1, 1).is_err());
        assert_eq!(Padding3::same_temporal(3, 1, 1).unwrap(), Padding3::new(1, 1, 1));
    }

    #[test]
    fn same_temporal_padding_preserves_time() {
        let x = Tensor::zeros(&[1, 2, 5, 4, 4]);
        let w = Tensor::zeros(&[2, 2, 3, 3, 3]);
        let b = Tensor::zeros(&[2]);
        let pad = Padding3::same_temporal(3, 1, 1).unwrap();
        assert_eq!(conv3d(&x, &w, &b, 1, pad).unwrap().shape(), &[1, 2, 5, 4, 4]);
    }
}
