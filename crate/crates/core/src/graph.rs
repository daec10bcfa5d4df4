//! Eager reverse-mode automatic differentiation.
//!
//! A [`Graph`] records every operation as it executes, in program order, so
//! node inputs always precede the node itself. [`Graph::backward`] walks the
//! record once in reverse and adds the adjoint of each leaf that was created
//! with `requires_grad` into that leaf's gradient buffer. A graph is built
//! fresh for every forward pass.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::ops::{self, BinaryOp, Padding3};
use crate::tensor::Tensor;

/// Handle to a node of a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Operation tag, used for reporting and for fault injection in audits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum OpKind {
    Leaf,
    Conv2d,
    Conv3d,
    Relu,
    Abs,
    PixelShuffle,
    Softmax,
    Matmul,
    Add,
    Sub,
    Mul,
    Div,
    Scale,
    AddScalar,
    MeanAll,
    SumAll,
    MeanAxes,
    Reshape,
    Permute,
    Narrow,
    Concat,
}

impl OpKind {
    pub const ALL: [OpKind; 21] = [
        OpKind::Leaf,
        OpKind::Conv2d,
        OpKind::Conv3d,
        OpKind::Relu,
        OpKind::Abs,
        OpKind::PixelShuffle,
        OpKind::Softmax,
        OpKind::Matmul,
        OpKind::Add,
        OpKind::Sub,
        OpKind::Mul,
        OpKind::Div,
        OpKind::Scale,
        OpKind::AddScalar,
        OpKind::MeanAll,
        OpKind::SumAll,
        OpKind::MeanAxes,
        OpKind::Reshape,
        OpKind::Permute,
        OpKind::Narrow,
        OpKind::Concat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            OpKind::Leaf => "leaf",
            OpKind::Conv2d => "conv2d",
            OpKind::Conv3d => "conv3d",
            OpKind::Relu => "relu",
            OpKind::Abs => "abs",
            OpKind::PixelShuffle => "pixel_shuffle",
            OpKind::Softmax => "softmax",
            OpKind::Matmul => "matmul",
            OpKind::Add => "add",
            OpKind::Sub => "sub",
            OpKind::Mul => "mul",
            OpKind::Div => "div",
            OpKind::Scale => "scale",
            OpKind::AddScalar => "add_scalar",
            OpKind::MeanAll => "mean_all",
            OpKind::SumAll => "sum_all",
            OpKind::MeanAxes => "mean_axes",
            OpKind::Reshape => "reshape",
            OpKind::Permute => "permute",
            OpKind::Narrow => "narrow",
            OpKind::Concat => "concat",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|k| k.name() == name)
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Conv2d { input: Var, weight: Var, bias: Var, stride: usize, pad: usize },
    Conv3d { input: Var, weight: Var, bias: Var, stride: usize, pad: Padding3 },
    Relu(Var),
    Abs(Var),
    PixelShuffle(Var, usize),
    Softmax(Var, usize),
    Matmul(Var, Var),
    Binary(BinaryOp, Var, Var),
    Scale(Var, f64),
    AddScalar(Var),
    MeanAll(Var),
    SumAll(Var),
    MeanAxes(Var),
    Reshape(Var),
    Permute(Var, Vec<usize>),
    Narrow { input: Var, axis: usize, start: usize },
    Concat(Vec<Var>, usize),
}

impl Op {
    fn kind(&self) -> OpKind {
        match self {
            Op::Leaf => OpKind::Leaf,
            Op::Conv2d { .. } => OpKind::Conv2d,
            Op::Conv3d { .. } => OpKind::Conv3d,
            Op::Relu(_) => OpKind::Relu,
            Op::Abs(_) => OpKind::Abs,
            Op::PixelShuffle(..) => OpKind::PixelShuffle,
            Op::Softmax(..) => OpKind::Softmax,
            Op::Matmul(..) => OpKind::Matmul,
            Op::Binary(BinaryOp::Add, ..) => OpKind::Add,
            Op::Binary(BinaryOp::Sub, ..) => OpKind::Sub,
            Op::Binary(BinaryOp::Mul, ..) => OpKind::Mul,
            Op::Binary(BinaryOp::Div, ..) => OpKind::Div,
            Op::Scale(..) => OpKind::Scale,
            Op::AddScalar(_) => OpKind::AddScalar,
            Op::MeanAll(_) => OpKind::MeanAll,
            Op::SumAll(_) => OpKind::SumAll,
            Op::MeanAxes(_) => OpKind::MeanAxes,
            Op::Reshape(_) => OpKind::Reshape,
            Op::Permute(..) => OpKind::Permute,
            Op::Narrow { .. } => OpKind::Narrow,
            Op::Concat(..) => OpKind::Concat,
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Eagerly recorded computation graph.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    nodes: Vec<Node>,
    fault: Option<OpKind>,
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    /// Flips the sign of every adjoint produced by `kind` during backward.
    ///
    /// Only meant for checking that the gradient audit catches broken rules.
    pub fn inject_fault(&mut self, kind: OpKind) {
        self.fault = Some(kind);
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Adds a leaf. Its gradient is collected iff `t.requires_grad()`.
    pub fn leaf(&mut self, t: Tensor) -> Var {
        let needs_grad = t.requires_grad();
        self.push(t, Op::Leaf, needs_grad)
    }

    /// Adds a leaf that never receives a gradient.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t.with_requires_grad(false), Op::Leaf, false)
    }

    /// Copies the value of `v` into a new gradient-free leaf.
    pub fn detach(&mut self, v: Var) -> Var {
        let t = self.value(v).detached();
        self.constant(t)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    /// Gradient accumulated on a leaf by previous `backward` calls.
    pub fn grad(&self, v: Var) -> Option<&[f64]> {
        self.nodes[v.0].value.grad()
    }

    pub fn kind(&self, v: Var) -> OpKind {
        self.nodes[v.0].op.kind()
    }

    /// Side of the kink (`true` for positive) of every element fed to a
    /// `relu` or `abs`, in recording order. Two evaluations with equal
    /// patterns lie in the same smooth piece of the recorded function.
    pub fn kink_pattern(&self) -> Vec<bool> {
        let mut out = Vec::new();
        for node in &self.nodes {
            if let Op::Relu(x) | Op::Abs(x) = node.op {
                out.extend(self.value(x).data().iter().map(|&v| v > 0.0));
            }
        }
        out
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].needs_grad)
    }

    fn record(&mut self, value: Tensor, op: Op, inputs: &[Var]) -> Var {
        let needs = self.needs(inputs);
        self.push(value, op, needs)
    }

    pub fn conv2d(&mut self, input: Var, weight: Var, bias: Var, stride: usize, pad: usize) -> Result<Var> {
        let y = ops::conv2d(self.value(input), self.value(weight), self.value(bias), stride, pad)?;
        Ok(self.record(y, Op::Conv2d { input, weight, bias, stride, pad }, &[input, weight, bias]))
    }

    pub fn conv3d(&mut self, input: Var, weight: Var, bias: Var, stride: usize, pad: Padding3) -> Result<Var> {
        let y = ops::conv3d(self.value(input), self.value(weight), self.value(bias), stride, pad)?;
        Ok(self.record(y, Op::Conv3d { input, weight, bias, stride, pad }, &[input, weight, bias]))
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let y = ops::relu(self.value(x));
        self.record(y, Op::Relu(x), &[x])
    }

    pub fn abs(&mut self, x: Var) -> Var {
        let y = ops::abs(self.value(x));
        self.record(y, Op::Abs(x), &[x])
    }

    pub fn pixel_shuffle(&mut self, x: Var, r: usize) -> Result<Var> {
        let y = ops::pixel_shuffle(self.value(x), r)?;
        Ok(self.record(y, Op::PixelShuffle(x, r), &[x]))
    }

    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let y = ops::softmax(self.value(x), axis)?;
        Ok(self.record(y, Op::Softmax(x, axis), &[x]))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let y = ops::matmul(self.value(a), self.value(b))?;
        Ok(self.record(y, Op::Matmul(a, b), &[a, b]))
    }

    fn binary(&mut self, op: BinaryOp, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        let out = match op {
            BinaryOp::Add => ops::add(x, y),
            BinaryOp::Sub => ops::sub(x, y),
            BinaryOp::Mul => ops::mul(x, y),
            BinaryOp::Div => ops::div(x, y),
        }?;
        Ok(self.record(out, Op::Binary(op, a, b), &[a, b]))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Add, a, b)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Sub, a, b)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Mul, a, b)
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        self.binary(BinaryOp::Div, a, b)
    }

    pub fn scale(&mut self, x: Var, c: f64) -> Var {
        let y = self.value(x).map(|v| v * c);
        self.record(y, Op::Scale(x, c), &[x])
    }

    pub fn add_scalar(&mut self, x: Var, c: f64) -> Var {
        let y = self.value(x).map(|v| v + c);
        self.record(y, Op::AddScalar(x), &[x])
    }

    pub fn mean_all(&mut self, x: Var) -> Var {
        let y = ops::mean_all(self.value(x));
        self.record(y, Op::MeanAll(x), &[x])
    }

    pub fn sum_all(&mut self, x: Var) -> Var {
        let y = ops::sum_all(self.value(x));
        self.record(y, Op::SumAll(x), &[x])
    }

    /// Mean over `axes`, reduced axes kept with extent 1.
    pub fn mean_axes(&mut self, x: Var, axes: &[usize]) -> Result<Var> {
        let y = ops::mean_axes(self.value(x), axes)?;
        Ok(self.record(y, Op::MeanAxes(x), &[x]))
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let y = self.value(x).reshaped(shape)?;
        Ok(self.record(y, Op::Reshape(x), &[x]))
    }

    pub fn permute(&mut self, x: Var, perm: &[usize]) -> Result<Var> {
        let y = ops::permute(self.value(x), perm)?;
        Ok(self.record(y, Op::Permute(x, perm.to_vec()), &[x]))
    }

    pub fn transpose_last2(&mut self, x: Var) -> Result<Var> {
        let r = self.value(x).rank();
        if r < 2 {
            return Err(crate::error::dim_err!("transpose needs rank >= 2"));
        }
        let mut perm: Vec<usize> = (0..r).collect();
        perm.swap(r - 2, r - 1);
        self.permute(x, &perm)
    }

    pub fn narrow(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let y = ops::narrow(self.value(x), axis, start, len)?;
        Ok(self.record(y, Op::Narrow { input: x, axis, start }, &[x]))
    }

    pub fn concat(&mut self, xs: &[Var], axis: usize) -> Result<Var> {
        let values: Vec<&Tensor> = xs.iter().map(|&v| self.value(v)).collect();
        let y = ops::concat(&values, axis)?;
        Ok(self.record(y, Op::Concat(xs.to_vec(), axis), xs))
    }

    /// Back-propagates from a single-element `loss`, adding adjoints into the
    /// gradient buffers of `requires_grad` leaves.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        if self.value(loss).numel() != 1 {
            return Err(Error::Contract(alloc::format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut adj: Vec<Option<Vec<f64>>> = vec![None; loss.0 + 1];
        adj[loss.0] = Some(vec![1.0]);
        for i in (0..=loss.0).rev() {
            let Some(g) = adj[i].take() else { continue };
            if !self.nodes[i].needs_grad {
                continue;
            }
            if let Op::Leaf = self.nodes[i].op {
                let node = &mut self.nodes[i];
                if node.value.requires_grad() {
                    node.value.accumulate_grad(&g);
                }
                continue;
            }
            let mut contribs = self.node_backward(i, &g)?;
            if self.fault == Some(self.nodes[i].op.kind()) {
                for (_, c) in contribs.iter_mut() {
                    c.iter_mut().for_each(|v| *v = -*v);
                }
            }
            for (v, c) in contribs {
                if !self.nodes[v.0].needs_grad {
                    continue;
                }
                match &mut adj[v.0] {
                    Some(acc) => acc.iter_mut().zip(&c).for_each(|(a, b)| *a += b),
                    slot @ None => *slot = Some(c),
                }
            }
        }
        Ok(())
    }

    fn node_backward(&self, i: usize, g: &[f64]) -> Result<Vec<(Var, Vec<f64>)>> {
        let node = &self.nodes[i];
        let val = |v: Var| &self.nodes[v.0].value;
        let needs = |v: Var| self.nodes[v.0].needs_grad;
        let out = match &node.op {
            Op::Leaf => Vec::new(),
            &Op::Conv2d { input, weight, bias, stride, pad } => {
                let gr = ops::conv2d_backward(val(input), val(weight), val(bias), stride, pad, g, needs(input))?;
                let mut v = vec![(weight, gr.weight.into_data()), (bias, gr.bias.into_data())];
                if let Some(gi) = gr.input {
                    v.push((input, gi.into_data()));
                }
                v
            }
            &Op::Conv3d { input, weight, bias, stride, pad } => {
                let gr = ops::conv3d_backward(val(input), val(weight), val(bias), stride, pad, g, needs(input))?;
                let mut v = vec![(weight, gr.weight.into_data()), (bias, gr.bias.into_data())];
                if let Some(gi) = gr.input {
                    v.push((input, gi.into_data()));
                }
                v
            }
            &Op::Relu(x) => {
                let xs = val(x).data();
                let gx = xs.iter().zip(g).map(|(&v, &gv)| if v > 0.0 { gv } else { 0.0 }).collect();
                vec![(x, gx)]
            }
            &Op::Abs(x) => {
                let xs = val(x).data();
                let gx = xs
                    .iter()
                    .zip(g)
                    .map(|(&v, &gv)| {
                        if v > 0.0 {
                            gv
                        } else if v < 0.0 {
                            -gv
                        } else {
                            0.0
                        }
                    })
                    .collect();
                vec![(x, gx)]
            }
            &Op::PixelShuffle(x, r) => {
                let gt = Tensor::new(node.value.shape(), g.to_vec())?;
                vec![(x, ops::pixel_unshuffle(&gt, r)?.into_data())]
            }
            &Op::Softmax(x, axis) => vec![(x, ops::softmax_backward(&node.value, axis, g)?)],
            &Op::Matmul(a, b) => {
                let (ga, gb) = ops::matmul_backward(val(a), val(b), g)?;
                vec![(a, ga), (b, gb)]
            }
            &Op::Binary(op, a, b) => {
                let (ga, gb) = ops::binary_backward(op, val(a), val(b), g)?;
                vec![(a, ga), (b, gb)]
            }
            &Op::Scale(x, c) => vec![(x, g.iter().map(|v| v * c).collect())],
            &Op::AddScalar(x) | &Op::Reshape(x) => vec![(x, g.to_vec())],
            &Op::MeanAll(x) => {
                let n = val(x).numel();
                vec![(x, vec![g[0] / n as f64; n])]
            }
            &Op::SumAll(x) => vec![(x, vec![g[0]; val(x).numel()])],
            &Op::MeanAxes(x) => {
                let xs = val(x);
                let scale = node.value.numel() as f64 / xs.numel() as f64;
                // broadcast the reduced gradient back over the input shape
                let gt = Tensor::new(node.value.shape(), g.iter().map(|v| v * scale).collect())?;
                vec![(x, ops::add(&Tensor::zeros(xs.shape()), &gt)?.into_data())]
            }
            Op::Permute(x, perm) => {
                let gt = Tensor::new(node.value.shape(), g.to_vec())?;
                let inv = ops::inverse_permutation(perm);
                vec![(*x, ops::permute(&gt, &inv)?.into_data())]
            }
            &Op::Narrow { input, axis, start } => {
                let shape = val(input).shape();
                let len = node.value.shape()[axis];
                let outer: usize = shape[..axis].iter().product();
                let inner: usize = shape[axis + 1..].iter().product();
                let mut gx = vec![0.0; val(input).numel()];
                for o in 0..outer {
                    let dst = (o * shape[axis] + start) * inner;
                    let src = o * len * inner;
                    gx[dst..dst + len * inner].copy_from_slice(&g[src..src + len * inner]);
                }
                vec![(input, gx)]
            }
            Op::Concat(xs, axis) => {
                let axis = *axis;
                let shape = node.value.shape();
                let outer: usize = shape[..axis].iter().product();
                let inner: usize = shape[axis + 1..].iter().product();
                let total = shape[axis];
                let mut out = Vec::with_capacity(xs.len());
                let mut start = 0;
                for &x in xs {
                    let len = val(x).shape()[axis];
                    let mut gx = Vec::with_capacity(val(x).numel());
                    for o in 0..outer {
                        let base = (o * total + start) * inner;
                        gx.extend_from_slice(&g[base..base + len * inner]);
                    }
                    start += len;
                    out.push((x, gx));
                }
                out
            }
        };
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(shape: &[usize], data: Vec<f64>) -> Tensor {
        Tensor::new(shape, data).unwrap().with_requires_grad(true)
    }

    #[test]
    fn sum_gives_ones() {
        let mut g = Graph::new();
        let x = g.leaf(param(&[3], vec![1.0, -2.0, 5.0]));
        let s = g.sum_all(x);
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn square_sum_analytic() {
        let mut g = Graph::new();
        let x = g.leaf(param(&[2], vec![1.0, 2.0]));
        let sq = g.mul(x, x).unwrap();
        let s = g.sum_all(sq);
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[2.0, 4.0]);
        // a second pass accumulates
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[4.0, 8.0]);
    }

    #[test]
    fn relu_gradient() {
        let mut g = Graph::new();
        let x = g.leaf(param(&[2], vec![-1.0, 2.0]));
        let r = g.relu(x);
        let s = g.sum_all(r);
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[0.0, 1.0]);
    }

    #[test]
    fn non_scalar_loss_rejected() {
        let mut g = Graph::new();
        let x = g.leaf(param(&[2], vec![1.0, 2.0]));
        assert!(matches!(g.backward(x), Err(Error::Contract(_))));
    }

    #[test]
    fn constants_get_no_grad() {
        let mut g = Graph::new();
        let x = g.leaf(param(&[2], vec![1.0, 2.0]));
        let c = g.constant(Tensor::new(&[2], vec![3.0, 4.0]).unwrap());
        let p = g.mul(x, c).unwrap();
        let s = g.sum_all(p);
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[3.0, 4.0]);
        assert!(g.grad(c).is_none());
    }

    #[test]
    fn fault_flips_sign() {
        let mut g = Graph::new();
        g.inject_fault(OpKind::SumAll);
        let x = g.leaf(param(&[2], vec![1.0, 2.0]));
        let s = g.sum_all(x);
        g.backward(s).unwrap();
        assert_eq!(g.grad(x).unwrap(), &[-1.0, -1.0]);
    }

    #[test]
    fn op_names_roundtrip() {
        for k in OpKind::ALL {
            assert_eq!(OpKind::from_name(k.name()), Some(k));
        }
    }
}
