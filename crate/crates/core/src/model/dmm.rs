use alloc::collections::VecDeque;
use alloc::vec::Vec;

use super::memory::MemoryStore;
use super::params::Dmm;
use crate::error::{dim_err, Result};
use crate::graph::{Graph, Var};

/// `[1, C, h, w] -> [h*w, C]`.
fn to_tokens(g: &mut Graph, x: Var) -> Result<Var> {
    let s = g.shape(x).to_vec();
    let flat = g.reshape(x, &[s[1], s[2] * s[3]])?;
    g.transpose_last2(flat)
}

/// `[h*w, C] -> [1, C, h, w]`.
fn from_tokens(g: &mut Graph, x: Var, h: usize, w: usize) -> Result<Var> {
    let c = g.shape(x)[1];
    let t = g.transpose_last2(x)?;
    g.reshape(t, &[1, c, h, w])
}

fn linear(g: &mut Graph, x: Var, weight: Var, bias: Var) -> Result<Var> {
    let y = g.matmul(x, weight)?;
    g.add(y, bias)
}

/// Scene memory over a clip `[T, C, h, w]`, processed frame by frame.
///
/// Frames of a scene with stored memory attend to it; a scene without memory
/// takes the residual MLP bypass. Every frame then appends its compressed
/// features to the scene queue. Entries produced inside this call stay
/// differentiable for the rest of the clip; `store` receives detached copies.
pub fn dmm_forward(g: &mut Graph, z: Var, scene: &str, store: &mut MemoryStore, p: &Dmm<Var>) -> Result<Var> {
    let s = g.shape(z).to_vec();
    if s.len() != 4 {
        return Err(dim_err!("memory module expects [T, C, h, w], got {:?}", s));
    }
    let (frames, h, w) = (s[0], s[2], s[3]);
    let m = h * w;
    let max_len = store.max_len();

    // (token view of the entry, came from the store)
    let mut queue: VecDeque<(Var, bool)> = VecDeque::new();
    if let Some(stored) = store.queue(scene) {
        for entry in stored {
            let es = entry.shape();
            if es.len() != 3 || es[1] * es[2] != m {
                return Err(dim_err!("memory entry {:?} does not match {h}x{w} features", es));
            }
            let flat = entry.reshaped(&[es[0], m])?;
            let c = g.constant(flat);
            queue.push_back((g.transpose_last2(c)?, true));
        }
    }

    let mut outputs = Vec::with_capacity(frames);
    let mut updates = Vec::with_capacity(frames);
    for t in 0..frames {
        let f = g.narrow(z, 0, t, 1)?;
        let f_tokens = to_tokens(g, f)?;
        let attn = if queue.is_empty() {
            f_tokens
        } else {
            let reduced = g.conv2d(f, p.reduce.weight, p.reduce.bias, 1, 1)?;
            let reduced = g.relu(reduced);
            let r_tokens = to_tokens(g, reduced)?;
            let n = queue.len();
            let keys: Vec<Var> = queue.iter().map(|&(v, _)| v).collect();
            let mem = g.concat(&keys, 0)?;
            let k = g.matmul(mem, p.proj_k)?;
            let q = g.matmul(r_tokens, p.proj_q)?;
            let v = g.matmul(r_tokens, p.proj_v)?;
            let kt = g.transpose_last2(k)?;
            let scores = g.matmul(q, kt)?;
            let weights = g.softmax(scores, 1)?;
            // joint softmax over all n*m memory tokens, folded back onto the
            // m query-aligned value rows
            let weights = g.reshape(weights, &[m, n, m])?;
            let weights = g.mean_axes(weights, &[1])?;
            let weights = g.reshape(weights, &[m, m])?;
            let weights = g.scale(weights, n as f64);
            let mixed = g.matmul(weights, v)?;
            store.record_reads(queue.iter().filter(|&&(_, stored)| stored).count());
            g.add(mixed, f_tokens)?
        };
        let hidden = linear(g, attn, p.mlp1.weight, p.mlp1.bias)?;
        let hidden = g.relu(hidden);
        let mlp = linear(g, hidden, p.mlp2.weight, p.mlp2.bias)?;
        let out_tokens = g.add(mlp, attn)?;
        let out = from_tokens(g, out_tokens, h, w)?;

        let u = g.conv2d(out, p.update1.weight, p.update1.bias, 1, 1)?;
        let u = g.relu(u);
        let u = g.conv2d(u, p.update2.weight, p.update2.bias, 1, 1)?;
        updates.push(u);
        if queue.len() == max_len {
            queue.pop_front();
        }
        queue.push_back((to_tokens(g, u)?, false));
        outputs.push(out);
    }
    for u in updates {
        let value = g.value(u);
        let cr = value.shape()[1];
        store.push(scene, &value.reshaped(&[cr, h, w])?);
    }
    g.concat(&outputs, 0)
}
