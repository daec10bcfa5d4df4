//! Finite-difference audit of every differentiable primitive and of every
//! parameter of a small model.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::{finite_diff_grad_piecewise, relative_error_floored, DEFAULT_STEP, DEFAULT_TOLERANCE, GRAD_FLOOR};
use crate::error::Result;
use crate::graph::{Graph, OpKind, Var};
use crate::loss::{total_loss, LossConfig};
use crate::model::{phase2_forward, MemoryStore, ModelConfig, ModelParams};
use crate::ops::Padding3;
use crate::rng::SeededRng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
pub struct AuditEntry {
    /// Operation or parameter name.
    pub name: String,
    pub max_rel_error: f64,
    /// Elements whose probes straddled a ReLU or |.| kink at the default step
    /// and were re-probed with a smaller one.
    pub refined: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub tolerance: f64,
    pub ops: Vec<AuditEntry>,
    pub params: Vec<AuditEntry>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.ops.iter().chain(&self.params).all(|e| e.passed)
    }

    pub fn failures(&self) -> Vec<&AuditEntry> {
        self.ops.iter().chain(&self.params).filter(|e| !e.passed).collect()
    }
}

type Build = fn(&mut Graph, &[Var]) -> Result<Var>;

struct OpCase {
    kind: OpKind,
    inputs: Vec<Tensor>,
    build: Build,
}

fn op_cases(rng: &mut SeededRng) -> Vec<OpCase> {
    let mut u = |shape: &[usize]| rng.uniform_tensor(shape, -1.0, 1.0);
    let case = |kind, inputs, build| OpCase { kind, inputs, build };
    vec![
        case(OpKind::Conv2d, vec![u(&[2, 3, 5, 5]), u(&[4, 3, 3, 3]), u(&[4])], |g, v| g.conv2d(v[0], v[1], v[2], 2, 1)),
        case(OpKind::Conv3d, vec![u(&[1, 2, 3, 4, 4]), u(&[3, 2, 3, 3, 3]), u(&[3])], |g, v| {
            g.conv3d(v[0], v[1], v[2], 1, Padding3::new(1, 1, 1))
        }),
        case(OpKind::Relu, vec![u(&[24])], |g, v| Ok(g.relu(v[0]))),
        case(OpKind::Abs, vec![u(&[24])], |g, v| Ok(g.abs(v[0]))),
        case(OpKind::PixelShuffle, vec![u(&[1, 8, 2, 3])], |g, v| g.pixel_shuffle(v[0], 2)),
        case(OpKind::Softmax, vec![u(&[3, 4])], |g, v| g.softmax(v[0], 1)),
        case(OpKind::Matmul, vec![u(&[2, 3, 4]), u(&[4, 5])], |g, v| g.matmul(v[0], v[1])),
        case(OpKind::Add, vec![u(&[3, 4]), u(&[4])], |g, v| g.add(v[0], v[1])),
        case(OpKind::Sub, vec![u(&[3, 4]), u(&[3, 1])], |g, v| g.sub(v[0], v[1])),
        case(OpKind::Mul, vec![u(&[3, 4]), u(&[4])], |g, v| g.mul(v[0], v[1])),
        // denominator shifted away from zero
        case(OpKind::Div, vec![u(&[3, 4]), u(&[4])], |g, v| {
            let d = g.add_scalar(v[1], 2.0);
            g.div(v[0], d)
        }),
        case(OpKind::Scale, vec![u(&[5])], |g, v| Ok(g.scale(v[0], -1.7))),
        case(OpKind::AddScalar, vec![u(&[5])], |g, v| Ok(g.add_scalar(v[0], 0.3))),
        case(OpKind::MeanAll, vec![u(&[2, 3])], |g, v| Ok(g.mean_all(v[0]))),
        case(OpKind::SumAll, vec![u(&[2, 3])], |g, v| Ok(g.sum_all(v[0]))),
        case(OpKind::MeanAxes, vec![u(&[2, 3, 4])], |g, v| g.mean_axes(v[0], &[0, 2])),
        case(OpKind::Reshape, vec![u(&[2, 6])], |g, v| g.reshape(v[0], &[3, 4])),
        case(OpKind::Permute, vec![u(&[2, 3, 4])], |g, v| g.permute(v[0], &[2, 0, 1])),
        case(OpKind::Narrow, vec![u(&[4, 5])], |g, v| g.narrow(v[0], 1, 1, 3)),
        case(OpKind::Concat, vec![u(&[2, 3]), u(&[2, 2])], |g, v| g.concat(&[v[0], v[1]], 1)),
    ]
}

/// Evaluates `sum(op(inputs) * weights)` and, optionally, its gradients.
fn eval_case(
    case: &OpCase,
    inputs: &[Tensor],
    weights: &mut Option<Tensor>,
    seed: u64,
    fault: Option<OpKind>,
    grads: bool,
) -> Result<(f64, Vec<bool>, Vec<Vec<f64>>)> {
    let mut g = Graph::new();
    if let Some(k) = fault {
        g.inject_fault(k);
    }
    let vars: Vec<Var> = inputs.iter().map(|t| g.leaf(t.detached().with_requires_grad(grads))).collect();
    let out = (case.build)(&mut g, &vars)?;
    let w = weights
        .get_or_insert_with(|| SeededRng::derived(seed, 99).uniform_tensor(g.shape(out), -1.0, 1.0))
        .clone();
    let wv = g.constant(w);
    let prod = g.mul(out, wv)?;
    let loss = g.sum_all(prod);
    let value = g.value(loss).item();
    let pattern = g.kink_pattern();
    if !grads {
        return Ok((value, pattern, Vec::new()));
    }
    g.backward(loss)?;
    let gs = vars.iter().map(|&v| g.grad(v).map_or_else(|| vec![0.0; g.value(v).numel()], <[f64]>::to_vec)).collect();
    Ok((value, pattern, gs))
}

/// Checks every differentiable primitive against central differences on
/// random inputs in `[-1, 1]`.
pub fn audit_ops(seed: u64, fault: Option<OpKind>) -> Result<Vec<AuditEntry>> {
    let mut rng = SeededRng::new(seed);
    let mut entries = Vec::new();
    for case in op_cases(&mut rng) {
        let mut weights = None;
        let (_, _, analytic) = eval_case(&case, &case.inputs, &mut weights, seed, fault, true)?;
        let mut worst: f64 = 0.0;
        let mut refined = 0;
        for (i, x) in case.inputs.iter().enumerate() {
            let (numeric, r) = finite_diff_grad_piecewise(
                |probe| {
                    let mut inputs = case.inputs.clone();
                    inputs[i] = probe.clone();
                    eval_case(&case, &inputs, &mut weights, seed, None, false)
                        .map_or((f64::NAN, Vec::new()), |(v, p, _)| (v, p))
                },
                x,
                DEFAULT_STEP,
            );
            worst = worst.max(relative_error_floored(&analytic[i], numeric.data(), GRAD_FLOOR));
            refined += r;
        }
        let passed = worst <= DEFAULT_TOLERANCE;
        entries.push(AuditEntry { name: case.kind.name().to_string(), max_rel_error: worst, refined, passed });
    }
    Ok(entries)
}

struct ModelCase {
    params: ModelParams,
    input: Tensor,
    target: Tensor,
    store: MemoryStore,
    loss: LossConfig,
}

impl ModelCase {
    fn new(seed: u64) -> Result<Self> {
        let cfg = ModelConfig::audit();
        let params = ModelParams::init(cfg, seed)?;
        let mut rng = SeededRng::derived(seed, 7);
        let shape = [cfg.frames_per_clip, 3, 8, 8];
        let warmup = rng.uniform_tensor(&shape, 0.0, 1.0);
        let input = rng.uniform_tensor(&shape, 0.0, 1.0);
        let target = rng.uniform_tensor(&shape, 0.0, 1.0);
        // one earlier clip fills the scene memory so the attention path is exercised
        let mut store = MemoryStore::new(cfg.memory_len);
        crate::model::infer_phase2(&params, &warmup, "audit", &mut store)?;
        Ok(Self { params, input, target, store, loss: LossConfig::default() })
    }

    fn eval(&self, params: &ModelParams, fault: Option<OpKind>, grads: bool) -> Result<(f64, Vec<bool>, Vec<Vec<f64>>)> {
        let mut g = Graph::new();
        if let Some(k) = fault {
            g.inject_fault(k);
        }
        let bound = params.bind(&mut g, grads);
        let x = g.constant(self.input.clone());
        let y = g.constant(self.target.clone());
        let mut store = self.store.clone();
        let pred = phase2_forward(&mut g, x, "audit", &mut store, &bound, &params.config)?;
        let loss = total_loss(&mut g, pred, y, &self.loss)?.total;
        let value = g.value(loss).item();
        let pattern = g.kink_pattern();
        if !grads {
            return Ok((value, pattern, Vec::new()));
        }
        g.backward(loss)?;
        Ok((value, pattern, crate::train::collect_grads(&g, &bound)))
    }
}

/// Checks the gradient of the total loss with respect to every parameter of
/// the small audit model (4 channels, 3 residual blocks, 2-frame 8x8 clips,
/// scene memory populated).
pub fn audit_model(seed: u64, fault: Option<OpKind>) -> Result<Vec<AuditEntry>> {
    let case = ModelCase::new(seed)?;
    let (_, _, analytic) = case.eval(&case.params, fault, true)?;
    let names: Vec<String> = case.params.tensors.named().into_iter().map(|(n, _)| n).collect();
    let mut entries = Vec::with_capacity(names.len());
    for (k, name) in names.iter().enumerate() {
        let x = case.params.get(name).expect("known parameter").clone();
        let mut probe_params = case.params.clone();
        let (numeric, refined) = finite_diff_grad_piecewise(
            |probe| {
                probe_params.set(name, probe.clone()).expect("same shape");
                case.eval(&probe_params, None, false).map_or((f64::NAN, Vec::new()), |(v, p, _)| (v, p))
            },
            &x,
            DEFAULT_STEP,
        );
        let err = relative_error_floored(&analytic[k], numeric.data(), GRAD_FLOOR);
        entries.push(AuditEntry { name: name.clone(), max_rel_error: err, refined, passed: err <= DEFAULT_TOLERANCE });
    }
    Ok(entries)
}

/// Both audits. `fault` flips the adjoint of one operation kind, which a
/// working audit must detect.
pub fn run_audit(seed: u64, fault: Option<OpKind>) -> Result<AuditReport> {
    Ok(AuditReport {
        tolerance: DEFAULT_TOLERANCE,
        ops: audit_ops(seed, fault)?,
        params: audit_model(seed, fault)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ops_pass() {
        let entries = audit_ops(1, None).unwrap();
        assert_eq!(entries.len(), OpKind::ALL.len() - 1);
        for e in &entries {
            assert!(e.passed, "{} {}", e.name, e.max_rel_error);
        }
    }

    #[test]
    fn flipped_relu_caught() {
        let entries = audit_ops(1, Some(OpKind::Relu)).unwrap();
        assert!(!entries.iter().find(|e| e.name == "relu").unwrap().passed);
    }
}
