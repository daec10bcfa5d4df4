//! Learnable weights, generic over the leaf type so the same layout holds
//! plain tensors, graph handles or optimizer state.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::config::ModelConfig;
use crate::error::{config_err, dim_err, Result};
use crate::graph::{Graph, Var};
use crate::rng::SeededRng;
use crate::tensor::Tensor;

/// Weight and bias of one convolution or linear layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer<T> {
    pub weight: T,
    pub bias: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResBlock<T> {
    pub conv1: Layer<T>,
    pub conv2: Layer<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Encoder<T> {
    /// Stride-2 shallow feature convolution.
    pub stem: Layer<T>,
    pub blocks: Vec<ResBlock<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tmoe<T> {
    /// One 3D gating convolution per residual block group.
    pub experts: Vec<Layer<T>>,
    /// Residual 3D refinement convolution.
    pub refine: Layer<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dmm<T> {
    /// `C -> C/2` reduction convolution.
    pub reduce: Layer<T>,
    pub proj_q: T,
    pub proj_k: T,
    pub proj_v: T,
    pub mlp1: Layer<T>,
    pub mlp2: Layer<T>,
    pub update1: Layer<T>,
    pub update2: Layer<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoder<T> {
    /// `C -> 4C` convolution ahead of the pixel shuffle.
    pub expand: Layer<T>,
    pub conv1: Layer<T>,
    pub conv2: Layer<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Params<T> {
    pub encoder: Encoder<T>,
    pub tmoe: Tmoe<T>,
    pub dmm: Dmm<T>,
    pub decoder: Decoder<T>,
}

type MapFn<'a, T, U> = dyn FnMut(&str, &T) -> U + 'a;

impl<T> Layer<T> {
    fn map<U>(&self, prefix: &str, f: &mut MapFn<'_, T, U>) -> Layer<U> {
        Layer {
            weight: f(&format!("{prefix}.weight"), &self.weight),
            bias: f(&format!("{prefix}.bias"), &self.bias),
        }
    }

    fn visit<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a T)>) {
        out.push((format!("{prefix}.weight"), &self.weight));
        out.push((format!("{prefix}.bias"), &self.bias));
    }

    fn visit_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut T)>) {
        out.push((format!("{prefix}.weight"), &mut self.weight));
        out.push((format!("{prefix}.bias"), &mut self.bias));
    }
}

impl<T> Params<T> {
    /// Maps every leaf, visiting them in canonical order with their names.
    pub fn map<U>(&self, f: &mut MapFn<'_, T, U>) -> Params<U> {
        let e = &self.encoder;
        let encoder = Encoder {
            stem: e.stem.map("encoder.stem", f),
            blocks: e
                .blocks
                .iter()
                .enumerate()
                .map(|(i, b)| ResBlock {
                    conv1: b.conv1.map(&format!("encoder.blocks.{i}.conv1"), f),
                    conv2: b.conv2.map(&format!("encoder.blocks.{i}.conv2"), f),
                })
                .collect(),
        };
        let tmoe = Tmoe {
            experts: self
                .tmoe
                .experts
                .iter()
                .enumerate()
                .map(|(i, l)| l.map(&format!("tmoe.experts.{i}"), f))
                .collect(),
            refine: self.tmoe.refine.map("tmoe.refine", f),
        };
        let d = &self.dmm;
        let dmm = Dmm {
            reduce: d.reduce.map("dmm.reduce", f),
            proj_q: f("dmm.proj_q", &d.proj_q),
            proj_k: f("dmm.proj_k", &d.proj_k),
            proj_v: f("dmm.proj_v", &d.proj_v),
            mlp1: d.mlp1.map("dmm.mlp1", f),
            mlp2: d.mlp2.map("dmm.mlp2", f),
            update1: d.update1.map("dmm.update1", f),
            update2: d.update2.map("dmm.update2", f),
        };
        let decoder = Decoder {
            expand: self.decoder.expand.map("decoder.expand", f),
            conv1: self.decoder.conv1.map("decoder.conv1", f),
            conv2: self.decoder.conv2.map("decoder.conv2", f),
        };
        Params { encoder, tmoe, dmm, decoder }
    }

    /// All leaves with their names, in canonical order.
    pub fn named(&self) -> Vec<(String, &T)> {
        let mut out = Vec::new();
        self.encoder.stem.visit("encoder.stem", &mut out);
        for (i, b) in self.encoder.blocks.iter().enumerate() {
            b.conv1.visit(&format!("encoder.blocks.{i}.conv1"), &mut out);
            b.conv2.visit(&format!("encoder.blocks.{i}.conv2"), &mut out);
        }
        for (i, l) in self.tmoe.experts.iter().enumerate() {
            l.visit(&format!("tmoe.experts.{i}"), &mut out);
        }
        self.tmoe.refine.visit("tmoe.refine", &mut out);
        let d = &self.dmm;
        d.reduce.visit("dmm.reduce", &mut out);
        out.push(("dmm.proj_q".into(), &d.proj_q));
        out.push(("dmm.proj_k".into(), &d.proj_k));
        out.push(("dmm.proj_v".into(), &d.proj_v));
        d.mlp1.visit("dmm.mlp1", &mut out);
        d.mlp2.visit("dmm.mlp2", &mut out);
        d.update1.visit("dmm.update1", &mut out);
        d.update2.visit("dmm.update2", &mut out);
        self.decoder.expand.visit("decoder.expand", &mut out);
        self.decoder.conv1.visit("decoder.conv1", &mut out);
        self.decoder.conv2.visit("decoder.conv2", &mut out);
        out
    }

    pub fn named_mut(&mut self) -> Vec<(String, &mut T)> {
        let mut out = Vec::new();
        self.encoder.stem.visit_mut("encoder.stem", &mut out);
        for (i, b) in self.encoder.blocks.iter_mut().enumerate() {
            b.conv1.visit_mut(&format!("encoder.blocks.{i}.conv1"), &mut out);
            b.conv2.visit_mut(&format!("encoder.blocks.{i}.conv2"), &mut out);
        }
        for (i, l) in self.tmoe.experts.iter_mut().enumerate() {
            l.visit_mut(&format!("tmoe.experts.{i}"), &mut out);
        }
        self.tmoe.refine.visit_mut("tmoe.refine", &mut out);
        let d = &mut self.dmm;
        d.reduce.visit_mut("dmm.reduce", &mut out);
        out.push(("dmm.proj_q".into(), &mut d.proj_q));
        out.push(("dmm.proj_k".into(), &mut d.proj_k));
        out.push(("dmm.proj_v".into(), &mut d.proj_v));
        d.mlp1.visit_mut("dmm.mlp1", &mut out);
        d.mlp2.visit_mut("dmm.mlp2", &mut out);
        d.update1.visit_mut("dmm.update1", &mut out);
        d.update2.visit_mut("dmm.update2", &mut out);
        self.decoder.expand.visit_mut("decoder.expand", &mut out);
        self.decoder.conv1.visit_mut("decoder.conv1", &mut out);
        self.decoder.conv2.visit_mut("decoder.conv2", &mut out);
        out
    }
}

/// Model weights plus the configuration that determines their shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub tensors: Params<Tensor>,
}

/// Shape of every parameter tensor, as a pure function of the config.
pub fn param_shapes(cfg: &ModelConfig) -> Params<alloc::vec::Vec<usize>> {
    let c = cfg.channels;
    let cr = cfg.reduced_channels();
    let kt = cfg.temporal_kernel;
    let conv = |o: usize, i: usize| Layer { weight: alloc::vec![o, i, 3, 3], bias: alloc::vec![o] };
    let conv3 = |o: usize, i: usize| Layer { weight: alloc::vec![o, i, kt, 3, 3], bias: alloc::vec![o] };
    let linear = |i: usize, o: usize| Layer { weight: alloc::vec![i, o], bias: alloc::vec![o] };
    Params {
        encoder: Encoder {
            stem: conv(c, 3),
            blocks: (0..cfg.num_resblocks)
                .map(|_| ResBlock { conv1: conv(c, c), conv2: conv(c, c) })
                .collect(),
        },
        tmoe: Tmoe { experts: (0..cfg.groups).map(|_| conv3(c, c)).collect(), refine: conv3(c, c) },
        dmm: Dmm {
            reduce: conv(cr, c),
            proj_q: alloc::vec![cr, cr],
            proj_k: alloc::vec![cr, cr],
            proj_v: alloc::vec![cr, c],
            mlp1: linear(c, c),
            mlp2: linear(c, c),
            update1: conv(cr, c),
            update2: conv(cr, cr),
        },
        decoder: Decoder { expand: conv(4 * c, c), conv1: conv(c, c), conv2: conv(3, c) },
    }
}

impl ModelParams {
    /// Seeded fan-in scaled uniform weights, zero biases.
    ///
    /// Weights are drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` where
    /// `fan_in` is the product of all weight extents except the first
    /// (or the input width, for projection matrices).
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let shapes = param_shapes(&config);
        let mut rng = SeededRng::new(seed);
        let tensors = shapes.map(&mut |name, shape| {
            if name.ends_with(".bias") {
                return Tensor::zeros(shape);
            }
            let fan_in: usize = if shape.len() == 2 { shape[0] } else { shape[1..].iter().product() };
            let bound = 1.0 / libm::sqrt(fan_in as f64);
            rng.uniform_tensor(shape, -bound, bound)
        });
        Ok(Self { config, tensors })
    }

    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let tensors = param_shapes(&config).map(&mut |_, s| Tensor::zeros(s));
        Ok(Self { config, tensors })
    }

    pub fn num_params(&self) -> usize {
        self.tensors.named().iter().map(|(_, t)| t.numel()).sum()
    }

    /// Adds every tensor to `g` as a leaf (collecting gradients if `trainable`).
    pub fn bind(&self, g: &mut Graph, trainable: bool) -> Params<Var> {
        self.tensors.map(&mut |_, t| g.leaf(t.detached().with_requires_grad(trainable)))
    }

    /// Replaces the tensor called `name`.
    pub fn set(&mut self, name: &str, value: Tensor) -> Result<()> {
        for (n, t) in self.tensors.named_mut() {
            if n == name {
                if t.shape() != value.shape() {
                    return Err(dim_err!("{name}: expected {:?}, got {:?}", t.shape(), value.shape()));
                }
                *t = value;
                return Ok(());
            }
        }
        Err(config_err!("unknown parameter '{name}'"))
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.named().into_iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }
}

/// Copies the encoder of a Phase I model into a Phase II model, keeping the
/// Phase II decoder, temporal fusion and memory weights as they are.
pub fn transfer_phase1_weights(phase1: &ModelParams, phase2: &ModelParams) -> Result<ModelParams> {
    let (a, b) = (&phase1.config, &phase2.config);
    if a.channels != b.channels || a.num_resblocks != b.num_resblocks {
        return Err(config_err!(
            "encoder configs differ: {}ch/{} blocks vs {}ch/{} blocks",
            a.channels,
            a.num_resblocks,
            b.channels,
            b.num_resblocks
        ));
    }
    let mut out = phase2.clone();
    out.tensors.encoder = phase1.tensors.encoder.clone();
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_unique_and_ordered() {
        let p = ModelParams::init(ModelConfig::default(), 0).unwrap();
        let names: Vec<String> = p.tensors.named().into_iter().map(|(n, _)| n).collect();
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
        let mapped = p.tensors.map(&mut |n, _| String::from(n));
        let mapped_names: Vec<String> = mapped.named().into_iter().map(|(_, n)| n.clone()).collect();
        assert_eq!(mapped_names, names);
    }

    #[test]
    fn encoder_param_count_closed_form() {
        let cfg = ModelConfig::default();
        let p = ModelParams::init(cfg, 1).unwrap();
        let (c, b) = (8usize, 6usize);
        let stem = c * 3 * 9 + c;
        let block = 2 * (c * c * 9 + c);
        let enc: usize = p
            .tensors
            .named()
            .iter()
            .filter(|(n, _)| n.starts_with("encoder."))
            .map(|(_, t)| t.numel())
            .sum();
        assert_eq!(enc, stem + b * block);
        assert_eq!(enc, 7232);
    }

    #[test]
    fn init_is_seeded() {
        let a = ModelParams::init(ModelConfig::default(), 5).unwrap();
        let b = ModelParams::init(ModelConfig::default(), 5).unwrap();
        let c = ModelParams::init(ModelConfig::default(), 6).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn transfer_copies_encoder_only() {
        let p1 = ModelParams::init(ModelConfig::default(), 1).unwrap();
        let p2 = ModelParams::init(ModelConfig::default(), 2).unwrap();
        let t = transfer_phase1_weights(&p1, &p2).unwrap();
        assert_eq!(t.tensors.encoder, p1.tensors.encoder);
        assert_eq!(t.tensors.decoder, p2.tensors.decoder);
        assert_ne!(t.tensors.decoder, p1.tensors.decoder);
        let again = transfer_phase1_weights(&p1, &t).unwrap();
        assert_eq!(again, t);
        let other = ModelParams::init(ModelConfig { channels: 4, ..ModelConfig::default() }, 0).unwrap();
        assert!(transfer_phase1_weights(&other, &p2).is_err());
    }
}
