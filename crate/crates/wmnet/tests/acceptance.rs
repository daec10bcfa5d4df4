//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs as a plain binary (no test harness) so the lines are always shown.
//! A failed criterion is reported but does not fail the build unless
//! `WMNET_ACCEPTANCE_STRICT` is set, in which case the exit status is 1.

use std::collections::VecDeque;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use wmnet_core::gradcheck::run_audit;
use wmnet_core::loss::{ssim_global, LossConfig};
use wmnet_core::metrics::{delta_e_itp, gamut_hull_area, psnr, ssim_windowed};
use wmnet_core::model::{infer_phase2, tmoe_forward, MemoryStore, ModelConfig, ModelParams};
use wmnet_core::rng::SeededRng;
use wmnet_core::synth::{synth_dataset, Scene, SynthConfig};
use wmnet_core::train::{stack_frames, train_phase1, train_phase2, Phase1Run, TrainConfig};
use wmnet_core::wavelet::{
    apply_wmim, chw_to_hwc, curriculum_ratio, dwt2d_level, dwt2d_multi, hwc_to_chw, idwt2d_multi, spatial_mask,
    CurriculumSchedule, FilterBank, MaskConfig, WaveletKind,
};
use wmnet_core::{Graph, Tensor};

type Outcome = Result<String, String>;

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let spent = start.elapsed();
    if spent > limit {
        return Err(format!("took {spent:.1?}, limit {limit:?}"));
    }
    Ok(spent)
}

fn random_frames() -> Vec<Tensor> {
    let mut rng = SeededRng::new(2024);
    (0..100).map(|_| rng.uniform_tensor(&[32, 32, 3], 0.0, 1.0)).collect()
}

fn energy(t: &Tensor) -> f64 {
    t.data().iter().map(|v| v * v).sum()
}

fn c1_reconstruction() -> Outcome {
    let start = Instant::now();
    let frames = random_frames();
    let mut worst: f64 = 0.0;
    for kind in WaveletKind::ALL {
        let fb = FilterBank::new(kind);
        for levels in 1..=3 {
            for x in &frames {
                let pyr = dwt2d_multi(x, &fb, levels).map_err(|e| e.to_string())?;
                let back = idwt2d_multi(&pyr, &fb).map_err(|e| e.to_string())?;
                worst = worst.max(back.max_abs_diff(x));
            }
        }
    }
    let spent = within(Duration::from_secs(10), start)?;
    check(worst <= 1e-6, format!("max |IDWT(DWT(x)) - x| = {worst:.2e} over 900 transforms in {spent:.1?}"))
}

fn c2_parseval() -> Outcome {
    let mut worst: f64 = 0.0;
    for kind in WaveletKind::ALL {
        let fb = FilterBank::new(kind);
        for x in random_frames() {
            let mut cur = x;
            for _ in 0..3 {
                let b = dwt2d_level(&cur, &fb).map_err(|e| e.to_string())?;
                let split = energy(&b.ll) + energy(&b.lh) + energy(&b.hl) + energy(&b.hh);
                worst = worst.max((split - energy(&cur)).abs() / energy(&cur));
                cur = b.ll;
            }
        }
    }
    check(worst <= 1e-9, format!("max relative energy change per level = {worst:.2e}"))
}

fn c3_gradient_audit() -> Outcome {
    let start = Instant::now();
    let report = run_audit(0, None).map_err(|e| e.to_string())?;
    let spent = within(Duration::from_secs(300), start)?;
    let worst = report.ops.iter().chain(&report.params).map(|e| e.max_rel_error).fold(0.0, f64::max);
    let failures: Vec<String> = report.failures().iter().map(|e| e.name.clone()).collect();
    check(
        report.passed() && worst <= 1e-4,
        format!(
            "{} ops and {} parameters, worst relative error {worst:.2e}, failures {failures:?}, {spent:.1?}",
            report.ops.len(),
            report.params.len()
        ),
    )
}

fn c4_gating() -> Outcome {
    let mut worst: f64 = 0.0;
    for d in 1..=3 {
        let cfg = ModelConfig { groups: d, num_resblocks: 6, ..ModelConfig::default() };
        for seed in 0..3 {
            let params = ModelParams::init(cfg, seed).map_err(|e| e.to_string())?;
            let mut g = Graph::new();
            let p = params.bind(&mut g, false);
            let mut rng = SeededRng::new(100 + seed);
            let groups: Vec<_> =
                (0..d).map(|_| g.constant(rng.uniform_tensor(&[4, cfg.channels, 6, 6], -3.0, 3.0))).collect();
            let out = tmoe_forward(&mut g, &groups, &p.tmoe, cfg.temporal_kernel).map_err(|e| e.to_string())?;
            let gates = g.value(out.gates);
            let per = gates.numel() / d;
            for i in 0..per {
                let s: f64 = (0..d).map(|k| gates.data()[k * per + i]).sum();
                worst = worst.max((s - 1.0).abs());
            }
        }
    }
    check(worst <= 1e-9, format!("max |sum of gates - 1| = {worst:.2e} for D = 1, 2, 3"))
}

fn c5_memory() -> Outcome {
    let cfg = ModelConfig { frames_per_clip: 1, ..ModelConfig::default() };
    let params = ModelParams::init(cfg, 5).map_err(|e| e.to_string())?;
    let data = synth_dataset(&SynthConfig { num_scenes: 2, height: 16, width: 16, ..SynthConfig::default() })
        .map_err(|e| e.to_string())?;
    let (a, b) = (&data[0], &data[1]);
    let frame = |s: &Scene, t: usize| stack_frames(&s.frames_ldr[t..t + 1]).expect("frame");
    let mut store = MemoryStore::new(cfg.memory_len);
    let mut lengths = Vec::new();
    let mut history: Vec<VecDeque<Tensor>> = Vec::new();
    for t in 0..5 {
        infer_phase2(&params, &frame(a, t), &a.scene_id, &mut store).map_err(|e| e.to_string())?;
        lengths.push(store.len_of(&a.scene_id));
        history.push(store.queue(&a.scene_id).cloned().unwrap_or_default());
    }
    let lengths_ok = lengths == [1, 2, 2, 2, 2];
    // the newest entry of step t becomes the oldest at step t + 1
    let fifo_ok = (1..5).all(|t| history[t][0] == history[t - 1][history[t - 1].len() - 1]);

    // replay: scene A's outputs must not depend on what scene B stored
    let run_a = |store: &mut MemoryStore| -> Result<Vec<Tensor>, String> {
        (0..4).map(|t| infer_phase2(&params, &frame(a, t), &a.scene_id, store).map_err(|e| e.to_string())).collect()
    };
    let alone = run_a(&mut MemoryStore::new(cfg.memory_len))?;
    let mut shared = MemoryStore::new(cfg.memory_len);
    for t in 0..4 {
        infer_phase2(&params, &frame(b, t), &b.scene_id, &mut shared).map_err(|e| e.to_string())?;
    }
    let b_before = shared.queue(&b.scene_id).cloned();
    let interleaved = run_a(&mut shared)?;
    let isolated = alone == interleaved && shared.queue(&b.scene_id).cloned() == b_before;
    check(
        lengths_ok && fifo_ok && isolated,
        format!("queue lengths {lengths:?}, FIFO order {fifo_ok}, scene isolation {isolated}"),
    )
}

fn c6_curriculum() -> Outcome {
    let total = 2000;
    let s = CurriculumSchedule::new(total);
    let ends = (curriculum_ratio(0, &s), curriculum_ratio(total, &s));
    let samples: Vec<f64> = (0..100).map(|i| curriculum_ratio(i * total / 99, &s)).collect();
    let monotone = samples.windows(2).all(|w| w[0] <= w[1]);
    check(ends == (0.0, 0.5) && monotone, format!("ratio(0) = {}, ratio(T) = {}, monotone {monotone}", ends.0, ends.1))
}

fn c7_gamut() -> Outcome {
    let start = Instant::now();
    let corpus = synth_dataset(&SynthConfig { num_scenes: 5, frames_per_scene: 10, height: 64, width: 64, seed: 77, ..SynthConfig::default() })
        .map_err(|e| e.to_string())?;
    let fb = FilterBank::haar();
    let (mut shrunk, mut total) = (0usize, 0usize);
    let mut spatial_change = Vec::new();
    for (i, frame) in corpus.iter().flat_map(|s| s.frames_hdr.iter()).enumerate() {
        let x = chw_to_hwc(frame).map_err(|e| e.to_string())?;
        let cfg = MaskConfig { levels: 3, low_freq_ratio: 0.5, mask_cell: 1, seed: i as u64 };
        let masked = hwc_to_chw(&apply_wmim(&x, &cfg, &fb).map_err(|e| e.to_string())?.frame).map_err(|e| e.to_string())?;
        let spatial = hwc_to_chw(&spatial_mask(&x, 0.9, i as u64).map_err(|e| e.to_string())?.frame)
            .map_err(|e| e.to_string())?;
        let area = gamut_hull_area(frame).map_err(|e| e.to_string())?;
        let area_w = gamut_hull_area(&masked).map_err(|e| e.to_string())?;
        let area_s = gamut_hull_area(&spatial).map_err(|e| e.to_string())?;
        shrunk += usize::from(area_w <= area);
        total += 1;
        spatial_change.push((area_s - area).abs() / area);
    }
    spatial_change.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    let median = (spatial_change[24] + spatial_change[25]) / 2.0;
    let spent = within(Duration::from_secs(120), start)?;
    check(
        total == 50 && shrunk * 10 >= total * 9 && median < 0.1,
        format!(
            "wavelet-masked hull <= original on {shrunk}/{total} frames; spatial 0.9 masking median change {:.1}%; {spent:.1?}",
            median * 100.0
        ),
    )
}

/// Toy corpus shared by the training criteria: 8 training and 2 validation
/// scenes of 32x32.
fn toy_corpus() -> (Vec<Scene>, Vec<Scene>) {
    let mut all = synth_dataset(&SynthConfig::default()).expect("synthetic corpus");
    let val = all.split_off(8);
    (all, val)
}

fn phase1_config(seed: u64) -> TrainConfig {
    TrainConfig { total_iters: 2000, lr_halving_period: 400, base_lr: 5e-3, batch_clips: 4, seed, ..TrainConfig::default() }
}

fn phase2_config(seed: u64) -> TrainConfig {
    TrainConfig { total_iters: P2_ITERS, lr_halving_period: P2_ITERS / 4, base_lr: P2_LR, batch_clips: P2_BATCH, seed, ..TrainConfig::default() }
}

const P2_ITERS: usize = 1000;
const P2_LR: f64 = 1e-3;
const P2_BATCH: usize = 2;

fn c8_phase1(run: &Phase1Run, spent: Duration) -> Outcome {
    if let Some(e) = &run.failure {
        return Err(format!("training failed: {e}"));
    }
    let first = run.log[0].l1;
    let tail = &run.log[run.log.len() - 50..];
    let last = tail.iter().map(|r| r.l1).sum::<f64>() / tail.len() as f64;
    check(
        last <= 0.1 * first && run.log.len() <= 2000 && spent < Duration::from_secs(600),
        format!(
            "L1 {first:.4} at step 0, {last:.4} over the last 50 steps (ratio {:.3}) after {} steps in {spent:.1?}",
            last / first,
            run.log.len()
        ),
    )
}

/// Best validation PSNR of a fine-tuning run.
fn finetune(train: &[Scene], val: &[Scene], pre: Option<&ModelParams>, cfg: ModelConfig, seed: u64) -> Result<f64, String> {
    let run = train_phase2(train, val, pre, &cfg, &phase2_config(seed)).map_err(|e| e.to_string())?;
    if let Some(e) = run.failure {
        return Err(format!("fine-tuning failed: {e}"));
    }
    Ok(run.validation.iter().map(|v| v.psnr).fold(f64::NEG_INFINITY, f64::max))
}

struct Ablation {
    scratch: Vec<f64>,
    pretrained: Vec<f64>,
    tmoe: Vec<f64>,
    full: Vec<f64>,
}

fn run_ablation(train: &[Scene], val: &[Scene], phase1: &[ModelParams]) -> Result<Ablation, String> {
    let full = ModelConfig::default();
    let base = ModelConfig { use_tmoe: false, use_dmm: false, ..full };
    let tmoe = ModelConfig { use_dmm: false, ..full };
    let mut out = Ablation { scratch: vec![], pretrained: vec![], tmoe: vec![], full: vec![] };
    for (seed, p1) in phase1.iter().enumerate() {
        let seed = seed as u64;
        out.scratch.push(finetune(train, val, None, base, seed)?);
        out.pretrained.push(finetune(train, val, Some(p1), base, seed)?);
        out.tmoe.push(finetune(train, val, Some(p1), tmoe, seed)?);
        out.full.push(finetune(train, val, Some(p1), full, seed)?);
    }
    Ok(out)
}

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:+.2}")).collect();
    parts.join(", ")
}

fn diffs(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn c9_pretraining(ab: &Ablation) -> Outcome {
    let gains = diffs(&ab.pretrained, &ab.scratch);
    check(
        gains.iter().all(|&g| g >= 0.3),
        format!("PSNR gain from pretraining per seed [{}] dB (scratch [{}])", fmt(&gains), fmt(&ab.scratch)),
    )
}

fn c10_modules(ab: &Ablation) -> Outcome {
    let tmoe = diffs(&ab.tmoe, &ab.pretrained);
    let dmm = diffs(&ab.full, &ab.tmoe);
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    check(
        mean(&tmoe) >= 0.0 && mean(&dmm) >= 0.0,
        format!(
            "adding T-MoE [{}] mean {:+.3} dB; adding memory [{}] mean {:+.3} dB",
            fmt(&tmoe),
            mean(&tmoe),
            fmt(&dmm),
            mean(&dmm)
        ),
    )
}

fn c11_metrics() -> Outcome {
    let x = SeededRng::new(3).uniform_tensor(&[3, 16, 16], 0.0, 1.0);
    let p = psnr(&x, &x, 1.0).map_err(|e| e.to_string())?;
    let sg = ssim_global(&x, &x, &LossConfig::default()).map_err(|e| e.to_string())?;
    let sw = ssim_windowed(&x, &x).map_err(|e| e.to_string())?;
    let de = delta_e_itp(&x, &x, 1000.0).map_err(|e| e.to_string())?.mean;
    let identity = p == f64::INFINITY && sg == 1.0 && sw == 1.0 && de == 0.0;
    // independent high-precision reference values, 1.0 = 1000 cd/m^2
    let cases = [
        ([0.5, 0.2, 0.1], [0.45, 0.25, 0.12], 33.111_408_137_349_536),
        ([0.01, 0.01, 0.01], [0.02, 0.015, 0.01], 41.067_323_152_866_49),
        ([0.9, 0.8, 0.7], [0.7, 0.8, 0.9], 30.019_878_889_424_554),
    ];
    let mut worst: f64 = 0.0;
    for (a, b, want) in cases {
        let ta = Tensor::new(&[3, 1, 1], a.to_vec()).map_err(|e| e.to_string())?;
        let tb = Tensor::new(&[3, 1, 1], b.to_vec()).map_err(|e| e.to_string())?;
        worst = worst.max((delta_e_itp(&ta, &tb, 1000.0).map_err(|e| e.to_string())?.mean - want).abs());
    }
    check(
        identity && worst <= 1e-6,
        format!("identity PSNR {p}, SSIM {sg}/{sw}, dE_ITP {de}; reference pairs max error {worst:.2e}"),
    )
}

fn files_equal(a: &Path, b: &Path) -> Result<usize, String> {
    let mut names: Vec<_> = std::fs::read_dir(a).map_err(|e| e.to_string())?.map(|e| e.expect("entry").file_name()).collect();
    names.sort();
    for n in &names {
        let (x, y) = (std::fs::read(a.join(n)), std::fs::read(b.join(n)));
        if x.map_err(|e| e.to_string())? != y.map_err(|e| e.to_string())? {
            return Err(format!("{} differs", n.to_string_lossy()));
        }
    }
    Ok(names.len())
}

fn c12_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let bin = env!("CARGO_BIN_EXE_wmnet");
    let data = dir.path().join("data");
    let run = |args: &[&str]| -> Result<(), String> {
        let out = Command::new(bin).args(args).output().map_err(|e| e.to_string())?;
        if out.status.success() {
            Ok(())
        } else {
            Err(String::from_utf8_lossy(&out.stderr).into_owned())
        }
    };
    run(&["synth", "--out", data.to_str().unwrap(), "--num-scenes", "2", "--height", "16", "--width", "16"])?;
    let mut outs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        run(&["pretrain", "--data", data.to_str().unwrap(), "--out", out.to_str().unwrap(), "--total-iters", "40", "--seed", "3"])?;
        outs.push(out);
    }
    let log_a = std::fs::read(outs[0].join("loss.tsv")).map_err(|e| e.to_string())?;
    let log_b = std::fs::read(outs[1].join("loss.tsv")).map_err(|e| e.to_string())?;
    let tensors = files_equal(&outs[0].join("checkpoint"), &outs[1].join("checkpoint"));
    let files = match &tensors {
        Ok(n) => format!("all {n} checkpoint files identical"),
        Err(e) => format!("checkpoint mismatch: {e}"),
    };
    check(log_a == log_b && tensors.is_ok(), format!("loss logs identical {}, {files}", log_a == log_b))
}

fn report(results: &mut Vec<bool>, id: usize, title: &str, outcome: Outcome) {
    let (tag, detail) = match &outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("criterion {id:>2} {tag}  {title}: {detail}");
    results.push(outcome.is_ok());
}

fn main() {
    let mut results = Vec::new();
    report(&mut results, 1, "wavelet perfect reconstruction", c1_reconstruction());
    report(&mut results, 2, "per-level energy conservation", c2_parseval());
    report(&mut results, 3, "gradient audit", c3_gradient_audit());
    report(&mut results, 4, "expert gates sum to one", c4_gating());
    report(&mut results, 5, "scene memory semantics", c5_memory());
    report(&mut results, 6, "curriculum endpoints", c6_curriculum());
    report(&mut results, 7, "gamut shrinkage under wavelet masking", c7_gamut());

    let (train, val) = toy_corpus();
    let mut phase1 = Vec::new();
    for seed in 0..3 {
        let start = Instant::now();
        let run = train_phase1(&train, &ModelConfig::default(), &phase1_config(seed), &CurriculumSchedule::new(2000));
        let spent = start.elapsed();
        match run {
            Ok(run) => {
                if seed == 0 {
                    report(&mut results, 8, "toy pretraining converges", c8_phase1(&run, spent));
                }
                phase1.push(run.params);
            }
            Err(e) => {
                if seed == 0 {
                    report(&mut results, 8, "toy pretraining converges", Err(e.to_string()));
                }
            }
        }
    }
    match (phase1.len() == 3).then(|| run_ablation(&train, &val, &phase1)) {
        Some(Ok(ab)) => {
            report(&mut results, 9, "pretraining helps fine-tuning", c9_pretraining(&ab));
            report(&mut results, 10, "temporal fusion and memory do not hurt", c10_modules(&ab));
        }
        other => {
            let why = match other {
                Some(Err(e)) => e,
                _ => "pretraining runs failed".to_string(),
            };
            report(&mut results, 9, "pretraining helps fine-tuning", Err(why.clone()));
            report(&mut results, 10, "temporal fusion and memory do not hurt", Err(why));
        }
    }
    report(&mut results, 11, "metric identities and colour-difference reference", c11_metrics());
    report(&mut results, 12, "pretraining is deterministic", c12_determinism());

    let passed = results.iter().filter(|&&r| r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() && std::env::var_os("WMNET_ACCEPTANCE_STRICT").is_some() {
        std::process::exit(1);
    }
}
