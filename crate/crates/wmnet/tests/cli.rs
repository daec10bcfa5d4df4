use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use wmnet::dataset::load_dataset;
use wmnet::pfm::read_pfm;
use wmnet_core::loss::{ssim_global, LossConfig};
use wmnet_core::metrics::{delta_e_itp, psnr, ssim_windowed};
use wmnet_core::wavelet::{chw_to_hwc, hwc_to_chw, lowpass, FilterBank};

fn wmnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wmnet")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) {
    let out = wmnet(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn read_tsv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split('\t').map(str::to_string).collect())
        .collect()
}

fn synth(dir: &Path, scenes: &str, size: &str) -> PathBuf {
    let data = dir.join("data");
    ok(&["synth", "--out", p(&data), "--num-scenes", scenes, "--height", size, "--width", size]);
    data
}

#[test]
fn synth_defaults_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    ok(&["synth", "--out", p(&a)]);
    let scenes = load_dataset(&a).unwrap();
    assert_eq!(scenes.len(), 10);
    assert!(scenes.iter().all(|s| s.len() == 8 && s.extent() == (32, 32)));
    let b = dir.path().join("b");
    ok(&["synth", "--out", p(&b)]);
    for f in ["scene_003/ldr/0004.pfm", "scene_009/hdr/0007.pfm", "config.json"] {
        let (x, y) = (std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
        assert!(x == y || f == "config.json", "{f} differs");
    }
    let c = dir.path().join("c");
    ok(&["synth", "--out", p(&c), "--num-scenes", "3", "--seed", "4"]);
    assert_eq!(load_dataset(&c).unwrap().len(), 3);
    assert_ne!(std::fs::read(c.join("scene_000/hdr/0000.pfm")).unwrap(), std::fs::read(a.join("scene_000/hdr/0000.pfm")).unwrap());
}

#[test]
fn config_file_overrides_and_echo() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"num_scenes": 2, "height": 16, "width": 16, "seed": 1}"#).unwrap();
    let out = dir.path().join("out");
    ok(&["synth", "--config", p(&cfg), "--out", p(&out), "--width", "8"]);
    let resolved: serde_json::Value = serde_json::from_slice(&std::fs::read(out.join("config.json")).unwrap()).unwrap();
    assert_eq!(resolved["num_scenes"], 2);
    assert_eq!(resolved["height"], 16);
    assert_eq!(resolved["width"], 8);
    assert_eq!(resolved["seed"], 1);
    assert_eq!(load_dataset(&out).unwrap()[0].extent(), (16, 8));

    std::fs::write(&cfg, r#"{"num_scene": 2}"#).unwrap();
    assert_eq!(wmnet(&["synth", "--config", p(&cfg), "--out", p(&out)]).status.code(), Some(1));
    assert_eq!(wmnet(&["synth", "--out", p(&out), "--no-such-key", "1"]).status.code(), Some(1));
    assert_eq!(wmnet(&["synth", "--out", p(&out), "--height", "abc"]).status.code(), Some(1));
    assert_eq!(wmnet(&["frobnicate"]).status.code(), Some(1));
}

#[test]
fn mask_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "2", "16");
    let m0 = dir.path().join("m0");
    ok(&["mask", "--data", p(&data), "--out", p(&m0), "--mask-ratio", "0", "--levels", "2"]);
    let scenes = load_dataset(&data).unwrap();
    let fb = FilterBank::haar();
    for s in &scenes {
        for (t, f) in s.frames_ldr.iter().enumerate() {
            let want = hwc_to_chw(&lowpass(&chw_to_hwc(f).unwrap(), 2, &fb).unwrap()).unwrap();
            let got = read_pfm(&m0.join(&s.scene_id).join(format!("{t:04}.pfm"))).unwrap();
            assert!(got.max_abs_diff(&want) < 1e-6);
        }
    }
    let m = dir.path().join("m");
    ok(&["mask", "--data", p(&data), "--out", p(&m)]);
    let rows = read_tsv(&m.join("gamut.tsv"));
    assert_eq!(rows.len(), 16);
    let shrunk = rows.iter().filter(|r| r[3].parse::<f64>().unwrap() <= r[2].parse::<f64>().unwrap()).count();
    assert!(shrunk * 10 >= rows.len() * 9, "{shrunk} of {}", rows.len());
    let bands = read_tsv(&m.join("bands.tsv"));
    // three levels of three detail bands plus the deepest approximation
    assert_eq!(bands.len(), 16 * 10);
    assert!(bands.iter().filter(|r| r[3] != "LL").all(|r| r[5] == "0"));
    let sidecar = std::fs::read_to_string(m.join("scene_000/0000.mask.txt")).unwrap();
    assert!(sidecar.starts_with("2 2 0.5\n"));
}

#[test]
fn training_commands() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "3", "16");
    let ft_out = dir.path().join("ft");
    let no_ckpt = wmnet(&["finetune", "--data", p(&data), "--out", p(&ft_out)]);
    assert_eq!(no_ckpt.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&no_ckpt.stderr).contains("checkpoint"));

    let pt = dir.path().join("pt");
    ok(&["pretrain", "--data", p(&data), "--out", p(&pt), "--total-iters", "6"]);
    let log = read_tsv(&pt.join("loss.tsv"));
    assert_eq!(log.len(), 6);
    assert!(log.iter().enumerate().all(|(i, r)| r[0] == i.to_string()));
    assert!(pt.join("checkpoint/manifest.txt").is_file());

    ok(&[
        "finetune", "--data", p(&data), "--out", p(&ft_out), "--checkpoint", p(&pt.join("checkpoint")),
        "--total-iters", "4", "--val-scenes", "1",
    ]);
    let log = read_tsv(&ft_out.join("loss.tsv"));
    assert!(log.iter().enumerate().all(|(i, r)| r[0] == i.to_string() && r[4] != "-"));
    assert_eq!(read_tsv(&ft_out.join("validation.tsv")).len(), 4);

    let ev = dir.path().join("ev");
    ok(&["eval", "--data", p(&data), "--out", p(&ev), "--checkpoint", p(&ft_out.join("checkpoint")), "--dump", "true"]);
    assert_eq!(read_tsv(&ev.join("metrics.tsv")).len(), 24);
    assert_eq!(load_dataset(&ev.join("pred")).unwrap().len(), 3);
    assert_eq!(wmnet(&["eval", "--data", p(&data), "--out", p(&ev)]).status.code(), Some(1));
}

#[test]
fn eval_of_identical_directories() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "2", "16");
    let ev = dir.path().join("ev");
    ok(&["eval", "--data", p(&data), "--pred", p(&data), "--out", p(&ev)]);
    for r in read_tsv(&ev.join("metrics.tsv")) {
        assert_eq!((r[2].as_str(), r[3].as_str(), r[4].as_str(), r[5].as_str()), ("inf", "1", "1", "0"));
    }
    let summary = read_tsv(&ev.join("summary.tsv"));
    assert_eq!(summary[0], ["psnr", "inf"]);
    assert_eq!(summary[3], ["delta_e_itp", "0"]);
}

#[test]
fn eval_matches_library_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let data = synth(dir.path(), "2", "16");
    // score the LDR frames as if they were predictions
    let pred = dir.path().join("pred");
    for s in load_dataset(&data).unwrap() {
        for (t, f) in s.frames_ldr.iter().enumerate() {
            let name = format!("{t:04}.pfm");
            wmnet::pfm::write_pfm(&pred.join(&s.scene_id).join("ldr").join(&name), f).unwrap();
            wmnet::pfm::write_pfm(&pred.join(&s.scene_id).join("hdr").join(&name), f).unwrap();
        }
    }
    let ev = dir.path().join("ev");
    ok(&["eval", "--data", p(&data), "--pred", p(&pred), "--out", p(&ev)]);
    let rows = read_tsv(&ev.join("metrics.tsv"));
    let scenes = load_dataset(&data).unwrap();
    let mut k = 0;
    let mut sums = [0.0; 4];
    for s in &scenes {
        for (x, y) in s.frames_ldr.iter().zip(&s.frames_hdr) {
            let want = [
                psnr(x, y, 1.0).unwrap(),
                ssim_global(x, y, &LossConfig::default()).unwrap(),
                ssim_windowed(x, y).unwrap(),
                delta_e_itp(x, y, 1000.0).unwrap().mean,
            ];
            for (j, w) in want.iter().enumerate() {
                let got: f64 = rows[k][2 + j].parse().unwrap();
                assert_eq!(got, *w, "row {k} column {j}");
                sums[j] += got;
            }
            k += 1;
        }
    }
    let summary = read_tsv(&ev.join("summary.tsv"));
    for (j, row) in summary.iter().enumerate() {
        let mean: f64 = row[1].parse().unwrap();
        assert!((mean - sums[j] / k as f64).abs() <= 1e-12 * mean.abs().max(1.0));
    }
}

#[test]
fn gradcheck_passes_and_catches_faults() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gc");
    ok(&["gradcheck", "--out", p(&out)]);
    let rows = read_tsv(&out.join("report.tsv"));
    assert!(rows.iter().any(|r| r[0] == "op" && r[1] == "conv3d"));
    assert!(rows.iter().any(|r| r[0] == "param" && r[1] == "dmm.proj_q"));
    assert!(rows.iter().all(|r| r[4] == "true"));

    let bad = wmnet(&["gradcheck", "--out", p(&dir.path().join("gc2")), "--fault", "matmul"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("matmul"));
    let unknown = wmnet(&["gradcheck", "--out", p(&dir.path().join("gc3")), "--fault", "nope"]);
    assert_eq!(unknown.status.code(), Some(1));
}
