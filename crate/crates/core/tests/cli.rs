//! End-to-end runs of the `dofsplat` binary: exit codes, config echo,
//! zero-iteration identity and byte-level determinism.

use std::path::Path;
use std::process::Command;

use dofsplat::harness::cli::CHECKPOINT_FILE;
use dofsplat::harness::{camera_json, checkpoint, pfm, ppm, Dataset};

fn run(args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_dofsplat")).args(args).output().unwrap();
    (
        out.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

fn ok(args: &[&str]) -> String {
    let (code, stdout, stderr) = run(args);
    assert_eq!(code, 0, "{args:?}\nstdout: {stdout}\nstderr: {stderr}");
    stdout
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn synth(dir: &Path, noise: &str, bump: &str, seed: &str) {
    ok(&[
        "synth", "--spec", "two_planes", "--views", "2", "--size", "24x20", "--seed", seed,
        "--noise-sigma", noise, "--bump-amp", bump, "--out", p(dir),
    ]);
}

#[test]
fn zero_iteration_train_copies_the_scene_and_scores_perfect_pdc() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, run_dir) = (tmp.path().join("data"), tmp.path().join("run"));
    synth(&data, "0", "0", "3");
    assert!(data.join("synth_config.json").exists());
    ok(&["train", "--data", p(&data), "--out", p(&run_dir), "--iters", "0", "--seed", "0"]);
    assert!(run_dir.join("config.json").exists());

    let dataset = Dataset::load(&data).unwrap();
    let trained = checkpoint::load(&run_dir.join(CHECKPOINT_FILE)).unwrap();
    assert_eq!(trained, dataset.initial_scene(1).unwrap());

    let report_path = tmp.path().join("report.json");
    let overlay = tmp.path().join("overlay");
    std::fs::create_dir_all(&overlay).unwrap();
    ok(&[
        "eval", "--checkpoint", p(&run_dir.join(CHECKPOINT_FILE)), "--data", p(&data), "--patch", "4",
        "--out", p(&report_path), "--overlay", p(&overlay),
    ]);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&report_path).unwrap()).unwrap();
    let pdc = report["pdc"].as_f64().unwrap();
    assert!((pdc - 1.0).abs() <= 1e-9, "pdc {pdc}");
    assert!(report["depth_rmse"].as_f64().unwrap() <= 1e-9);
    assert_eq!(report["config_echo"]["patch"], 4);
    assert!(overlay.join("pdc_view_000.ppm").exists());

    // the same thresholds as a check: one that holds, one that cannot
    ok(&["eval", "--checkpoint", p(&run_dir.join(CHECKPOINT_FILE)), "--data", p(&data), "--patch", "4", "--out", p(&report_path), "--min-pdc", "0.99"]);
    let (code, _, _) = run(&[
        "eval", "--checkpoint", p(&run_dir.join(CHECKPOINT_FILE)), "--data", p(&data), "--patch", "4",
        "--out", p(&report_path), "--min-psnr", "200",
    ]);
    assert_eq!(code, 2);
}

#[test]
fn synth_train_eval_is_byte_deterministic() {
    let reports: Vec<Vec<u8>> = (0..2)
        .map(|_| {
            let tmp = tempfile::tempdir().unwrap();
            let (data, run_dir) = (tmp.path().join("data"), tmp.path().join("run"));
            synth(&data, "0.02", "0.05", "5");
            ok(&["train", "--data", p(&data), "--out", p(&run_dir), "--iters", "4", "--seed", "1", "--log-every", "0"]);
            let report = tmp.path().join("report.json");
            ok(&["eval", "--checkpoint", p(&run_dir.join(CHECKPOINT_FILE)), "--data", p(&data), "--patch", "4", "--out", p(&report)]);
            let mut bytes = std::fs::read(&report).unwrap();
            // the echoed paths differ between the two temporary directories
            let text = String::from_utf8(bytes.clone()).unwrap().replace(p(tmp.path()), "<tmp>");
            bytes = text.into_bytes();
            bytes.extend(std::fs::read(run_dir.join(CHECKPOINT_FILE)).unwrap());
            bytes.extend(std::fs::read(run_dir.join("losses.jsonl")).unwrap());
            bytes
        })
        .collect();
    assert_eq!(reports[0], reports[1]);
}

#[test]
fn render_writes_color_depth_and_echo() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, run_dir) = (tmp.path().join("data"), tmp.path().join("run"));
    synth(&data, "0", "0", "1");
    ok(&["train", "--data", p(&data), "--out", p(&run_dir), "--iters", "0"]);
    let out = tmp.path().join("out");
    std::fs::create_dir_all(&out).unwrap();
    let (color, depth) = (out.join("c.ppm"), out.join("d.pfm"));
    ok(&[
        "render", "--checkpoint", p(&run_dir.join(CHECKPOINT_FILE)), "--camera", p(&data.join("view_000.json")),
        "--out-color", p(&color), "--out-depth", p(&depth),
    ]);
    let img = ppm::read(&color).unwrap();
    let d = pfm::read(&depth).unwrap();
    assert_eq!((img.width, img.height, d.width, d.height), (24, 20, 24, 20));
    assert!(out.join("render_config.json").exists());
}

#[test]
fn align_recovers_an_unperturbed_camera() {
    let tmp = tempfile::tempdir().unwrap();
    let (data, run_dir) = (tmp.path().join("data"), tmp.path().join("run"));
    synth(&data, "0", "0", "2");
    ok(&["train", "--data", p(&data), "--out", p(&run_dir), "--iters", "0"]);
    let aligned = tmp.path().join("aligned.json");
    ok(&[
        "align", "--checkpoint", p(&run_dir.join(CHECKPOINT_FILE)), "--image", p(&data.join("view_001.ppm")),
        "--init-camera", p(&data.join("view_001.json")), "--iters", "5", "--out", p(&aligned),
    ]);
    let cam = camera_json::read(&aligned).unwrap();
    let truth = camera_json::read(&data.join("view_001.json")).unwrap();
    assert!((cam.center() - truth.center()).norm() < 0.05);
    assert!(tmp.path().join("align_config.json").exists());
}

#[test]
fn gradcheck_passes_and_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("gc.json");
    let stdout = ok(&["gradcheck", "--seed", "0", "--size", "12", "--gaussians", "12", "--tol", "1e-5", "--out", p(&out)]);
    assert!(stdout.contains("-> ok"), "{stdout}");
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&out).unwrap()).unwrap();
    assert_eq!(report["seeds"][0]["report"]["pass"], true);
    // an impossible tolerance is a failed check, not an error
    let (code, _, _) = run(&["gradcheck", "--seed", "0", "--size", "12", "--gaussians", "12", "--tol", "0"]);
    assert_eq!(code, 2);
}

#[test]
fn usage_and_format_errors_exit_one() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(run(&["train", "--bogus"]).0, 1);
    assert_eq!(run(&["frobnicate"]).0, 1);
    assert_eq!(run(&[]).0, 1);
    assert_eq!(run(&["--help"]).0, 0);
    // views < 2 and sizes < 16 are contract violations
    assert_eq!(run(&["synth", "--views", "1", "--out", p(&tmp.path().join("a"))]).0, 1);
    assert_eq!(run(&["synth", "--size", "8x8", "--out", p(&tmp.path().join("b"))]).0, 1);
    // a truncated checkpoint is a format error
    let bad = tmp.path().join("bad.gsds");
    std::fs::write(&bad, b"GSDS1\x01\x02").unwrap();
    assert_eq!(run(&["eval", "--checkpoint", p(&bad), "--data", p(tmp.path()), "--patch", "4", "--out", p(&tmp.path().join("r.json"))]).0, 1);
    // unknown config keys are rejected
    let cfg = tmp.path().join("cfg.json");
    std::fs::write(&cfg, br#"{"iterations": 3, "learning_rate": 1}"#).unwrap();
    assert_eq!(run(&["train", "--data", p(tmp.path()), "--out", p(&tmp.path().join("r")), "--config", p(&cfg)]).0, 1);
}
