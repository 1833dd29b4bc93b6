//! Command-line front end. Exit codes: 0 success, 1 usage/contract/format
//! error, 2 a numerical check ran but failed.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gradcheck::{check_gradients, random_problem, GradcheckConfig};
use crate::metrics::{pdc_overlay, DEFAULT_PATCH};
use crate::rasterizer::{render, DepthMode, RenderSettings};
use crate::scene::materialize_scene;
use crate::training::align::{align_test_view, AlignConfig};
use crate::training::{train, LossBreakdownRecord, TrainConfig};

use super::dataset::Dataset;
use super::io::{read_bytes, write_atomic};
use super::synth::{synthesize, SceneKind, SynthSpec, Texture};
use super::{camera_json, checkpoint, eval, pfm, ppm};

/// Checkpoint file name inside a training output directory.
pub const CHECKPOINT_FILE: &str = "checkpoint.gsds";

#[derive(Debug, Parser)]
#[command(name = "dofsplat", version, about = "Depth-anchored Gaussian splatting refinement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic dataset with ground truth.
    Synth(SynthArgs),
    /// Optimize a scene initialized from a dataset's input depths.
    Train(TrainArgs),
    /// Render color and depth from a checkpoint through a camera.
    Render(RenderArgs),
    /// Score a checkpoint against a dataset.
    Eval(EvalArgs),
    /// Compare analytic and finite-difference gradients on random scenes.
    Gradcheck(GradcheckArgs),
    /// Refine a camera pose against an image with the scene frozen.
    Align(AlignArgs),
}

fn parse_snake<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

fn parse_size(s: &str) -> std::result::Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WxH")?;
    Ok((w.parse().map_err(|_| "bad width")?, h.parse().map_err(|_| "bad height")?))
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Scene kind: two_planes, sphere_on_plane or box_room.
    #[arg(long = "spec", value_parser = parse_snake::<SceneKind>)]
    kind: Option<SceneKind>,
    /// Texture: checker, stripes or noise.
    #[arg(long, value_parser = parse_snake::<Texture>)]
    texture: Option<Texture>,
    /// Number of training views.
    #[arg(long)]
    views: Option<usize>,
    #[arg(long)]
    test_views: Option<usize>,
    #[arg(long, value_parser = parse_size)]
    size: Option<(usize, usize)>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    bump_amp: Option<f64>,
    /// Full spec as JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    stride: Option<usize>,
    #[arg(long)]
    no_vis_loss: bool,
    #[arg(long)]
    freeze_offsets: bool,
    /// Free 3D positions instead of ray-anchored ones.
    #[arg(long)]
    naive: bool,
    /// TrainConfig as JSON; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Print a progress line every N iterations (0 = never).
    #[arg(long, default_value_t = 100)]
    log_every: usize,
}

#[derive(Debug, Args)]
struct RenderArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    camera: PathBuf,
    #[arg(long)]
    out_color: PathBuf,
    #[arg(long)]
    out_depth: PathBuf,
    #[arg(long, default_value_t = 3)]
    sh_degree: usize,
    #[arg(long, default_value = "normalized", value_parser = parse_snake::<DepthMode>)]
    depth_mode: DepthMode,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = DEFAULT_PATCH)]
    patch: usize,
    #[arg(long)]
    out: PathBuf,
    /// Write per-view PDC overlays into this directory.
    #[arg(long)]
    overlay: Option<PathBuf>,
    /// Exit 2 if mean PDC is below this.
    #[arg(long)]
    min_pdc: Option<f64>,
    /// Exit 2 if mean PSNR is below this.
    #[arg(long)]
    min_psnr: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of consecutive seeds to check, starting at --seed.
    #[arg(long, default_value_t = 1)]
    seeds: u64,
    #[arg(long, default_value_t = 16)]
    size: usize,
    #[arg(long, default_value_t = 20)]
    gaussians: usize,
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AlignArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    init_camera: PathBuf,
    #[arg(long, default_value_t = 500)]
    iters: usize,
    /// Aligned camera JSON; printed to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Result of a command that ran to completion.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Success,
    CheckFailed,
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_slice(&read_bytes(path)?)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn out_dir_of(file: &Path) -> PathBuf {
    match file.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}

fn cmd_synth(a: SynthArgs) -> Result<Outcome> {
    let mut spec: SynthSpec = match &a.config {
        Some(p) => read_json(p)?,
        None => SynthSpec::default(),
    };
    if let Some(k) = a.kind {
        spec.kind = k;
    }
    if let Some(t) = a.texture {
        spec.texture = t;
    }
    if let Some(v) = a.views {
        spec.train_views = v;
    }
    if let Some(v) = a.test_views {
        spec.test_views = v;
    }
    if let Some((w, h)) = a.size {
        spec.width = w;
        spec.height = h;
    }
    if let Some(s) = a.seed {
        spec.seed = s;
    }
    if let Some(s) = a.noise_sigma {
        spec.depth_noise = s;
    }
    if let Some(b) = a.bump_amp {
        spec.bump_amplitude = b;
    }
    let dataset = synthesize(&spec)?;
    dataset.write(&a.out)?;
    write_json(&a.out.join("synth_config.json"), &spec)?;
    eprintln!(
        "wrote {} training and {} test views to {}",
        dataset.views.len(),
        dataset.test_views.len(),
        a.out.display()
    );
    Ok(Outcome::Success)
}

fn cmd_train(a: TrainArgs) -> Result<Outcome> {
    let mut cfg: TrainConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    if let Some(n) = a.iters {
        cfg.iterations = n;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(s) = a.stride {
        cfg.stride = s;
    }
    cfg.disable_vis_loss |= a.no_vis_loss;
    cfg.freeze_offsets |= a.freeze_offsets;
    cfg.naive_free_position |= a.naive;
    cfg.validate()?;
    std::fs::create_dir_all(&a.out).map_err(|e| Error::io(&a.out, e))?;
    write_json(&a.out.join("config.json"), &cfg)?;

    let dataset = Dataset::load(&a.data)?;
    let scene = dataset.initial_scene(cfg.stride)?;
    eprintln!(
        "training {} Gaussians over {} views for {} iterations",
        scene.gaussian_count(),
        scene.views.len(),
        cfg.iterations
    );
    let mut log = Vec::new();
    let log_every = a.log_every;
    let mut sink = |t: usize, view: usize, loss: &crate::losses::LossBreakdown| {
        let record = LossBreakdownRecord { iteration: t, view, loss: *loss };
        if let Ok(line) = serde_json::to_string(&record) {
            log.extend_from_slice(line.as_bytes());
            log.push(b'\n');
        }
        if log_every > 0 && t % log_every == 0 {
            eprintln!("iter {t:6} view {view:3} loss {:.6} (vis {:.6})", loss.total, loss.visibility);
        }
    };
    let outcome = train(scene, &dataset.targets(), &cfg, &mut sink)?;
    write_atomic(&a.out.join("losses.jsonl"), &log)?;
    checkpoint::save(&a.out.join(CHECKPOINT_FILE), &outcome.scene)?;
    eprintln!("wrote {}", a.out.join(CHECKPOINT_FILE).display());
    Ok(Outcome::Success)
}

fn cmd_render(a: RenderArgs) -> Result<Outcome> {
    let scene = checkpoint::load(&a.checkpoint)?;
    let camera = camera_json::read(&a.camera)?;
    let settings = RenderSettings {
        sh_degree: a.sh_degree,
        depth_mode: a.depth_mode,
        parallel: true,
    };
    let out = render(&materialize_scene(&scene), &camera, &settings)?;
    ppm::write(&a.out_color, &out.color)?;
    pfm::write(&a.out_depth, &out.depth)?;
    let echo = serde_json::json!({
        "checkpoint": a.checkpoint,
        "camera": a.camera,
        "out_color": a.out_color,
        "out_depth": a.out_depth,
        "render": settings,
    });
    write_json(&out_dir_of(&a.out_color).join("render_config.json"), &echo)?;
    Ok(Outcome::Success)
}

fn cmd_eval(a: EvalArgs) -> Result<Outcome> {
    let scene = checkpoint::load(&a.checkpoint)?;
    let dataset = Dataset::load(&a.data)?;
    let settings = RenderSettings::default();
    let echo = serde_json::json!({
        "checkpoint": a.checkpoint,
        "data": a.data,
        "patch": a.patch,
        "render": settings,
        "min_pdc": a.min_pdc,
        "min_psnr": a.min_psnr,
    });
    let report = eval::evaluate(&scene, &dataset, &settings, a.patch, echo)?;
    write_json(&a.out, &report)?;
    if let Some(dir) = &a.overlay {
        for (view, sv) in report.views.iter().zip(&scene.views) {
            if let Some(grid) = &view.per_patch {
                let base = sv.params.geometry_depth(&sv.camera);
                let img = pdc_overlay(grid, &base, a.patch)?;
                ppm::write(&dir.join(format!("pdc_{}.ppm", view.name)), &img)?;
            }
        }
    }
    println!(
        "psnr {:.3} dB  ssim {:.4}  pdc {}",
        report.psnr,
        report.ssim,
        report.pdc.map_or("n/a".into(), |p| format!("{p:.4}"))
    );
    let pdc_ok = a.min_pdc.is_none_or(|m| report.pdc.is_some_and(|p| p >= m));
    let psnr_ok = a.min_psnr.is_none_or(|m| report.psnr >= m);
    Ok(if pdc_ok && psnr_ok { Outcome::Success } else { Outcome::CheckFailed })
}

fn cmd_gradcheck(a: GradcheckArgs) -> Result<Outcome> {
    let cfg = GradcheckConfig {
        tolerance: a.tol,
        ..Default::default()
    };
    let mut reports = Vec::new();
    let mut pass = true;
    for seed in a.seed..a.seed + a.seeds.max(1) {
        let problem = random_problem(seed, a.size, a.gaussians)?;
        let report = check_gradients(&problem, &cfg)?;
        println!(
            "seed {seed}: {} parameters, max relative error {:.3e} -> {}",
            report.checked,
            report.max_rel_error,
            if report.pass { "ok" } else { "FAIL" }
        );
        pass &= report.pass;
        reports.push(serde_json::json!({ "seed": seed, "report": report }));
    }
    if let Some(out) = &a.out {
        write_json(out, &serde_json::json!({ "args": a, "config": cfg, "seeds": reports }))?;
    }
    Ok(if pass { Outcome::Success } else { Outcome::CheckFailed })
}

fn cmd_align(a: AlignArgs) -> Result<Outcome> {
    let scene = checkpoint::load(&a.checkpoint)?;
    let image = ppm::read(&a.image)?;
    let init = camera_json::read(&a.init_camera)?;
    let cfg = AlignConfig {
        iterations: a.iters,
        ..Default::default()
    };
    let result = align_test_view(&scene, &image, &init, &cfg)?;
    eprintln!(
        "best loss {:.6} at iteration {} (initial {:.6})",
        result.best_loss,
        result.best_iteration,
        result.history.first().copied().unwrap_or(f64::NAN)
    );
    let bytes = camera_json::encode(&result.camera)?;
    match &a.out {
        Some(out) => {
            write_atomic(out, &bytes)?;
            let echo = serde_json::json!({
                "checkpoint": a.checkpoint,
                "image": a.image,
                "init_camera": a.init_camera,
                "align": cfg,
            });
            write_json(&out_dir_of(out).join("align_config.json"), &echo)?;
        }
        None => {
            std::io::stdout()
                .write_all(&bytes)
                .map_err(|e| Error::io("<stdout>", e))?;
            println!();
        }
    }
    Ok(Outcome::Success)
}

/// Parse `args` (including the program name) and run the command, returning
/// the process exit code.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Render(a) => cmd_render(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Align(a) => cmd_align(a),
    };
    match result {
        Ok(Outcome::Success) => 0,
        Ok(Outcome::CheckFailed) => 2,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
