//! Acceptance report: one PASS/FAIL line per criterion.
//!
//! Runs without the libtest harness so each line prints as soon as its
//! criterion finishes. A red criterion is reported, not hidden: the process
//! exits 0 so the rest of the suite still runs, unless
//! `DOFSPLAT_ACCEPTANCE_STRICT=1` is set, in which case any FAIL exits 1.
//! Errors and panics inside a criterion always count as FAIL.
//!
//! The ablation criteria train nine 2,000-iteration configurations and
//! dominate the runtime (tens of minutes on one core).

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::Instant;

use dofsplat::geometry::{frustum_contains, project, so3_exp, unproject, Camera, PixelCoord, Pose};
use dofsplat::gradcheck::{check_gradients, random_problem, GradcheckConfig};
use dofsplat::harness::eval::evaluate;
use dofsplat::harness::synth::{synthesize, SceneKind, SynthSpec};
use dofsplat::harness::{camera_json, checkpoint, pfm, ppm};
use dofsplat::image::{RgbImage, ScalarMap};
use dofsplat::losses::{render_resolution_at, sh_degree_at, vis_weight};
use dofsplat::metrics::{pdc, psnr};
use dofsplat::rasterizer::RenderSettings;
use dofsplat::scenarios::{ablation_config, ablation_dataset, run_alignment, run_conflict, train_and_score, Variant, VariantScores};
use dofsplat::scene::{bounded_offset, ParamClass, ViewParameters};
use dofsplat::training::{train, AlignConfig, Quiet, TrainConfig};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Verdict = (bool, String);

fn report(number: usize, name: &str, run: impl FnOnce() -> dofsplat::Result<Verdict>) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(run));
    let secs = start.elapsed().as_secs_f64();
    let (pass, detail) = match outcome {
        Ok(Ok(v)) => v,
        Ok(Err(e)) => (false, format!("error: {e}")),
        Err(_) => (false, "panicked".to_string()),
    };
    println!(
        "criterion {number:>2} {name:<28} {}  {detail} [{secs:.1} s]",
        if pass { "PASS" } else { "FAIL" }
    );
    pass
}

fn gradient_fidelity() -> dofsplat::Result<Verdict> {
    let start = Instant::now();
    let cfg = GradcheckConfig::default();
    let mut worst: f64 = 0.0;
    let mut pass = true;
    let mut classes = std::collections::BTreeSet::new();
    for seed in 0..10 {
        let mut problem = random_problem(seed, 32, 50)?;
        // odd seeds exercise the free-position parameterization on one view
        if seed % 2 == 1 {
            let cam = problem.scene.views[1].camera;
            problem.scene.views[1].params.to_free_positions(&cam);
        }
        for v in &problem.scene.views {
            for class in ParamClass::ALL {
                if v.params.class(class).is_some() {
                    classes.insert(class.name());
                }
            }
        }
        let r = check_gradients(&problem, &cfg)?;
        worst = worst.max(r.max_rel_error);
        pass &= r.pass;
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        pass && worst <= 1e-5 && secs <= 120.0 && classes.len() == ParamClass::ALL.len(),
        format!("max rel err {worst:.2e} over 10 seeds, {} classes, {secs:.0} s", classes.len()),
    ))
}

fn random_camera(rng: &mut ChaCha8Rng) -> Camera {
    let w = Vector3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
    let t = Vector3::new(rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0), rng.random_range(-10.0..10.0));
    let (width, height) = (rng.random_range(16..2000), rng.random_range(16..2000));
    let f = rng.random_range(50.0..3000.0);
    Camera::new(
        f,
        f * rng.random_range(0.8..1.2),
        width as f64 * rng.random_range(0.3..0.7),
        height as f64 * rng.random_range(0.3..0.7),
        width,
        height,
        Pose::new(so3_exp(&w), t).unwrap(),
    )
    .unwrap()
}

fn geometry_round_trip() -> dofsplat::Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let cam = random_camera(&mut rng);
        let p = PixelCoord::new(rng.random_range(0.0..cam.width as f64), rng.random_range(0.0..cam.height as f64));
        let d = rng.random_range(0.05..100.0);
        let (q, dq) = project(&unproject(p, d, &cam)?, &cam)?;
        worst = worst.max((q.u - p.u).abs()).max((q.v - p.v).abs()).max((dq - d).abs() / d.max(1.0));
    }
    let mut violations = 0;
    for k in 0..10_000 {
        let cam = random_camera(&mut rng);
        // a coarse stride keeps the grid small; anchors still span the image
        let mut vp = ViewParameters::zeros(cam.width, cam.height, 37)?;
        let n = rng.random_range(0..vp.len());
        let raw = if k % 2 == 0 {
            // δ drawn from the open square (−0.5, 0.5)²
            let mut open = || loop {
                let d: f64 = rng.random_range(-0.5..0.5);
                if d > -0.5 {
                    return (2.0 * d).atanh();
                }
            };
            [open(), open()]
        } else {
            [rng.random_range(-60.0..60.0), rng.random_range(-60.0..60.0)]
        };
        vp.raw_offset[2 * n] = raw[0];
        vp.raw_offset[2 * n + 1] = raw[1];
        vp.log_depth[n] = rng.random_range(-3.0..5.0);
        if !frustum_contains(vp.cell_pixel(n), &vp.mean(&cam, n), &cam) {
            violations += 1;
        }
    }
    Ok((
        worst <= 1e-9 && violations == 0,
        format!("round-trip max err {worst:.1e}, frustum violations {violations}/10000"),
    ))
}

fn bounded_offset_bound() -> dofsplat::Result<Verdict> {
    let mut max_abs: f64 = 0.0;
    let steps = 800;
    for i in 0..=steps {
        for j in 0..=steps {
            let o = [-100.0 + 200.0 * i as f64 / steps as f64, -100.0 + 200.0 * j as f64 / steps as f64];
            let d = bounded_offset(o);
            max_abs = max_abs.max(d[0].abs()).max(d[1].abs());
        }
    }
    let zero = bounded_offset([0.0, 0.0]);
    Ok((
        max_abs < 0.5 && zero == [0.0, 0.0],
        format!("max |δ| = {max_abs:.12} over 801² grid, δ(0) = {zero:?}"),
    ))
}

/// Pearson correlation straight from its definition, column-major.
fn pearson_oracle(a: &ScalarMap, b: &ScalarMap, x0: usize, y0: usize, n: usize) -> f64 {
    let cells: Vec<(f64, f64)> = (x0..x0 + n)
        .flat_map(|x| (y0..y0 + n).map(move |y| (x, y)))
        .map(|(x, y)| (a.get(x, y), b.get(x, y)))
        .collect();
    let m = cells.len() as f64;
    let ma = cells.iter().map(|c| c.0).sum::<f64>() / m;
    let mb = cells.iter().map(|c| c.1).sum::<f64>() / m;
    let cov: f64 = cells.iter().map(|c| (c.0 - ma) * (c.1 - mb)).sum();
    let va: f64 = cells.iter().map(|c| (c.0 - ma).powi(2)).sum();
    let vb: f64 = cells.iter().map(|c| (c.1 - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn metric_correctness() -> dofsplat::Result<Verdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let random_map = |rng: &mut ChaCha8Rng| {
        ScalarMap::from_vec(32, 32, (0..1024).map(|_| rng.random_range(1.0..5.0)).collect()).unwrap()
    };
    let d = random_map(&mut rng);
    let (identical, _) = pdc(&d, &d, 8)?;

    let mut affine = d.clone();
    for py in 0..4 {
        for px in 0..4 {
            let (a, b) = (rng.random_range(0.2..5.0), rng.random_range(-3.0..3.0));
            for y in py * 8..(py + 1) * 8 {
                for x in px * 8..(px + 1) * 8 {
                    affine.set(x, y, a * d.get(x, y) + b);
                }
            }
        }
    }
    let (invariant, _) = pdc(&affine, &d, 8)?;

    let other = random_map(&mut rng);
    let (mean, grid) = pdc(&other, &d, 8)?;
    let mut oracle_err: f64 = 0.0;
    let mut oracle_mean = 0.0;
    for (j, row) in grid.iter().enumerate() {
        for (i, r) in row.iter().enumerate() {
            let o = pearson_oracle(&other, &d, 8 * i, 8 * j, 8);
            oracle_err = oracle_err.max((o - r).abs());
            oracle_mean += o / 16.0;
        }
    }
    oracle_err = oracle_err.max((oracle_mean - mean).abs());

    let a = RgbImage::filled(16, 16, [0.3, 0.5, 0.7]);
    let b = RgbImage::filled(16, 16, [0.4, 0.6, 0.8]);
    let p = psnr(&a, &b)?;
    let pass = (identical - 1.0).abs() <= 1e-12
        && (invariant - 1.0).abs() <= 1e-12
        && oracle_err <= 1e-12
        && (p - 20.0).abs() <= 1e-9;
    Ok((
        pass,
        format!(
            "pdc(identical) {identical:.15}, affine {invariant:.15}, oracle err {oracle_err:.1e}, psnr {p:.12} dB"
        ),
    ))
}

struct AblationRow {
    seed: u64,
    scores: Vec<(Variant, VariantScores, f64)>,
}

fn run_ablation() -> dofsplat::Result<Vec<AblationRow>> {
    let variants = [Variant::Full, Variant::NoVisLoss, Variant::FreezeOffsets];
    let mut rows = Vec::new();
    for seed in 0..3 {
        let dataset = ablation_dataset(seed)?;
        let mut scores = Vec::new();
        for v in variants {
            let start = Instant::now();
            let s = train_and_score(&dataset, &v.apply(ablation_config(2000)), &mut Quiet)?;
            let secs = start.elapsed().as_secs_f64();
            eprintln!(
                "  ablation seed {seed} {v:?}: rmse {:.5} pdc {:.4} psnr {:.3} ({secs:.0} s)",
                s.depth_rmse, s.pdc, s.test_psnr
            );
            scores.push((v, s, secs));
        }
        rows.push(AblationRow { seed, scores });
    }
    Ok(rows)
}

fn score(row: &AblationRow, v: Variant) -> VariantScores {
    row.scores.iter().find(|s| s.0 == v).expect("variant ran").1
}

fn visibility_trend(rows: &[AblationRow]) -> Verdict {
    let wins = rows
        .iter()
        .filter(|r| {
            let (f, n) = (score(r, Variant::Full), score(r, Variant::NoVisLoss));
            f.depth_rmse < n.depth_rmse && f.pdc > n.pdc
        })
        .count();
    let slowest = rows.iter().flat_map(|r| r.scores.iter().map(|s| s.2)).fold(0.0, f64::max);
    let detail = rows
        .iter()
        .map(|r| {
            let (f, n) = (score(r, Variant::Full), score(r, Variant::NoVisLoss));
            format!(
                "seed {}: rmse {:.4}/{:.4} pdc {:.4}/{:.4}",
                r.seed, f.depth_rmse, n.depth_rmse, f.pdc, n.pdc
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    (
        wins >= 2 && slowest <= 600.0,
        format!("full beats no-vis on {wins}/3 (full/no-vis) {detail}; slowest config {slowest:.0} s"),
    )
}

fn offset_trend(rows: &[AblationRow]) -> Verdict {
    let wins = rows
        .iter()
        .filter(|r| score(r, Variant::Full).test_psnr >= score(r, Variant::FreezeOffsets).test_psnr)
        .count();
    let detail = rows
        .iter()
        .map(|r| {
            format!(
                "seed {}: {:.3}/{:.3} dB",
                r.seed,
                score(r, Variant::Full).test_psnr,
                score(r, Variant::FreezeOffsets).test_psnr
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    (wins >= 2, format!("full ≥ freeze-offsets on {wins}/3 (full/frozen PSNR) {detail}"))
}

fn occlusion_resolution() -> dofsplat::Result<Verdict> {
    let out = run_conflict(0.1, 500, &mut Quiet)?;
    Ok((
        out.reduction() >= 0.5,
        format!(
            "masked mean |D̂−D| {:.5} → {:.5} ({:.1} % drop); shifted view |D−D_true| {:.4} → {:.4}",
            out.initial,
            out.trained,
            100.0 * out.reduction(),
            out.initial_shifted_error,
            out.trained_shifted_error
        ),
    ))
}

fn test_view_alignment() -> dofsplat::Result<Verdict> {
    let cfg = AlignConfig {
        iterations: 500,
        ..Default::default()
    };
    let out = run_alignment(0, 1000, 1.0, 0.01, &cfg)?;
    Ok((
        out.rotation_deg < 0.2 && out.translation_rel < 0.002,
        format!(
            "rotation {:.3}° → {:.4}°, translation {:.3} % → {:.4} %",
            out.initial_rotation_deg,
            out.rotation_deg,
            100.0 * out.initial_translation_rel,
            100.0 * out.translation_rel
        ),
    ))
}

fn schedule_exactness() -> dofsplat::Result<Verdict> {
    let total = 10_000;
    let mut ok = true;
    let mut shown = Vec::new();
    for t in [0usize, 99, 100, 250, 2000, 9999, 10_000] {
        let sh = sh_degree_at(t);
        let vis = vis_weight(t, total, 1.0)?;
        ok &= sh == (t / 100).min(3);
        ok &= vis == 1.0 - t as f64 / total as f64;
        shown.push(format!("t={t}: sh {sh} vis {vis}"));
    }
    for t in [0usize, 1, 1999, 2000, 2001, 9999] {
        let res = render_resolution_at(t, (1600, 1200), 2000, 512);
        let want = if t < 2000 { (512, 384) } else { (1600, 1200) };
        ok &= res == want;
    }
    ok &= render_resolution_at(0, (400, 300), 2000, 512) == (400, 300);
    Ok((ok, shown.join(", ")))
}

fn small_spec(seed: u64) -> SynthSpec {
    SynthSpec {
        kind: SceneKind::SphereOnPlane,
        train_views: 2,
        test_views: 1,
        width: 24,
        height: 24,
        depth_noise: 0.02,
        bump_amplitude: 0.05,
        seed,
        ..Default::default()
    }
}

fn determinism_and_formats() -> dofsplat::Result<Verdict> {
    // identical seeds → identical checkpoints and reports
    let run = || -> dofsplat::Result<(Vec<u8>, Vec<u8>)> {
        let ds = synthesize(&small_spec(9))?;
        let cfg = TrainConfig {
            iterations: 12,
            ..Default::default()
        };
        let scene = train(ds.initial_scene(1)?, &ds.targets(), &cfg, &mut Quiet)?.scene;
        let report = evaluate(&scene, &ds, &RenderSettings::default(), 8, serde_json::to_value(&cfg)?)?;
        Ok((checkpoint::encode(&scene)?, serde_json::to_vec_pretty(&report)?))
    };
    let (a, b) = (run()?, run()?);
    let deterministic = a == b;

    // value-exact round trips
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let depth = ScalarMap::from_vec(13, 7, (0..91).map(|_| rng.random_range(-1e3f32..1e3) as f64).collect())?;
    let pfm_ok = pfm::decode(&pfm::encode(&depth)?)? == depth;
    let bytes: Vec<u8> = (0..3 * 11 * 5).map(|_| rng.random()).collect();
    let ppm_bytes = ppm::encode_bytes(11, 5, &bytes)?;
    let ppm_ok = ppm::encode(&ppm::decode(&ppm_bytes)?) == ppm_bytes;
    let scene = checkpoint::decode(&a.0)?;
    let ckpt_ok = checkpoint::encode(&scene)? == a.0;
    let cam_bytes = camera_json::encode(&scene.views[0].camera)?;
    let cam_ok = camera_json::decode(&cam_bytes)? == scene.views[0].camera;

    // fuzzing: truncations must fail, mutations must never panic
    let pfm_bytes = pfm::encode(&depth)?;
    let samples: [(&str, &[u8]); 4] = [("checkpoint", &a.0), ("pfm", &pfm_bytes), ("ppm", &ppm_bytes), ("camera", &cam_bytes)];
    let decode = |kind: &str, b: &[u8]| -> bool {
        match kind {
            "checkpoint" => checkpoint::decode(b).is_ok(),
            "pfm" => pfm::decode(b).is_ok(),
            "ppm" => ppm::decode(b).is_ok(),
            _ => camera_json::decode(b).is_ok(),
        }
    };
    let (mut cases, mut crashes, mut accepted_truncations) = (0, 0, 0);
    for (kind, original) in samples {
        for k in 0..1500 {
            let mut m = original.to_vec();
            let truncate = k % 3 == 0;
            if truncate {
                m.truncate(rng.random_range(0..m.len()));
            } else {
                for _ in 0..rng.random_range(1..6) {
                    let i = rng.random_range(0..m.len());
                    m[i] = rng.random();
                }
            }
            cases += 1;
            match catch_unwind(AssertUnwindSafe(|| decode(kind, &m))) {
                Err(_) => crashes += 1,
                // a JSON document cut after its closing brace is still complete
                Ok(true) if truncate && kind != "camera" => accepted_truncations += 1,
                Ok(_) => {}
            }
        }
    }
    let pass = deterministic && pfm_ok && ppm_ok && ckpt_ok && cam_ok && crashes == 0 && accepted_truncations == 0;
    Ok((
        pass,
        format!(
            "bitwise checkpoint+report {deterministic}, round-trips pfm {pfm_ok} ppm {ppm_ok} checkpoint {ckpt_ok} camera {cam_ok}, \
             fuzz {cases} cases: {crashes} crashes, {accepted_truncations} truncations accepted"
        ),
    ))
}

fn main() {
    // keep panic messages from criteria out of the report lines
    std::panic::set_hook(Box::new(|info| eprintln!("  panic: {info}")));
    let mut results = Vec::new();
    results.push(report(1, "gradient fidelity", gradient_fidelity));
    results.push(report(2, "geometry round-trip", geometry_round_trip));
    results.push(report(3, "bounded offset", bounded_offset_bound));
    results.push(report(4, "metric correctness", metric_correctness));
    results.push(report(9, "schedule exactness", schedule_exactness));
    results.push(report(10, "determinism & formats", determinism_and_formats));
    results.push(report(7, "occlusion resolution", occlusion_resolution));
    results.push(report(8, "test-view alignment", test_view_alignment));
    eprintln!("  running the ablation suite (3 seeds × 3 variants × 2000 iterations)");
    match catch_unwind(AssertUnwindSafe(run_ablation)) {
        Ok(Ok(rows)) => {
            results.push(report(5, "visibility-loss ablation", || Ok(visibility_trend(&rows))));
            results.push(report(6, "offset ablation", || Ok(offset_trend(&rows))));
        }
        failed => {
            let why = match failed {
                Ok(Err(e)) => e.to_string(),
                _ => "panicked".into(),
            };
            results.push(report(5, "visibility-loss ablation", || Ok((false, why.clone()))));
            results.push(report(6, "offset ablation", || Ok((false, why.clone()))));
        }
    }
    let passed = results.iter().filter(|p| **p).count();
    println!("acceptance: {passed}/{} criteria pass", results.len());
    let strict = std::env::var("DOFSPLAT_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if strict && passed != results.len() {
        std::process::exit(1);
    }
}
