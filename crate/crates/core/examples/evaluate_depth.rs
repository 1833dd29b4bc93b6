//! Score depth before and after refinement with patch-wise depth
//! correlation (PDC) and RMSE, and write a PDC overlay.
//!
//! ```text
//! cargo run --release --example evaluate_depth -- [iterations] [overlay.ppm]
//! ```

use dofsplat::harness::eval::evaluate;
use dofsplat::harness::ppm;
use dofsplat::harness::synth::{synthesize, SynthSpec};
use dofsplat::metrics::pdc_overlay;
use dofsplat::rasterizer::RenderSettings;
use dofsplat::training::{train, Quiet, TrainConfig};

fn main() -> dofsplat::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let iterations = args.first().and_then(|s| s.parse().ok()).unwrap_or(600);
    let overlay = args.get(1).cloned().unwrap_or_else(|| "pdc_overlay.ppm".into());
    let patch = 8;

    let dataset = synthesize(&SynthSpec {
        bump_amplitude: 0.05,
        ..Default::default()
    })?;
    let cfg = TrainConfig {
        iterations,
        ..Default::default()
    };
    let initial = dataset.initial_scene(1)?;
    let settings = RenderSettings::default();
    let before = evaluate(&initial, &dataset, &settings, patch, serde_json::Value::Null)?;
    let refined = train(initial, &dataset.targets(), &cfg, &mut Quiet)?.scene;
    let after = evaluate(&refined, &dataset, &settings, patch, serde_json::to_value(&cfg)?)?;

    for (label, r) in [("input", &before), ("refined", &after)] {
        println!(
            "{label:<8} PDC {:.4}  depth RMSE {:.5}  held-out PSNR {:.2} dB  SSIM {:.4}",
            r.pdc.unwrap_or(f64::NAN),
            r.depth_rmse.unwrap_or(f64::NAN),
            r.psnr,
            r.ssim
        );
    }
    if let Some(grid) = &after.per_patch {
        let depth = refined.views[0].params.geometry_depth(&refined.views[0].camera);
        ppm::write(overlay.as_ref(), &pdc_overlay(grid, &depth, patch)?)?;
        println!("per-patch overlay of view 0 written to {overlay}");
    }
    Ok(())
}
