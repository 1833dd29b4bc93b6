//! Render color, depth and alpha from a scene initialized straight from the
//! input depth maps, through a held-out camera.
//!
//! ```text
//! cargo run --release --example render_view -- [out-dir]
//! ```

use std::path::PathBuf;

use dofsplat::harness::synth::{synthesize, SynthSpec};
use dofsplat::harness::{pfm, ppm};
use dofsplat::metrics::psnr;
use dofsplat::rasterizer::{render, RenderSettings};
use dofsplat::scene::materialize_scene;

fn main() -> dofsplat::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "render_out".into()));
    let dataset = synthesize(&SynthSpec::default())?;
    let scene = dataset.initial_scene(1)?;
    let gaussians = materialize_scene(&scene);
    println!("{} Gaussians from {} views", gaussians.len(), scene.views.len());

    let held_out = &dataset.test_views[0];
    let r = render(&gaussians, &held_out.camera, &RenderSettings::default())?;
    ppm::write(&out.join("color.ppm"), &r.color)?;
    pfm::write(&out.join("depth.pfm"), &r.depth)?;
    pfm::write(&out.join("alpha.pfm"), &r.alpha)?;

    let covered = r.alpha.data.iter().filter(|&&a| a > 0.5).count();
    println!(
        "untrained render of {}: PSNR {:.2} dB, {:.0} % of pixels with alpha > 0.5",
        held_out.name,
        psnr(&r.color, &held_out.image)?,
        100.0 * covered as f64 / r.alpha.data.len() as f64
    );
    Ok(())
}
