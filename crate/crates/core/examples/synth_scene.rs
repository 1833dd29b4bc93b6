//! Generate a synthetic dataset with exact ground-truth depth and write it
//! in the on-disk layout `train` and `eval` read.
//!
//! ```text
//! cargo run --release --example synth_scene -- [out-dir] [two_planes|sphere_on_plane|box_room]
//! ```

use std::path::PathBuf;

use dofsplat::harness::synth::{synthesize, SceneKind, SynthSpec};

fn main() -> dofsplat::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let out = PathBuf::from(args.first().map_or("synth_out", String::as_str));
    let kind = match args.get(1).map(String::as_str) {
        Some("sphere_on_plane") => SceneKind::SphereOnPlane,
        Some("box_room") => SceneKind::BoxRoom,
        _ => SceneKind::TwoPlanes,
    };
    let spec = SynthSpec {
        kind,
        depth_noise: 0.02,
        bump_amplitude: 0.05,
        seed: 1,
        ..Default::default()
    };
    let dataset = synthesize(&spec)?;
    dataset.write(&out)?;

    for v in &dataset.views {
        let (gt, noisy) = (v.gt_depth.as_ref().unwrap(), v.depth.as_ref().unwrap());
        let rel: f64 = gt
            .data
            .iter()
            .zip(&noisy.data)
            .map(|(g, n)| ((n - g) / g).abs())
            .sum::<f64>()
            / gt.data.len() as f64;
        println!("{:<8} mean relative depth error of the input: {:.2} %", v.name, 100.0 * rel);
    }
    println!(
        "{} training + {} test views written to {}",
        dataset.views.len(),
        dataset.test_views.len(),
        out.display()
    );
    Ok(())
}
