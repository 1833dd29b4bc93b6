//! Refine a scene against its training images, logging the loss terms, and
//! save the result as a checkpoint.
//!
//! ```text
//! cargo run --release --example refine_scene -- [iterations] [checkpoint-path]
//! ```

use std::path::PathBuf;

use dofsplat::harness::checkpoint;
use dofsplat::harness::synth::{synthesize, SynthSpec};
use dofsplat::losses::LossBreakdown;
use dofsplat::training::{train, TrainConfig};

fn main() -> dofsplat::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let iterations = args.first().and_then(|s| s.parse().ok()).unwrap_or(300);
    let path = PathBuf::from(args.get(1).map_or("refined.ckpt", String::as_str));

    let dataset = synthesize(&SynthSpec {
        bump_amplitude: 0.05,
        ..Default::default()
    })?;
    let cfg = TrainConfig {
        iterations,
        ..Default::default()
    };
    let mut log = |t: usize, view: usize, l: &LossBreakdown| {
        if t % 50 == 0 || t + 1 == iterations {
            println!(
                "iter {t:>5} view {view}: total {:.5}  l1 {:.5}  dssim {:.5}  vis {:.5} (weight {:.3})",
                l.total, l.l1, l.dssim, l.visibility, l.vis_weight_used
            );
        }
    };
    let outcome = train(dataset.initial_scene(1)?, &dataset.targets(), &cfg, &mut log)?;
    checkpoint::save(&path, &outcome.scene)?;
    println!("{} Gaussians saved to {}", outcome.scene.gaussian_count(), path.display());
    Ok(())
}
