//! Test-view alignment: refine a scene, perturb a held-out camera by 1°
//! and 1 %, and recover it by optimizing only its extrinsics against the
//! frozen scene.
//!
//! ```text
//! cargo run --release --example align_test_view -- [seed] [iterations] [train-iterations]
//! ```

use dofsplat::scenarios::run_alignment;
use dofsplat::training::AlignConfig;

fn main() -> dofsplat::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let seed = args.first().and_then(|s| s.parse().ok()).unwrap_or(0);
    let iterations = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(500);
    let train_iterations = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let cfg = AlignConfig {
        iterations,
        ..Default::default()
    };
    let out = run_alignment(seed, train_iterations, 1.0, 0.01, &cfg)?;
    println!(
        "rotation {:.4}° → {:.4}°, translation {:.4} % → {:.4} % (best at iteration {})",
        out.initial_rotation_deg,
        out.rotation_deg,
        100.0 * out.initial_translation_rel,
        100.0 * out.translation_rel,
        out.best_iteration
    );
    Ok(())
}
