//! Ablation suite: train the full method and its ablated variants on the
//! same noisy synthetic dataset and compare depth and image quality.
//!
//! ```text
//! cargo run --release --example ablation -- [iterations] [seeds] [variants...]
//! ```

use std::time::Instant;

use dofsplat::scenarios::{ablation_config, ablation_dataset, initial_scores, train_and_score, Variant};
use dofsplat::Quiet;

fn main() -> dofsplat::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let iterations = args.first().and_then(|s| s.parse().ok()).unwrap_or(2000);
    let seeds: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let variants: Vec<Variant> = if args.len() > 2 {
        args[2..]
            .iter()
            .map(|s| serde_json::from_value(serde_json::Value::String(s.clone())).expect("variant name"))
            .collect()
    } else {
        vec![Variant::Full, Variant::NoVisLoss, Variant::FreezeOffsets]
    };
    println!("{:>4} {:>15} {:>10} {:>8} {:>9} {:>8} {:>7}", "seed", "variant", "rmse", "pdc", "psnr", "r-pdc", "secs");
    for seed in 0..seeds {
        let dataset = ablation_dataset(seed)?;
        let init = initial_scores(&dataset, 1)?;
        println!(
            "{seed:>4} {:>15} {:>10.6} {:>8.4} {:>9.3} {:>8.4} {:>7}",
            "initial", init.depth_rmse, init.pdc, init.test_psnr, init.rendered_pdc, "-"
        );
        for v in &variants {
            let start = Instant::now();
            let cfg = v.apply(ablation_config(iterations));
            let s = train_and_score(&dataset, &cfg, &mut Quiet)?;
            println!(
                "{seed:>4} {:>15} {:>10.6} {:>8.4} {:>9.3} {:>8.4} {:>7.1}",
                serde_json::to_value(v)?.as_str().unwrap_or("?"),
                s.depth_rmse,
                s.pdc,
                s.test_psnr,
                s.rendered_pdc,
                start.elapsed().as_secs_f64()
            );
        }
    }
    Ok(())
}
