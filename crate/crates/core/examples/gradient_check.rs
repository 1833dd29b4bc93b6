//! Compare the analytic gradient of the full loss with central finite
//! differences on small random scenes.
//!
//! ```text
//! cargo run --release --example gradient_check -- [seeds] [size] [gaussians]
//! ```

use dofsplat::gradcheck::{check_gradients, random_problem, GradcheckConfig};

fn main() -> dofsplat::Result<()> {
    let args: Vec<u64> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let seeds = args.first().copied().unwrap_or(3);
    let size = args.get(1).copied().unwrap_or(24) as usize;
    let gaussians = args.get(2).copied().unwrap_or(40) as usize;

    let cfg = GradcheckConfig::default();
    let mut all_pass = true;
    for seed in 0..seeds {
        let problem = random_problem(seed, size, gaussians)?;
        let r = check_gradients(&problem, &cfg)?;
        all_pass &= r.pass;
        print!("seed {seed}: {} parameters, max relative error {:.2e}", r.checked, r.max_rel_error);
        match &r.worst {
            Some(w) => println!(" (worst: view {} {}[{}])", w.view, w.class, w.index),
            None => println!(),
        }
    }
    println!("{}", if all_pass { "all within tolerance" } else { "FAILED" });
    Ok(())
}
