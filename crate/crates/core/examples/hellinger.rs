//! How far served answers are from the truth, for adaptive misinformation
//! and prediction poisoning at the same benign accuracy.

use amlab::cli::matched_hellinger;
use amlab::experiment::{ExperimentConfig, SeedRun};

fn main() -> amlab::Result<()> {
    let cfg = ExperimentConfig::default();
    let run = SeedRun::prepare(&cfg, cfg.rng_seed)?;
    for series in matched_hellinger(&cfg, &run)? {
        let q = |f: f64| series.values[((series.values.len() - 1) as f64 * f) as usize];
        println!("{:3}  p10 {:.3}  median {:.3}  p90 {:.3}", series.label, q(0.1), series.median(), q(0.9));
    }
    Ok(())
}
