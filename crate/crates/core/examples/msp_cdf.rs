//! The detector's view: cumulative distributions of the defender's maximum
//! softmax probability on benign queries, attacker queries and outliers.

use amlab::eval::{ks_statistic, msp_cdf};
use amlab::experiment::{ExperimentConfig, SeedRun};

fn main() -> amlab::Result<()> {
    let cfg = ExperimentConfig::default();
    let run = SeedRun::prepare(&cfg, cfg.rng_seed)?;
    let benign = msp_cdf(&run.defender, &run.lab.test, "benign")?;
    let attacker = msp_cdf(&run.defender, &run.lab.surrogate, "surrogate")?;
    println!("{:>6} {:>8} {:>10}", "msp", "benign", "surrogate");
    for i in 1..=10 {
        let x = i as f64 / 10.0;
        println!("{x:6.1} {:8.3} {:10.3}", benign.eval(x), attacker.eval(x));
    }
    println!("KS statistic {:.3}", ks_statistic(&benign.values, &attacker.values));
    println!("medians: benign {:.3}, surrogate {:.3}", benign.median(), attacker.median());
    Ok(())
}
