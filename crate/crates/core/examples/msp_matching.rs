//! Reshaping misinformation confidence so that it looks like the defender's
//! confidence on benign inputs. The temperature map is fitted on training
//! inputs and checked on the test set.

use amlab::defense::{msp, msp_overlap, DefenseConfig};
use amlab::experiment::{ExperimentConfig, SeedRun};

fn main() -> amlab::Result<()> {
    let cfg = ExperimentConfig::default();
    let run = SeedRun::prepare(&cfg, cfg.rng_seed)?;
    let benign: Vec<f64> =
        run.lab.test.inputs().iter().map(|x| run.defender.forward(x).map(|p| msp(&p))).collect::<amlab::Result<_>>()?;

    for match_msp in [false, true] {
        // tau = 1 serves misinformation for every query
        let victim = run.defended(&DefenseConfig { match_msp, ..DefenseConfig::am(1.0) })?;
        let served: Vec<f64> = run
            .lab
            .test
            .inputs()
            .iter()
            .map(|x| victim.respond(x).map(|r| msp(&r.probs)))
            .collect::<amlab::Result<_>>()?;
        println!("match_msp {match_msp:5}  overlap with benign MSP {:.3}", msp_overlap(&benign, &served));
    }
    Ok(())
}
