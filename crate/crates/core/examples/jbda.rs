//! Jacobian-based dataset augmentation: the harvested set doubles every
//! round, and a query cap stops the attack early.

use amlab::attacks::{AttackConfig, AttackKind};
use amlab::defense::DefenseConfig;
use amlab::experiment::{ExperimentConfig, SeedRun};

fn main() -> amlab::Result<()> {
    let cfg = ExperimentConfig::default();
    let run = SeedRun::prepare(&cfg, cfg.rng_seed)?;
    let attack = AttackConfig { kind: AttackKind::Jbda, ..cfg.attack.clone() };

    for (name, d) in [("none", DefenseConfig::none()), ("am tau=0.7", DefenseConfig::am(0.7))] {
        let victim = run.defended(&d)?;
        let out = run.attack(&cfg, &victim, &attack)?;
        println!(
            "{name:11} harvested {} points with {} queries, clone accuracy {:.3}",
            out.harvest.len(),
            victim.queries_served(),
            out.clone_accuracy
        );
    }

    let capped = AttackConfig { query_cap: Some(100), ..attack };
    let out = run.attack(&cfg, &run.defended(&DefenseConfig::none())?, &capped)?;
    println!("capped at 100 queries: halted = {}, harvested {}", out.halted, out.harvest.len());
    Ok(())
}
