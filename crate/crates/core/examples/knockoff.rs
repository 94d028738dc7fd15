//! KnockoffNets against every defense, with soft-label and argmax-label
//! clones.

use amlab::attacks::{AttackConfig, LabelStrategy};
use amlab::defense::DefenseConfig;
use amlab::experiment::{ExperimentConfig, SeedRun};

fn main() -> amlab::Result<()> {
    let cfg = ExperimentConfig::default();
    let run = SeedRun::prepare(&cfg, cfg.rng_seed)?;
    let defenses = [
        ("none", DefenseConfig::none()),
        ("am tau=0.7", DefenseConfig::am(0.7)),
        ("pp alpha=0.4", DefenseConfig::pp(0.4)),
        ("dp magnitude=1", DefenseConfig::dp(1.0)),
    ];
    println!("{:16} {:>9} {:>11} {:>13}", "defense", "defender", "clone soft", "clone argmax");
    for (name, d) in defenses {
        let victim = run.defended(&d)?;
        let defender = amlab::eval::accuracy(&victim, &run.lab.test)?;
        let mut clones = Vec::new();
        for strategy in [LabelStrategy::Soft, LabelStrategy::Argmax] {
            let attack = AttackConfig { label_strategy: strategy, ..cfg.attack.clone() };
            clones.push(run.attack(&cfg, &victim, &attack)?.clone_accuracy);
        }
        println!("{name:16} {defender:9.3} {:11.3} {:13.3}", clones[0], clones[1]);
    }
    Ok(())
}
