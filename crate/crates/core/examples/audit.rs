//! Per-user auditing: a benign user and a KnockoffNets attacker share one
//! defended model; the attacker's queries are flagged far more often. The
//! audit log goes to the path given as the first argument (default
//! `audit.csv`).

use amlab::attacks::knockoff_harvest;
use amlab::defense::{DefenseConfig, PredictionApi};
use amlab::experiment::{ExperimentConfig, SeedRun};

fn main() -> amlab::Result<()> {
    let path = std::env::args().nth(1).unwrap_or_else(|| "audit.csv".into());
    let cfg = ExperimentConfig::default();
    let run = SeedRun::prepare(&cfg, cfg.rng_seed)?;
    let mut victim = run.defended(&DefenseConfig::am(0.7))?;
    victim.enable_audit_log();

    const BENIGN: u64 = 7;
    const ATTACKER: u64 = 13;
    for x in run.lab.test.inputs() {
        victim.query(BENIGN, x)?;
    }
    knockoff_harvest(&victim, ATTACKER, &run.lab.surrogate, &cfg.attack)?;

    for (name, user) in [("benign", BENIGN), ("attacker", ATTACKER)] {
        println!("{name:8} {:4} queries, {:.1}% flagged", victim.user_queries(user), 100.0 * victim.audit_user(user)?);
    }
    let rows = victim.append_audit_csv(std::path::Path::new(&path))?;
    println!("appended {rows} rows to {path}");
    Ok(())
}
