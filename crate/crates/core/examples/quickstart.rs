//! Train a defender and its misinformation model, then steal it with
//! KnockoffNets twice: once undefended, once behind adaptive misinformation.

use amlab::defense::DefenseConfig;
use amlab::eval::accuracy;
use amlab::experiment::{calibrate_tau, ExperimentConfig, SeedRun};

fn main() -> amlab::Result<()> {
    let cfg = ExperimentConfig::default();
    let run = SeedRun::prepare(&cfg, cfg.rng_seed)?;
    println!("defender accuracy      {:.3}", accuracy(run.defender.as_ref(), &run.lab.test)?);
    println!("misinformer accuracy   {:.3}", accuracy(run.misinformer.as_ref(), &run.lab.test)?);

    let undefended = run.defended(&DefenseConfig::none())?;
    let stolen = run.attack(&cfg, &undefended, &cfg.attack)?;
    println!("clone, undefended      {:.3}", stolen.clone_accuracy);

    // The largest threshold that costs benign users at most one point.
    let tau = calibrate_tau(&run, &cfg.defense, 0.01)?;
    let am = DefenseConfig::am(tau);
    let victim = run.defended(&am)?;
    let stolen = run.attack(&cfg, &victim, &cfg.attack)?;
    println!("tau                    {tau:.3}");
    println!("defender accuracy (AM) {:.3}", accuracy(&victim, &run.lab.test)?);
    println!("clone, AM              {:.3}", stolen.clone_accuracy);
    Ok(())
}
