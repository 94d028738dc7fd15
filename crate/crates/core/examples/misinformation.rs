//! The misinformation model and the reverse sigmoid that decides how much of
//! each answer it supplies.

use amlab::defense::{blend_coefficient, msp, DefenseConfig, DEFAULT_NU};
use amlab::eval::accuracy;
use amlab::experiment::{ExperimentConfig, SeedRun};

fn main() -> amlab::Result<()> {
    let cfg = ExperimentConfig::default();
    let run = SeedRun::prepare(&cfg, cfg.rng_seed)?;
    println!("misinformer accuracy {:.3}", accuracy(run.misinformer.as_ref(), &run.lab.test)?);

    let tau = 0.7;
    println!("\nalpha for tau = {tau}, nu = {DEFAULT_NU}");
    for y_max in [0.5, 0.65, 0.69, 0.7, 0.71, 0.75, 0.9] {
        println!("  y_max {y_max:.2} -> alpha {:.6}", blend_coefficient(y_max, tau, DEFAULT_NU));
    }

    let victim = run.defended(&DefenseConfig::am(tau))?;
    println!("\nserved answers for one benign and one surrogate input");
    for (name, x) in [("benign", &run.lab.test.inputs()[0]), ("surrogate", &run.lab.surrogate.inputs()[0])] {
        let r = victim.respond(x)?;
        let f = run.defender.forward(x)?;
        let show = |p: &[f64]| p.iter().map(|v| format!("{v:.2}")).collect::<Vec<_>>().join(" ");
        println!("  {name:9} msp {:.3} alpha {:.3}", msp(&f), r.alpha);
        println!("    f  : {}", show(&f));
        println!("    y' : {}", show(&r.probs));
    }
    Ok(())
}
