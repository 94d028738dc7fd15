//! Defender accuracy against clone accuracy for adaptive misinformation and
//! prediction poisoning, averaged over three seeds. Writes CSV and SVG files
//! to the directory given as the first argument (default `tradeoff-report`).

use amlab::defense::DefenseKind;
use amlab::eval::{emit_report, mean_points, sweep};
use amlab::experiment::{ExperimentConfig, SeedRun};

fn main() -> amlab::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "tradeoff-report".into());
    let cfg = ExperimentConfig::default();
    let runs =
        (0..cfg.sweep.num_seeds).map(|i| SeedRun::prepare(&cfg, cfg.seed(i))).collect::<amlab::Result<Vec<_>>>()?;

    let mut all = Vec::new();
    for kind in [DefenseKind::Am, DefenseKind::Pp] {
        let result = sweep(&runs, &cfg, kind, cfg.sweep.knobs(kind), &cfg.attack, Some(0.95))?;
        if let Some(e) = result.failure {
            return Err(e);
        }
        for p in mean_points(&result.points) {
            println!(
                "{:8} {:5}  defender {:.3}  clone {:.3}",
                p.knob_name.as_str(),
                p.knob_value,
                p.defender_accuracy,
                p.clone_accuracy
            );
            all.push(p);
        }
        println!("{} points below the 0.95 floor", result.below_floor.len());
    }
    for path in emit_report("tradeoff", &all, &[], std::path::Path::new(&out))? {
        println!("wrote {}", path.display());
    }
    Ok(())
}
