//! The `amlab` command line. Each subcommand writes into the run directory
//! `<out>/<config hash>/`, so runs with different configs never mix.
//!
//! Exit codes: 0 success, 2 configuration error, 3 missing artifact,
//! 4 runtime failure.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use crate::attacks::AttackKind;
use crate::data::save_dataset;
use crate::defense::{msp, DefenseConfig, DefenseKind};
use crate::error::{Error, Result};
use crate::eval::{
    accuracy, emit_report, hellinger_cdf, match_accuracy, mean_points, msp_cdf, parse_tradeoff_csv, sweep,
    tradeoff_svg, CdfSeries, TradeoffPoint,
};
use crate::experiment::{calibrate_tau, ExperimentConfig, Lab, SeedRun, ATTACKER};
use crate::nncore::{load_model, save_model, Classifier};

/// Overrides the sweep thread count.
pub const THREADS_ENV: &str = "AMLAB_THREADS";

pub const DEFENDER_FILE: &str = "defender.amm";
pub const MISINFORMER_FILE: &str = "misinformer.amm";
pub const CLONE_FILE: &str = "clone.amm";
pub const HARVEST_FILE: &str = "harvest.amd";
pub const AUDIT_FILE: &str = "audit.csv";
pub const MANIFEST_FILE: &str = "datasets.json";

#[derive(Debug, Parser)]
#[command(name = "amlab", version, about = "Model-stealing attacks and defenses at desk scale")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Overrides the config's rng_seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config's out_dir.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the defender with outlier exposure and save it.
    TrainDefender(Common),
    /// Train the misinformation model with reverse cross-entropy and save it.
    TrainMisinformer(Common),
    /// Attack the saved defender behind the configured defense.
    Attack(Common),
    /// Sweep every configured defense and attack; write trade-off reports.
    Sweep(Common),
    /// Redraw charts and summarize the trade-off CSVs of a run.
    Report(Common),
    /// Print the effective config as TOML.
    PrintConfig(Common),
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config(_) => 2,
        Error::MissingArtifact(_) => 3,
        _ => 4,
    }
}

pub fn load_config(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.rng_seed = s;
    }
    if let Some(o) = &c.out {
        cfg.out_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Thread count from [`THREADS_ENV`], if set.
pub fn thread_override() -> Result<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::config(format!("{THREADS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(None),
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::PrintConfig(c) => {
            print!("{}", load_config(&c)?.to_toml());
            Ok(())
        }
        Command::TrainDefender(c) => train_defender(&load_config(&c)?),
        Command::TrainMisinformer(c) => train_misinformer(&load_config(&c)?),
        Command::Attack(c) => attack(&load_config(&c)?),
        Command::Sweep(c) => {
            let cfg = load_config(&c)?;
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(thread_override()?.unwrap_or(0))
                .build()
                .map_err(|e| Error::Diverged(format!("thread pool: {e}")))?;
            pool.install(|| run_sweep(&cfg))
        }
        Command::Report(c) => report(&load_config(&c)?),
    }
}

fn run_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = cfg.run_dir();
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("config.toml"), cfg.to_toml())?;
    Ok(dir)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Diverged(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        s / n as f64
    }
}

fn mean_msp(model: &Classifier, inputs: &[crate::nncore::Tensor]) -> Result<f64> {
    let v = inputs.iter().map(|x| model.forward(x).map(|p| msp(&p))).collect::<Result<Vec<_>>>()?;
    Ok(mean(v.into_iter()))
}

#[derive(Serialize)]
struct DefenderMetrics {
    test_accuracy: f64,
    mean_msp_test: f64,
    mean_msp_outliers: Option<f64>,
    mean_msp_surrogate: f64,
}

fn train_defender(cfg: &ExperimentConfig) -> Result<()> {
    let dir = run_dir(cfg)?;
    let lab = Lab::build(cfg, cfg.rng_seed)?;
    write_json(&dir.join(MANIFEST_FILE), &lab.manifest())?;
    let model = lab.train_defender(cfg)?;
    save_model(&model, &dir.join(DEFENDER_FILE))?;
    let m = DefenderMetrics {
        test_accuracy: accuracy(&model, &lab.test)?,
        mean_msp_test: mean_msp(&model, lab.test.inputs())?,
        mean_msp_outliers: lab.outliers.as_ref().map(|o| mean_msp(&model, o.inputs())).transpose()?,
        mean_msp_surrogate: mean_msp(&model, lab.surrogate.inputs())?,
    };
    write_json(&dir.join("defender.json"), &m)?;
    println!("defender saved to {}", dir.join(DEFENDER_FILE).display());
    println!("test accuracy      {:.4}", m.test_accuracy);
    println!("mean MSP test      {:.4}", m.mean_msp_test);
    if let Some(o) = m.mean_msp_outliers {
        println!("mean MSP outliers  {o:.4}");
    }
    println!("mean MSP surrogate {:.4}", m.mean_msp_surrogate);
    Ok(())
}

fn train_misinformer(cfg: &ExperimentConfig) -> Result<()> {
    let dir = run_dir(cfg)?;
    let lab = Lab::build(cfg, cfg.rng_seed)?;
    if lab.train.is_empty() {
        return Err(Error::config("the defender's training data is empty"));
    }
    let model = lab.train_misinformer(cfg)?;
    save_model(&model, &dir.join(MISINFORMER_FILE))?;
    let acc = accuracy(&model, &lab.test)?;
    write_json(&dir.join("misinformer.json"), &serde_json::json!({ "test_accuracy": acc }))?;
    println!("misinformation model saved to {}", dir.join(MISINFORMER_FILE).display());
    println!("test accuracy {acc:.4}");
    Ok(())
}

#[derive(Serialize)]
struct AttackMetrics {
    attack: AttackKind,
    defense: DefenseKind,
    defender_accuracy: f64,
    clone_accuracy: f64,
    queries: u64,
    flagged_fraction: f64,
    halted: bool,
}

fn attack(cfg: &ExperimentConfig) -> Result<()> {
    let dir = cfg.run_dir();
    let defender = load_model(&dir.join(DEFENDER_FILE))?;
    let misinformer = match cfg.defense.kind {
        DefenseKind::Am => Some(load_model(&dir.join(MISINFORMER_FILE))?),
        _ => None,
    };
    let lab = Lab::build(cfg, cfg.rng_seed)?;
    // Without a misinformation model the slot holds the defender; only AM reads it.
    let misinformer = misinformer.unwrap_or_else(|| defender.clone());
    let run = SeedRun { lab, defender: defender.into(), misinformer: misinformer.into() };
    let mut victim = run.defended(&cfg.defense)?;
    victim.enable_audit_log();
    let out = run.attack(cfg, &victim, &cfg.attack)?;

    save_model(&out.clone, &dir.join(CLONE_FILE))?;
    save_dataset(&out.harvest.to_file(run.lab.num_classes())?, &dir.join(HARVEST_FILE))?;
    let audit = dir.join(AUDIT_FILE);
    if audit.exists() {
        fs::remove_file(&audit)?;
    }
    victim.append_audit_csv(&audit)?;
    let m = AttackMetrics {
        attack: cfg.attack.kind,
        defense: cfg.defense.kind,
        defender_accuracy: accuracy(&victim, &run.lab.test)?,
        clone_accuracy: out.clone_accuracy,
        queries: victim.user_queries(ATTACKER),
        flagged_fraction: victim.audit_user(ATTACKER)?,
        halted: out.halted,
    };
    write_json(&dir.join("attack.json"), &m)?;
    println!("{} attack against {} defense", m.attack.as_str(), m.defense.as_str());
    println!("defender accuracy {:.4}", m.defender_accuracy);
    println!("clone accuracy    {:.4}", m.clone_accuracy);
    println!("queries           {}", m.queries);
    println!("flagged fraction  {:.4}", m.flagged_fraction);
    if m.halted {
        println!("query cap reached; partial harvest");
    }
    Ok(())
}

fn tradeoff_name(kind: DefenseKind, attack: AttackKind) -> String {
    format!("tradeoff_{}_{}", kind.as_str(), attack.as_str())
}

fn run_sweep(cfg: &ExperimentConfig) -> Result<()> {
    let dir = run_dir(cfg)?;
    let runs: Vec<SeedRun> =
        (0..cfg.sweep.num_seeds).into_par_iter().map(|i| SeedRun::prepare(cfg, cfg.seed(i))).collect::<Result<_>>()?;
    let manifests: Vec<_> = runs.iter().map(|r| r.lab.manifest()).collect();
    write_json(&dir.join(MANIFEST_FILE), &manifests)?;

    let mut failure = None;
    'outer: for &kind in &cfg.sweep.defenses {
        for &attack_kind in &cfg.sweep.attacks {
            let attack = crate::attacks::AttackConfig { kind: attack_kind, ..cfg.attack.clone() };
            let out = sweep(&runs, cfg, kind, cfg.sweep.knobs(kind), &attack, cfg.sweep.accuracy_floor)?;
            let name = tradeoff_name(kind, attack_kind);
            if !out.points.is_empty() {
                let mut all = out.points.clone();
                all.extend(mean_points(&out.points));
                emit_report(&name, &all, &[], &dir)?;
            }
            for &i in &out.below_floor {
                let p = &out.points[i];
                println!(
                    "below floor: {} {}={} seed {:?} defender accuracy {:.4}",
                    name,
                    p.knob_name.as_str(),
                    p.knob_value,
                    p.seed,
                    p.defender_accuracy
                );
            }
            for p in mean_points(&out.points) {
                println!(
                    "{name} {}={:<5} defender {:.4} clone {:.4}",
                    p.knob_name.as_str(),
                    p.knob_value,
                    p.defender_accuracy,
                    p.clone_accuracy
                );
            }
            if let Some(e) = out.failure {
                failure = Some(e);
                break 'outer;
            }
        }
    }

    // Query-distribution and correlation views on the first seed.
    let first = &runs[0];
    let mut cdfs = vec![
        msp_cdf(&first.defender, &first.lab.test, "benign")?,
        msp_cdf(&first.defender, &first.lab.surrogate, "surrogate")?,
    ];
    if let Some(o) = &first.lab.outliers {
        cdfs.push(msp_cdf(&first.defender, o, "outliers")?);
    }
    emit_report("msp", &[], &cdfs, &dir)?;
    emit_report("hellinger", &[], &matched_hellinger(cfg, first)?, &dir)?;

    match failure {
        Some(e) => Err(e),
        None => {
            println!("reports written to {}", dir.display());
            Ok(())
        }
    }
}

/// Hellinger CDFs of AM (tau calibrated for at most a 1-point accuracy drop)
/// and of PP matched to the same defender accuracy, over surrogate queries.
pub fn matched_hellinger(cfg: &ExperimentConfig, run: &SeedRun) -> Result<Vec<CdfSeries>> {
    let tau = calibrate_tau(run, &cfg.defense, 0.01)?;
    let am = DefenseConfig { kind: DefenseKind::Am, tau, ..cfg.defense.clone() };
    let target = run.defender_accuracy(&am)?;
    let mut out = vec![hellinger_cdf(&run.defended(&am)?, &run.defender, &run.lab.surrogate, "am")?];
    if let Some((alpha, _)) = match_accuracy(target, 0.0, 1.0, |a| run.defender_accuracy(&DefenseConfig::pp(a)))? {
        out.push(hellinger_cdf(&run.defended(&DefenseConfig::pp(alpha))?, &run.defender, &run.lab.surrogate, "pp")?);
    }
    Ok(out)
}

fn report(cfg: &ExperimentConfig) -> Result<()> {
    let dir = cfg.run_dir();
    if !dir.is_dir() {
        return Err(Error::MissingArtifact(dir));
    }
    let mut names: Vec<PathBuf> = fs::read_dir(&dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let n = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            n.starts_with("tradeoff_") && n.ends_with(".csv")
        })
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(Error::MissingArtifact(dir.join("tradeoff_*.csv")));
    }
    for path in names {
        let points: Vec<TradeoffPoint> = parse_tradeoff_csv(&fs::read(&path)?)?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("tradeoff").to_string();
        fs::write(path.with_extension("svg"), tradeoff_svg(&stem, &points))?;
        println!("{stem}");
        for p in points.iter().filter(|p| p.seed.is_none()) {
            println!(
                "  {}={:<5} defender {:.4} clone {:.4}",
                p.knob_name.as_str(),
                p.knob_value,
                p.defender_accuracy,
                p.clone_accuracy
            );
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_by_class() {
        assert_eq!(exit_code(&Error::config("x")), 2);
        assert_eq!(exit_code(&Error::MissingArtifact("m".into())), 3);
        assert_eq!(exit_code(&Error::Diverged("nan".into())), 4);
        assert_eq!(exit_code(&Error::Io(std::io::Error::other("disk"))), 4);
    }

    #[test]
    fn overrides_apply() {
        let c = Common { config: None, seed: Some(9), out: Some("o".into()) };
        let cfg = load_config(&c).unwrap();
        assert_eq!((cfg.rng_seed, cfg.out_dir.as_path()), (9, Path::new("o")));
    }
}
