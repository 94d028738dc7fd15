use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attacks::{AttackConfig, AttackKind, LabelStrategy};
use crate::defense::{DefenseConfig, DefenseKind};
use crate::error::{Error, Result};
use crate::experiment::{ExperimentConfig, SeedRun};

/// The defense parameter a trade-off curve varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Knob {
    Tau,
    AlphaPp,
    DpMagnitude,
}

impl Knob {
    pub fn for_defense(kind: DefenseKind) -> Result<Knob> {
        match kind {
            DefenseKind::Am => Ok(Knob::Tau),
            DefenseKind::Pp => Ok(Knob::AlphaPp),
            DefenseKind::Dp => Ok(Knob::DpMagnitude),
            DefenseKind::None => Err(Error::config("the undefended model has no knob to sweep")),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Knob::Tau => "tau",
            Knob::AlphaPp => "alpha_pp",
            Knob::DpMagnitude => "dp_magnitude",
        }
    }

    /// `base` with this knob set to `value` and the matching defense kind.
    pub fn apply(self, base: &DefenseConfig, value: f64) -> DefenseConfig {
        match self {
            Knob::Tau => DefenseConfig { kind: DefenseKind::Am, tau: value, ..base.clone() },
            Knob::AlphaPp => DefenseConfig { kind: DefenseKind::Pp, alpha_pp: value, ..base.clone() },
            Knob::DpMagnitude => DefenseConfig { kind: DefenseKind::Dp, dp_magnitude: value, ..base.clone() },
        }
    }
}

/// One (defender accuracy, clone accuracy) pair. `seed` is empty for a mean
/// over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub knob_name: Knob,
    pub knob_value: f64,
    #[serde(rename = "defender_acc")]
    pub defender_accuracy: f64,
    #[serde(rename = "clone_acc")]
    pub clone_accuracy: f64,
    pub attack: AttackKind,
    pub strategy: LabelStrategy,
    pub seed: Option<u64>,
}

#[derive(Debug)]
pub struct SweepOutcome {
    /// Completed points in (knob, seed) order.
    pub points: Vec<TradeoffPoint>,
    /// Indices into `points` whose defender accuracy is below the floor.
    pub below_floor: Vec<usize>,
    /// The first failed cycle, if any; `points` then holds the others.
    pub failure: Option<Error>,
}

/// One train-attack-evaluate cycle.
pub fn evaluate_point(
    run: &SeedRun,
    cfg: &ExperimentConfig,
    knob: Knob,
    value: f64,
    attack: &AttackConfig,
) -> Result<TradeoffPoint> {
    let defense = knob.apply(&cfg.defense, value);
    let victim = run.defended(&defense)?;
    let defender_accuracy = crate::eval::accuracy(&victim, &run.lab.test)?;
    let clone_accuracy = run.attack(cfg, &victim, attack)?.clone_accuracy;
    Ok(TradeoffPoint {
        knob_name: knob,
        knob_value: value,
        defender_accuracy,
        clone_accuracy,
        attack: attack.kind,
        strategy: attack.label_strategy,
        seed: Some(run.lab.seed),
    })
}

/// Evaluates every knob value on every prepared seed. Cycles run in
/// parallel; results keep grid order, so the output does not depend on the
/// thread count.
pub fn sweep(
    runs: &[SeedRun],
    cfg: &ExperimentConfig,
    kind: DefenseKind,
    knob_values: &[f64],
    attack: &AttackConfig,
    accuracy_floor: Option<f64>,
) -> Result<SweepOutcome> {
    let knob = Knob::for_defense(kind)?;
    if knob_values.is_empty() {
        return Err(Error::config(format!("empty {} grid", knob.as_str())));
    }
    if runs.is_empty() {
        return Err(Error::config("a sweep needs at least one seed"));
    }
    for &v in knob_values {
        knob.apply(&cfg.defense, v).validate()?;
    }
    let jobs: Vec<(f64, &SeedRun)> = knob_values.iter().flat_map(|&v| runs.iter().map(move |r| (v, r))).collect();
    let results: Vec<Result<TradeoffPoint>> =
        jobs.par_iter().map(|&(v, run)| evaluate_point(run, cfg, knob, v, attack)).collect();

    let mut points = Vec::with_capacity(results.len());
    let mut failure = None;
    for r in results {
        match r {
            Ok(p) => points.push(p),
            Err(e) if failure.is_none() => failure = Some(e),
            Err(_) => {}
        }
    }
    let below_floor = match accuracy_floor {
        Some(t) => points.iter().enumerate().filter(|(_, p)| p.defender_accuracy < t).map(|(i, _)| i).collect(),
        None => Vec::new(),
    };
    Ok(SweepOutcome { points, below_floor, failure })
}

/// Averages per-seed points that share knob, value, attack and strategy.
/// Groups keep their first appearance order.
pub fn mean_points(points: &[TradeoffPoint]) -> Vec<TradeoffPoint> {
    let mut groups: Vec<(TradeoffPoint, usize)> = Vec::new();
    for p in points {
        let same = |g: &TradeoffPoint| {
            g.knob_name == p.knob_name
                && g.knob_value == p.knob_value
                && g.attack == p.attack
                && g.strategy == p.strategy
        };
        match groups.iter_mut().find(|(g, _)| same(g)) {
            Some((g, n)) => {
                g.defender_accuracy += p.defender_accuracy;
                g.clone_accuracy += p.clone_accuracy;
                *n += 1;
            }
            None => groups.push((TradeoffPoint { seed: None, ..p.clone() }, 1)),
        }
    }
    groups
        .into_iter()
        .map(|(mut g, n)| {
            g.defender_accuracy /= n as f64;
            g.clone_accuracy /= n as f64;
            g
        })
        .collect()
}

/// Half-width of the matched-accuracy window: 0.5 accuracy points.
pub const MATCH_TOLERANCE: f64 = 0.005;

/// Bisects a knob in `[lo, hi]` until `accuracy_at(knob)` is within
/// [`MATCH_TOLERANCE`] of `target`. Assumes accuracy does not increase with
/// the knob. Returns the knob and its accuracy, or `None` if no probe landed
/// inside the window.
pub fn match_accuracy(
    target: f64,
    lo: f64,
    hi: f64,
    mut accuracy_at: impl FnMut(f64) -> Result<f64>,
) -> Result<Option<(f64, f64)>> {
    let (mut lo, mut hi) = (lo, hi);
    for _ in 0..50 {
        let mid = 0.5 * (lo + hi);
        let acc = accuracy_at(mid)?;
        if (acc - target).abs() <= MATCH_TOLERANCE {
            return Ok(Some((mid, acc)));
        }
        if acc > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(None)
}

/// Mean defended accuracy over seeds at one knob setting.
pub fn mean_defender_accuracy(runs: &[SeedRun], defense: &DefenseConfig) -> Result<f64> {
    let accs = runs.par_iter().map(|r| r.defender_accuracy(defense)).collect::<Result<Vec<_>>>()?;
    Ok(accs.iter().sum::<f64>() / accs.len() as f64)
}
