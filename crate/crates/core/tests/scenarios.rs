//! End-to-end behaviour of the defenses and attacks on the default preset.

use std::sync::OnceLock;

use amlab::attacks::{
    jbda_attack, jbda_synthesize, knockoff_harvest, train_clone, Architecture, AttackConfig, AttackKind,
    HarvestedDataset, LabelStrategy,
};
use amlab::data::LabeledDataset;
use amlab::defense::{msp, msp_overlap, DefenseConfig, DefenseKind, PredictionApi};
use amlab::eval::{accuracy, hellinger, hellinger_cdf, mean_points, sweep};
use amlab::experiment::{ExperimentConfig, SeedRun, ATTACKER};
use amlab::nncore::{cross_entropy, encode_model, one_hot, Classifier, Tensor};

fn cfg() -> ExperimentConfig {
    ExperimentConfig::default()
}

fn runs() -> &'static [SeedRun] {
    static RUNS: OnceLock<Vec<SeedRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        let c = cfg();
        (0..c.sweep.num_seeds).map(|i| SeedRun::prepare(&c, c.seed(i)).unwrap()).collect()
    })
}

fn msps(model: &Classifier, data: &LabeledDataset) -> Vec<f64> {
    data.inputs().iter().map(|x| msp(&model.forward(x).unwrap())).collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Threshold under which 95% of benign test queries are still answered
/// truthfully: the 5th percentile of their MSP.
fn tau_for_95_acceptance(run: &SeedRun) -> f64 {
    let mut m = msps(&run.defender, &run.lab.test);
    m.sort_by(f64::total_cmp);
    m[m.len() * 5 / 100]
}

#[test]
fn preset_models_behave_as_intended() {
    for run in runs() {
        assert!(accuracy(run.defender.as_ref(), &run.lab.test).unwrap() >= 0.99);
        assert!(accuracy(run.misinformer.as_ref(), &run.lab.test).unwrap() <= 0.05);
        let benign = mean(&msps(&run.defender, &run.lab.test));
        let surrogate = mean(&msps(&run.defender, &run.lab.surrogate));
        assert!(benign - surrogate >= 0.15, "benign {benign} surrogate {surrogate}");
    }
}

#[test]
fn wider_surrogate_still_sits_left_of_benign() {
    let mut c = cfg();
    c.task.synthetic.as_mut().unwrap().surrogate_scale = 3.0;
    let run = SeedRun::prepare(&c, 1).unwrap();
    let mut b = msps(&run.defender, &run.lab.test);
    let mut s = msps(&run.defender, &run.lab.surrogate);
    b.sort_by(f64::total_cmp);
    s.sort_by(f64::total_cmp);
    assert!(s[s.len() / 2] < b[b.len() / 2]);
}

#[test]
fn threshold_extremes() {
    for run in runs() {
        let plain = accuracy(run.defender.as_ref(), &run.lab.test).unwrap();
        assert_eq!(run.defender_accuracy(&DefenseConfig::am(0.0)).unwrap(), plain);
        let mis = accuracy(run.misinformer.as_ref(), &run.lab.test).unwrap();
        assert!((run.defender_accuracy(&DefenseConfig::am(1.0)).unwrap() - mis).abs() <= 0.01);
    }
}

#[test]
fn benign_accuracy_never_rises_with_tau() {
    let c = cfg();
    for run in runs() {
        let accs: Vec<f64> =
            c.sweep.tau.iter().map(|&t| run.defender_accuracy(&DefenseConfig::am(t)).unwrap()).collect();
        for w in accs.windows(2) {
            assert!(w[1] <= w[0], "{accs:?}");
        }
    }
}

#[test]
fn hellinger_views() {
    let run = &runs()[0];
    let none = run.defended(&DefenseConfig::none()).unwrap();
    let zero = hellinger_cdf(&none, &run.defender, &run.lab.surrogate, "none").unwrap();
    assert!(zero.values.iter().all(|&v| v == 0.0));

    let all_mis = run.defended(&DefenseConfig::am(1.0)).unwrap();
    let served = hellinger_cdf(&all_mis, &run.defender, &run.lab.surrogate, "am").unwrap();
    let mut direct: Vec<f64> = run
        .lab
        .surrogate
        .inputs()
        .iter()
        .map(|x| hellinger(&run.defender.forward(x).unwrap(), &run.misinformer.forward(x).unwrap()).unwrap())
        .collect();
    direct.sort_by(f64::total_cmp);
    for (a, b) in served.values.iter().zip(&direct) {
        assert!((a - b).abs() < 1e-9);
    }
}

#[test]
fn undefended_harvest_is_the_raw_prediction() {
    let run = &runs()[0];
    let victim = run.defended(&DefenseConfig::none()).unwrap();
    let attack = AttackConfig { query_budget: 100, ..cfg().attack };
    let h = knockoff_harvest(&victim, ATTACKER, &run.lab.surrogate, &attack).unwrap();
    assert_eq!(h.len(), 100);
    assert_eq!(victim.user_queries(ATTACKER), 100);
    for (x, y) in h.inputs.iter().zip(&h.targets) {
        assert_eq!(&run.defender.forward(x).unwrap(), y);
    }
}

#[test]
fn attacker_is_mostly_served_misinformation_and_stands_out_in_the_audit() {
    for run in runs() {
        let tau = tau_for_95_acceptance(run);
        let victim = run.defended(&DefenseConfig::am(tau)).unwrap();
        let benign_user = 77;
        for x in run.lab.test.inputs() {
            victim.query(benign_user, x).unwrap();
        }
        let attack = cfg().attack;
        let h = knockoff_harvest(&victim, ATTACKER, &run.lab.surrogate, &attack).unwrap();
        let misinformed = h.inputs.iter().filter(|x| victim.respond(x).unwrap().alpha > 0.5).count();
        assert!(misinformed as f64 >= 0.6 * h.len() as f64, "{misinformed}/{}", h.len());
        let gap = victim.audit_user(ATTACKER).unwrap() - victim.audit_user(benign_user).unwrap();
        assert!(gap >= 0.3, "audit gap {gap}");
    }
}

#[test]
fn matched_misinformation_confidence_overlaps_benign_confidence() {
    for run in runs() {
        let victim = run.defended(&DefenseConfig { match_msp: true, ..DefenseConfig::am(1.0) }).unwrap();
        let benign = msps(&run.defender, &run.lab.test);
        let served: Vec<f64> = run.lab.test.inputs().iter().map(|x| msp(&victim.respond(x).unwrap().probs)).collect();
        let overlap = msp_overlap(&benign, &served);
        assert!(overlap >= 0.9, "seed {}: overlap {overlap}", run.lab.seed);
        // the benign path is untouched
        let plain = run.defended(&DefenseConfig::am(0.0)).unwrap();
        let matched = run.defended(&DefenseConfig { match_msp: true, ..DefenseConfig::am(0.0) }).unwrap();
        assert_eq!(accuracy(&plain, &run.lab.test).unwrap(), accuracy(&matched, &run.lab.test).unwrap());
    }
}

#[test]
fn zero_jbda_rounds_is_seed_only_distillation() {
    let run = &runs()[0];
    let c = cfg();
    let victim = run.defended(&DefenseConfig::none()).unwrap();
    let attack = AttackConfig { kind: AttackKind::Jbda, rounds: 0, ..c.attack.clone() };
    let arch = Architecture::like(&run.defender, 3);
    let out = jbda_attack(&victim, ATTACKER, &run.lab.seed_set, &arch, &attack, &run.lab.clone_schedule(&c)).unwrap();
    assert_eq!(out.round_sizes, vec![attack.seed_size]);
    assert_eq!(victim.queries_served(), attack.seed_size as u64);
    let seeds = run.lab.seed_set.take(attack.seed_size);
    assert_eq!(out.harvest.inputs, seeds.inputs());
    for (x, y) in seeds.inputs().iter().zip(&out.harvest.targets) {
        assert_eq!(&run.defender.forward(x).unwrap(), y);
    }
}

#[test]
fn full_misinformation_clone_matches_a_clone_of_the_misinformer() {
    let c = cfg();
    for run in runs() {
        let victim = run.defended(&DefenseConfig::am(1.0)).unwrap();
        let stolen = run.attack(&c, &victim, &c.attack).unwrap();
        // oracle: the same inputs labeled by the misinformation model directly
        let oracle = HarvestedDataset {
            targets: stolen.harvest.inputs.iter().map(|x| run.misinformer.forward(x).unwrap()).collect(),
            ..stolen.harvest.clone()
        };
        let arch = Architecture::like(&run.defender, amlab::rng::derive_seed(run.lab.seed, "clone-init"));
        let clone = train_clone(&oracle, &arch, &run.lab.clone_schedule(&c), LabelStrategy::Soft).unwrap();
        let direct = accuracy(&clone, &run.lab.test).unwrap();
        assert!((stolen.clone_accuracy - direct).abs() <= 0.02, "{} vs {direct}", stolen.clone_accuracy);
    }
}

#[test]
fn one_hot_targets_make_strategies_coincide() {
    let run = &runs()[0];
    let c = cfg();
    let k = run.lab.num_classes();
    let inputs: Vec<Tensor> = run.lab.surrogate.inputs()[..60].to_vec();
    let targets = inputs.iter().map(|x| one_hot(k, run.defender.predict(x).unwrap())).collect();
    let h = HarvestedDataset { inputs, targets, source: c.attack.clone() };
    let arch = Architecture::like(&run.defender, 8);
    let schedule = run.lab.clone_schedule(&c);
    let soft = train_clone(&h, &arch, &schedule, LabelStrategy::Soft).unwrap();
    let hard = train_clone(&h, &arch, &schedule, LabelStrategy::Argmax).unwrap();
    assert_eq!(encode_model(&soft), encode_model(&hard));
}

#[test]
fn jbda_step_climbs_the_clone_loss_on_a_one_dimensional_net() {
    let clone = Classifier::dense_mlp(1, 4, 2, 17).unwrap();
    let step = 1e-3;
    let mut climbed = 0;
    for i in -20..=20 {
        let x = Tensor::vector(vec![i as f64 / 10.0]).unwrap();
        for label in 0..2 {
            let moved = jbda_synthesize(&clone, &x, label, step).unwrap();
            let before = cross_entropy(&clone.forward(&x).unwrap(), label).unwrap();
            let after = cross_entropy(&clone.forward(&moved).unwrap(), label).unwrap();
            if moved == x {
                continue;
            }
            assert!(after > before, "x {} label {label}: {before} -> {after}", x.data()[0]);
            climbed += 1;
        }
        assert_eq!(jbda_synthesize(&clone, &x, 0, 0.0).unwrap(), x);
    }
    assert!(climbed > 40);
}

#[test]
fn no_pp_point_beats_am_on_both_axes() {
    let c = cfg();
    let am = mean_points(&sweep(runs(), &c, DefenseKind::Am, &c.sweep.tau, &c.attack, None).unwrap().points);
    let pp = mean_points(&sweep(runs(), &c, DefenseKind::Pp, &c.sweep.alpha_pp, &c.attack, None).unwrap().points);
    for a in &am {
        for p in &pp {
            let beats = p.defender_accuracy > a.defender_accuracy && p.clone_accuracy < a.clone_accuracy;
            assert!(!beats, "PP {p:?} beats AM {a:?}");
        }
    }
}
