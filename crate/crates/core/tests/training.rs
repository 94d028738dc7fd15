use amlab::data::{generate_synthetic, LabeledDataset, Role, SyntheticTaskSpec};
use amlab::defense::msp;
use amlab::eval::accuracy;
use amlab::experiment::{ExperimentConfig, Lab};
use amlab::nncore::{encode_model, train, Classifier, LayerSpec, LossKind, Tensor, TrainConfig};

fn two_clusters(seed: u64, per_class: usize, role: Role) -> LabeledDataset {
    let spec = SyntheticTaskSpec::separable(2, 2, 0.05, per_class, seed).unwrap();
    generate_synthetic(&spec, role, "clusters").unwrap()
}

fn config(epochs: usize) -> TrainConfig {
    TrainConfig { epochs, oe_weight: 0.0, rng_seed: 3, ..TrainConfig::default() }
}

#[test]
fn separable_clusters_are_learned_and_reverse_training_is_wrong() {
    let data = two_clusters(11, 50, Role::DefenderTrain);
    let mut model = Classifier::dense_mlp(2, 8, 2, 1).unwrap();
    train(&mut model, &data, None, &config(50), LossKind::Standard).unwrap();
    assert_eq!(accuracy(&model, &data).unwrap(), 1.0);

    let mut wrong = Classifier::dense_mlp(2, 8, 2, 1).unwrap();
    train(&mut wrong, &data, None, &config(50), LossKind::Reverse).unwrap();
    assert!(accuracy(&wrong, &data).unwrap() < 0.5);
}

#[test]
fn zero_outlier_weight_matches_plain_training() {
    let data = two_clusters(12, 40, Role::DefenderTrain);
    let outliers = two_clusters(99, 40, Role::Outlier);
    let mut plain = Classifier::dense_mlp(2, 8, 2, 4).unwrap();
    let mut oe = plain.clone();
    train(&mut plain, &data, None, &config(20), LossKind::Standard).unwrap();
    train(&mut oe, &data, Some(&outliers), &config(20), LossKind::StandardOe).unwrap();
    assert_eq!(encode_model(&plain), encode_model(&oe));
}

#[test]
fn training_is_bit_reproducible() {
    let data = two_clusters(13, 30, Role::DefenderTrain);
    let run = || {
        let mut m = Classifier::dense_mlp(2, 6, 2, 9).unwrap();
        let report = train(&mut m, &data, None, &config(15), LossKind::Standard).unwrap();
        (encode_model(&m), report.loss_history)
    };
    assert_eq!(run(), run());
}

#[test]
fn full_batch_softmax_regression_loss_never_rises() {
    // a single dense layer makes the loss convex in the parameters
    let data = two_clusters(14, 40, Role::DefenderTrain);
    let mut model = Classifier::new(
        vec![2],
        vec![LayerSpec::Dense { inputs: 2, outputs: 2, init_seed: 5 }, LayerSpec::SoftmaxOutput],
    )
    .unwrap();
    let cfg = TrainConfig { batch_size: data.len(), learning_rate: 0.5, ..config(60) };
    let history = train(&mut model, &data, None, &cfg, LossKind::Standard).unwrap().loss_history;
    for w in history.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "{history:?}");
    }
}

#[test]
fn two_class_preset_generalizes() {
    let spec = SyntheticTaskSpec::separable(2, 16, 0.05, 100, 21).unwrap();
    let train_set = generate_synthetic(&spec, Role::DefenderTrain, "train").unwrap();
    let test = generate_synthetic(&spec.with_seed(22).with_samples(200), Role::DefenderTest, "test").unwrap();
    let mut model = Classifier::dense_mlp(16, 16, 2, 2).unwrap();
    train(&mut model, &train_set, None, &config(30), LossKind::Standard).unwrap();
    assert!(accuracy(&model, &test).unwrap() >= 0.99);
}

#[test]
fn test_sets_are_never_trained_on() {
    let test = two_clusters(15, 10, Role::DefenderTest);
    let train_set = two_clusters(15, 10, Role::DefenderTrain);
    let mut m = Classifier::dense_mlp(2, 4, 2, 0).unwrap();
    assert!(train(&mut m, &test, None, &config(1), LossKind::Standard).is_err());
    let oe = TrainConfig { oe_weight: 0.5, ..config(1) };
    assert!(train(&mut m, &train_set, Some(&test), &oe, LossKind::StandardOe).is_err());
}

fn mean_msp(model: &Classifier, xs: &[Tensor]) -> f64 {
    xs.iter().map(|x| msp(&model.forward(x).unwrap())).sum::<f64>() / xs.len() as f64
}

#[test]
fn outlier_confidence_falls_as_the_outlier_weight_grows() {
    let mut cfg = ExperimentConfig::default();
    let lab = Lab::build(&cfg, 1).unwrap();
    let outliers = lab.outliers.clone().unwrap();
    let mut means = Vec::new();
    for w in [0.0, 0.5, 1.0] {
        cfg.defender.train.oe_weight = w;
        let model = lab.train_defender(&cfg).unwrap();
        means.push(mean_msp(&model, outliers.inputs()));
    }
    for pair in means.windows(2) {
        assert!(pair[1] <= pair[0] + 0.02, "{means:?}");
    }
    // and the trend is real, not just noise
    assert!(means[2] < means[0] - 0.1, "{means:?}");
}
