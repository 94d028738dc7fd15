//! How the outlier-exposure weight shapes the defender's maximum softmax
//! probability on benign, surrogate and outlier inputs.

use amlab::defense::msp;
use amlab::eval::accuracy;
use amlab::experiment::{ExperimentConfig, Lab};
use amlab::nncore::{Classifier, Tensor};

fn mean_msp(model: &Classifier, xs: &[Tensor]) -> amlab::Result<f64> {
    let mut sum = 0.0;
    for x in xs {
        sum += msp(&model.forward(x)?);
    }
    Ok(sum / xs.len() as f64)
}

fn main() -> amlab::Result<()> {
    let mut cfg = ExperimentConfig::default();
    let lab = Lab::build(&cfg, cfg.rng_seed)?;
    let outliers = lab.outliers.clone().expect("the default preset has outliers");
    println!("oe_weight  accuracy  msp(test)  msp(surrogate)  msp(outliers)");
    for w in [0.0, 0.5, 1.0] {
        cfg.defender.train.oe_weight = w;
        let model = lab.train_defender(&cfg)?;
        println!(
            "{w:9.1}  {:8.3}  {:9.3}  {:14.3}  {:13.3}",
            accuracy(&model, &lab.test)?,
            mean_msp(&model, lab.test.inputs())?,
            mean_msp(&model, lab.surrogate.inputs())?,
            mean_msp(&model, outliers.inputs())?,
        );
    }
    Ok(())
}
