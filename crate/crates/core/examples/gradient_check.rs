//! Analytic gradients of every training loss against central finite
//! differences on a small random network.

use amlab::nncore::{gradient_check, one_hot, Classifier, LossTerm, Objective, Tensor};

fn main() -> amlab::Result<()> {
    let model = Classifier::dense_mlp(5, 8, 3, 42)?;
    let x = Tensor::vector(vec![0.3, -0.2, 0.8, 0.1, -0.5])?;
    let outlier = Tensor::vector(vec![1.5, 1.2, -1.1, 0.9, 2.0])?;
    let cases = [
        ("cross-entropy", vec![LossTerm::new(x.clone(), Objective::Label(1))]),
        ("reverse cross-entropy", vec![LossTerm::new(x.clone(), Objective::Reverse(1))]),
        ("distillation", vec![LossTerm::new(x.clone(), Objective::Soft(vec![0.2, 0.5, 0.3]))]),
        ("one-hot distillation", vec![LossTerm::new(x.clone(), Objective::Soft(one_hot(3, 2)))]),
        (
            "outlier exposure",
            vec![LossTerm::new(x.clone(), Objective::Label(0)), LossTerm::weighted(outlier, Objective::Uniform, 0.5)],
        ),
    ];
    for (name, terms) in cases {
        println!("{name:22} max relative error {:.2e}", gradient_check(&model, &terms)?);
    }
    Ok(())
}
