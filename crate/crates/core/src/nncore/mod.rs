//! Minimal deterministic neural-network engine.

mod classifier;
mod gradcheck;
mod layer;
mod loss;
mod persist;
mod tensor;
mod train;

pub use classifier::{Classifier, Gradients};
pub use gradcheck::{gradient_check, input_gradient_check, LossTerm, FD_STEP};
pub use layer::LayerSpec;
pub use loss::{
    cross_entropy, cross_entropy_to_uniform, distillation_loss, one_hot, reverse_cross_entropy, softmax, Objective,
    LOG_EPS,
};
pub use persist::{decode_model, encode_model, load_model, save_model};
pub use tensor::Tensor;
pub use train::{fit, train, LossKind, TrainConfig, TrainReport};
