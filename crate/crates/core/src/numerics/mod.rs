//! Dense feed-forward classifier: softmax outputs, cross-entropy loss,
//! backpropagation and mini-batch SGD. Target, shadow and client models all
//! run on this core.

pub mod checkpoint;
mod model;
mod tensor;

pub(crate) use model::sample_loss;
pub use model::{
    backward, cross_entropy, evaluate, forward, init_seed, score, train, train_from_epoch, Activation, Layer,
    ModelParams, ModelSpec, TrainConfig, LOSS_CLAMP,
};
pub use tensor::{argmax, softmax_rows, Tensor};
