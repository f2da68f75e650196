//! From-scratch numerical core: feed-forward and LSTM models, exact
//! gradients, RMSprop, Glorot initialization and sequence dropout.

pub mod activation;
pub mod checkpoint;
mod dense;
pub mod dropout;
pub mod init;
pub mod loss;
mod lstm;
pub mod model;
pub mod params;
pub mod rmsprop;
pub mod tensor;

pub use activation::{relu, sigmoid};
pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use dropout::{sequence_dropout, MaskScope, Mode};
pub use init::{glorot_limit, glorot_uniform, glorot_uniform_seeded};
pub use loss::{bce, bce_loss, clamp_prob, PROB_EPS};
pub use model::{lr_forward, lstm_forward, mlp_forward, Model, ModelArch, ModelKind, Sample, DEFAULT_MLP_HIDDEN};
pub use params::Params;
pub use rmsprop::RmsProp;
pub use tensor::Tensor;
