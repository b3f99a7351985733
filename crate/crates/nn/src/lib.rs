//! Minimal deep-learning stack for windowed multichannel time series:
//! time convolutions, max pooling, LSTM, dense layers, softmax
//! cross-entropy and Adam, all with hand-written backward passes.

pub mod error;
pub mod gradcheck;
pub mod io;
pub mod layers;
pub mod loss;
pub mod model;
pub mod optim;
pub mod tensor;
pub mod train;

pub use error::{NnError, Result};
pub use model::{Architecture, CnnConfig, LstmConfig, Model, ModelConfig};
pub use tensor::Tensor;
pub use train::{accuracy, argmax, train, EpochStats, History, TrainConfig, Trainer};
