//! Layer implementations with hand-written backward passes.
//!
//! Every layer is stateless during a pass: `forward` returns the output
//! together with whatever the layer needs to run `backward` later, and
//! parameter gradients are accumulated into caller-owned buffers laid out
//! in the same order as [`Layer::params`].

mod activation;
mod conv;
mod dense;
mod lstm;
mod pool;
mod reshape;

pub use activation::{Dropout, Relu};
pub use conv::TimeConv;
pub use dense::Dense;
pub use lstm::{Lstm, LstmCache};
pub use pool::{MaxPool2d, TemporalAvgPool};
pub use reshape::{Flatten, SplitFeet};

use rand::{Rng, RngCore};

use crate::error::Result;
use crate::tensor::Tensor;

/// Per-pass context. `rng` is only consulted by stochastic layers in
/// training mode.
pub struct ForwardCtx<'a> {
    pub training: bool,
    pub rng: Option<&'a mut dyn RngCore>,
}

impl ForwardCtx<'_> {
    pub fn inference() -> ForwardCtx<'static> {
        ForwardCtx {
            training: false,
            rng: None,
        }
    }
}

/// State saved by `forward` for the matching `backward` call.
#[derive(Debug, Clone)]
pub enum Cache {
    None,
    Input(Tensor),
    Mask(Vec<f64>),
    Shape(Vec<usize>),
    Argmax {
        indices: Vec<usize>,
        input_shape: Vec<usize>,
    },
    Lstm(Box<LstmCache>),
}

pub trait Layer: Send + Sync {
    fn name(&self) -> &'static str;

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>>;

    fn forward(&self, x: &Tensor, ctx: &mut ForwardCtx<'_>) -> Result<(Tensor, Cache)>;

    /// Accumulates parameter gradients into `grads` (one buffer per entry
    /// of [`Layer::params`]) and returns the gradient w.r.t. the input.
    fn backward(&self, cache: &Cache, grad_out: &Tensor, grads: &mut [Vec<f64>]) -> Result<Tensor>;

    fn params(&self) -> Vec<&[f64]> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        Vec::new()
    }

    fn param_names(&self) -> Vec<&'static str> {
        Vec::new()
    }
}

/// Glorot-uniform initialisation.
pub(crate) fn glorot(rng: &mut dyn RngCore, fan_in: usize, fan_out: usize, n: usize) -> Vec<f64> {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    (0..n).map(|_| rng.random_range(-limit..limit)).collect()
}

pub(crate) fn unexpected_cache(layer: &'static str) -> crate::error::NnError {
    crate::error::NnError::InvalidConfig(format!("{layer}: backward called with a foreign cache"))
}
