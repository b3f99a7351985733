//! Model configuration and the two classifier architectures.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, NnError, Result};
use crate::layers::{
    Cache, Dense, Dropout, Flatten, ForwardCtx, Layer, Lstm, MaxPool2d, Relu, SplitFeet,
    TemporalAvgPool, TimeConv,
};
use crate::loss::softmax;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    Cnn,
    Lstm,
}

impl std::fmt::Display for Architecture {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Architecture::Cnn => write!(f, "cnn"),
            Architecture::Lstm => write!(f, "lstm"),
        }
    }
}

impl std::str::FromStr for Architecture {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cnn" => Ok(Architecture::Cnn),
            "lstm" => Ok(Architecture::Lstm),
            other => Err(NnError::InvalidConfig(format!(
                "unknown architecture {other:?}"
            ))),
        }
    }
}

/// Convolutional branch: per-foot channels, time convolutions, and
/// `(time, width)` max pools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CnnConfig {
    pub filters: Vec<usize>,
    pub kernels: Vec<usize>,
    pub pools: Vec<(usize, usize)>,
    pub dense_units: usize,
    pub dropout: f64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        Self {
            filters: vec![32, 64],
            kernels: vec![5, 5],
            pools: vec![(5, 2), (9, 2)],
            dense_units: 64,
            dropout: 0.5,
        }
    }
}

impl CnnConfig {
    /// Same network with the feature-axis pooling removed, for inputs
    /// that only carry half the features per foot.
    pub fn with_unit_width_pools(mut self) -> Self {
        for p in &mut self.pools {
            p.1 = 1;
        }
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LstmConfig {
    pub units: usize,
    /// Mean-pool this many consecutive samples before the recurrence.
    /// `1` feeds every sample.
    pub input_pool: usize,
    pub dense_units: usize,
}

impl Default for LstmConfig {
    fn default() -> Self {
        Self {
            units: 32,
            input_pool: 5,
            dense_units: 32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub architecture: Architecture,
    pub n_features: usize,
    pub window_len: usize,
    pub n_classes: usize,
    pub cnn: CnnConfig,
    pub lstm: LstmConfig,
}

impl ModelConfig {
    pub fn new(architecture: Architecture, window_len: usize, n_features: usize) -> Self {
        Self {
            architecture,
            n_features,
            window_len,
            n_classes: 4,
            cnn: CnnConfig::default(),
            lstm: LstmConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(NnError::InvalidConfig(msg));
        if self.n_features == 0 || self.window_len == 0 || self.n_classes < 2 {
            return bad("feature count, window length and class count must be positive".into());
        }
        match self.architecture {
            Architecture::Cnn => {
                let c = &self.cnn;
                if c.filters.is_empty()
                    || c.filters.len() != c.kernels.len()
                    || c.filters.len() != c.pools.len()
                {
                    return bad(
                        "cnn filters, kernels and pools must have equal non-zero length".into(),
                    );
                }
                if c.filters.iter().chain(&c.kernels).any(|&v| v == 0)
                    || c.pools.iter().any(|&(a, b)| a == 0 || b == 0)
                    || c.dense_units == 0
                {
                    return bad("cnn sizes must be positive".into());
                }
                if !(0.0..1.0).contains(&c.dropout) {
                    return bad(format!("dropout {} not in [0, 1)", c.dropout));
                }
            }
            Architecture::Lstm => {
                let l = &self.lstm;
                if l.units == 0 || l.input_pool == 0 || l.dense_units == 0 {
                    return bad("lstm sizes must be positive".into());
                }
            }
        }
        Ok(())
    }
}

/// A sequential network ending in class logits.
pub struct Model {
    config: ModelConfig,
    layers: Vec<Box<dyn Layer>>,
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let names: Vec<_> = self.layers.iter().map(|l| l.name()).collect();
        f.debug_struct("Model")
            .field("config", &self.config)
            .field("layers", &names)
            .finish()
    }
}

/// Everything `backward` needs from one training forward pass.
pub struct Trace {
    caches: Vec<Cache>,
    pub logits: Vec<f64>,
}

impl Model {
    /// Builds the network described by `config` with weights drawn from
    /// `seed`. Shapes are checked end to end before returning.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers: Vec<Box<dyn Layer>> = Vec::new();
        let mut shape = vec![config.window_len, config.n_features];
        let mut push = |layer: Box<dyn Layer>, shape: &mut Vec<usize>| -> Result<()> {
            *shape = layer.output_shape(shape)?;
            layers.push(layer);
            Ok(())
        };
        match config.architecture {
            Architecture::Cnn => {
                let c = &config.cnn;
                push(Box::new(SplitFeet::new(config.n_features)?), &mut shape)?;
                for ((&filters, &kernel), &(pt, pw)) in
                    c.filters.iter().zip(&c.kernels).zip(&c.pools)
                {
                    let conv = TimeConv::new(shape[0], filters, kernel, &mut rng);
                    push(Box::new(conv), &mut shape)?;
                    push(Box::new(Relu), &mut shape)?;
                    push(Box::new(MaxPool2d::new(pt, pw)?), &mut shape)?;
                }
                push(Box::new(Flatten), &mut shape)?;
                push(
                    Box::new(Dense::new(shape[0], c.dense_units, &mut rng)),
                    &mut shape,
                )?;
                push(Box::new(Relu), &mut shape)?;
                push(Box::new(Dropout::new(c.dropout)?), &mut shape)?;
                push(
                    Box::new(Dense::new(shape[0], config.n_classes, &mut rng)),
                    &mut shape,
                )?;
            }
            Architecture::Lstm => {
                let l = &config.lstm;
                if l.input_pool > 1 {
                    push(Box::new(TemporalAvgPool::new(l.input_pool)?), &mut shape)?;
                }
                push(Box::new(Lstm::new(shape[1], l.units, &mut rng)), &mut shape)?;
                push(
                    Box::new(Dense::new(shape[0], l.dense_units, &mut rng)),
                    &mut shape,
                )?;
                push(Box::new(Relu), &mut shape)?;
                push(
                    Box::new(Dense::new(shape[0], config.n_classes, &mut rng)),
                    &mut shape,
                )?;
            }
        }
        check_dim(
            "model",
            "output classes",
            config.n_classes,
            shape.iter().product(),
        )?;
        Ok(Self { config, layers })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layer_names(&self) -> Vec<&'static str> {
        self.layers.iter().map(|l| l.name()).collect()
    }

    fn input_tensor(&self, window: &[f64]) -> Result<Tensor> {
        check_dim(
            "model",
            "window values (window_len * n_features)",
            self.config.window_len * self.config.n_features,
            window.len(),
        )?;
        Tensor::new(
            vec![self.config.window_len, self.config.n_features],
            window.to_vec(),
        )
    }

    /// Forward pass keeping caches for `backward`.
    pub fn forward_train(&self, window: &[f64], ctx: &mut ForwardCtx<'_>) -> Result<Trace> {
        let mut x = self.input_tensor(window)?;
        let mut caches = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let (y, cache) = layer.forward(&x, ctx)?;
            caches.push(cache);
            x = y;
        }
        Ok(Trace {
            caches,
            logits: x.into_data(),
        })
    }

    /// Accumulates parameter gradients for one example into `grads`.
    pub fn backward(
        &self,
        trace: &Trace,
        grad_logits: &[f64],
        grads: &mut [Vec<f64>],
    ) -> Result<()> {
        let mut g = Tensor::new(vec![grad_logits.len()], grad_logits.to_vec())?;
        let mut offsets = Vec::with_capacity(self.layers.len());
        let mut at = 0;
        for layer in &self.layers {
            let n = layer.params().len();
            offsets.push(at..at + n);
            at += n;
        }
        for ((layer, cache), range) in self.layers.iter().zip(&trace.caches).zip(offsets).rev() {
            g = layer.backward(cache, &g, &mut grads[range])?;
        }
        Ok(())
    }

    /// Logits for one window with dropout disabled.
    pub fn logits(&self, window: &[f64]) -> Result<Vec<f64>> {
        let mut ctx = ForwardCtx::inference();
        let mut x = self.input_tensor(window)?;
        for layer in &self.layers {
            x = layer.forward(&x, &mut ctx)?.0;
        }
        Ok(x.into_data())
    }

    /// Class probabilities, one row per window.
    pub fn predict(&self, windows: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        windows
            .iter()
            .map(|w| Ok(softmax(&self.logits(w)?)))
            .collect()
    }

    pub fn params(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| l.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.params_mut())
            .collect()
    }

    /// `layer{index}.{param}` for every parameter buffer, in model order.
    pub fn param_names(&self) -> Vec<String> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| {
                l.param_names()
                    .into_iter()
                    .map(move |n| format!("layer{i}.{}.{n}", l.name()))
            })
            .collect()
    }

    pub fn param_sizes(&self) -> Vec<usize> {
        self.params().iter().map(|p| p.len()).collect()
    }

    pub fn zero_grads(&self) -> Vec<Vec<f64>> {
        self.param_sizes()
            .into_iter()
            .map(|n| vec![0.0; n])
            .collect()
    }

    pub fn param_count(&self) -> usize {
        self.param_sizes().iter().sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_cnn_shapes_for_both_window_lengths() {
        for (t, f) in [(600, 12), (500, 12), (600, 18), (500, 18)] {
            let m = Model::new(ModelConfig::new(Architecture::Cnn, t, f), 1).unwrap();
            let x = vec![0.5; t * f];
            assert_eq!(m.logits(&x).unwrap().len(), 4);
        }
    }

    #[test]
    fn half_width_cnn_needs_unit_width_pools() {
        let mut cfg = ModelConfig::new(Architecture::Cnn, 500, 6);
        assert!(Model::new(cfg.clone(), 1).is_err());
        cfg.cnn = cfg.cnn.with_unit_width_pools();
        assert!(Model::new(cfg, 1).is_ok());
    }

    #[test]
    fn wrong_window_size_is_a_shape_mismatch() {
        let m = Model::new(ModelConfig::new(Architecture::Lstm, 500, 12), 1).unwrap();
        let err = m.logits(&[0.0; 10]).unwrap_err();
        assert!(
            matches!(err, NnError::ShapeMismatch { layer: "model", .. }),
            "{err}"
        );
    }

    #[test]
    fn predict_rows_are_distributions() {
        let m = Model::new(ModelConfig::new(Architecture::Lstm, 100, 12), 3).unwrap();
        let a: Vec<f64> = (0..1200).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        let rows = m.predict(&[&a, &a]).unwrap();
        for row in &rows {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        }
        assert_eq!(rows[0], rows[1]);
    }
}
