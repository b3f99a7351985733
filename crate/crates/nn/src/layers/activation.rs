use rand::Rng;

use super::{unexpected_cache, Cache, ForwardCtx, Layer};
use crate::error::{NnError, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, Default)]
pub struct Relu;

impl Layer for Relu {
    fn name(&self) -> &'static str {
        "relu"
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(input.to_vec())
    }

    fn forward(&self, x: &Tensor, _ctx: &mut ForwardCtx<'_>) -> Result<(Tensor, Cache)> {
        let mask: Vec<f64> = x
            .data()
            .iter()
            .map(|&v| if v > 0.0 { 1.0 } else { 0.0 })
            .collect();
        let out = x.data().iter().map(|&v| v.max(0.0)).collect();
        Ok((Tensor::new(x.shape().to_vec(), out)?, Cache::Mask(mask)))
    }

    fn backward(
        &self,
        cache: &Cache,
        grad_out: &Tensor,
        _grads: &mut [Vec<f64>],
    ) -> Result<Tensor> {
        let Cache::Mask(mask) = cache else {
            return Err(unexpected_cache("relu"));
        };
        let dx = grad_out
            .data()
            .iter()
            .zip(mask)
            .map(|(g, m)| g * m)
            .collect();
        Tensor::new(grad_out.shape().to_vec(), dx)
    }
}

/// Inverted dropout: kept activations are scaled by `1 / (1 - rate)` so
/// inference is the identity.
#[derive(Debug, Clone, Copy)]
pub struct Dropout {
    pub(crate) rate: f64,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(NnError::InvalidConfig(format!(
                "dropout rate {rate} not in [0, 1)"
            )));
        }
        Ok(Self { rate })
    }
}

impl Layer for Dropout {
    fn name(&self) -> &'static str {
        "dropout"
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(input.to_vec())
    }

    fn forward(&self, x: &Tensor, ctx: &mut ForwardCtx<'_>) -> Result<(Tensor, Cache)> {
        if !ctx.training || self.rate == 0.0 {
            return Ok((x.clone(), Cache::Mask(vec![1.0; x.len()])));
        }
        let rng = ctx.rng.as_deref_mut().ok_or_else(|| {
            NnError::InvalidConfig("dropout in training mode needs an rng".into())
        })?;
        let scale = 1.0 / (1.0 - self.rate);
        let mask: Vec<f64> = (0..x.len())
            .map(|_| {
                if rng.random::<f64>() < self.rate {
                    0.0
                } else {
                    scale
                }
            })
            .collect();
        let out = x.data().iter().zip(&mask).map(|(v, m)| v * m).collect();
        Ok((Tensor::new(x.shape().to_vec(), out)?, Cache::Mask(mask)))
    }

    fn backward(
        &self,
        cache: &Cache,
        grad_out: &Tensor,
        _grads: &mut [Vec<f64>],
    ) -> Result<Tensor> {
        let Cache::Mask(mask) = cache else {
            return Err(unexpected_cache("dropout"));
        };
        let dx = grad_out
            .data()
            .iter()
            .zip(mask)
            .map(|(g, m)| g * m)
            .collect();
        Tensor::new(grad_out.shape().to_vec(), dx)
    }
}
