use rand::RngCore;

use super::{glorot, unexpected_cache, Cache, ForwardCtx, Layer};
use crate::error::{check_dim, NnError, Result};
use crate::tensor::Tensor;

/// Convolution along the time axis of a `[channels][time][width]` input.
///
/// The kernel spans `kernel` time steps and one feature column, so each
/// feature column is filtered independently with weights shared across
/// columns, while all input channels (the two feet) are mixed. Valid
/// padding, stride 1: output is `[filters][time - kernel + 1][width]`.
#[derive(Debug, Clone)]
pub struct TimeConv {
    pub(crate) in_channels: usize,
    pub(crate) filters: usize,
    pub(crate) kernel: usize,
    /// `[filters][in_channels][kernel]`
    pub(crate) weight: Vec<f64>,
    pub(crate) bias: Vec<f64>,
}

impl TimeConv {
    pub fn new(in_channels: usize, filters: usize, kernel: usize, rng: &mut dyn RngCore) -> Self {
        let fan_in = in_channels * kernel;
        let fan_out = filters * kernel;
        Self {
            in_channels,
            filters,
            kernel,
            weight: glorot(rng, fan_in, fan_out, filters * in_channels * kernel),
            bias: vec![0.0; filters],
        }
    }

    /// Builds a layer from explicit weights; used for tests and loading.
    pub fn from_weights(
        in_channels: usize,
        filters: usize,
        kernel: usize,
        weight: Vec<f64>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        check_dim(
            "time_conv",
            "weight length",
            filters * in_channels * kernel,
            weight.len(),
        )?;
        check_dim("time_conv", "bias length", filters, bias.len())?;
        Ok(Self {
            in_channels,
            filters,
            kernel,
            weight,
            bias,
        })
    }

    fn dims(&self, shape: &[usize]) -> Result<(usize, usize)> {
        if shape.len() != 3 {
            return Err(NnError::ShapeMismatch {
                layer: "time_conv",
                dim: "rank",
                expected: 3,
                found: shape.len(),
            });
        }
        check_dim("time_conv", "channels", self.in_channels, shape[0])?;
        if shape[1] < self.kernel {
            return Err(NnError::ShapeMismatch {
                layer: "time_conv",
                dim: "time (at least kernel)",
                expected: self.kernel,
                found: shape[1],
            });
        }
        Ok((shape[1], shape[2]))
    }
}

impl Layer for TimeConv {
    fn name(&self) -> &'static str {
        "time_conv"
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let (t, w) = self.dims(input)?;
        Ok(vec![self.filters, t - self.kernel + 1, w])
    }

    fn forward(&self, x: &Tensor, _ctx: &mut ForwardCtx<'_>) -> Result<(Tensor, Cache)> {
        let (t, w) = self.dims(x.shape())?;
        let t_out = t - self.kernel + 1;
        let span = t_out * w;
        let xs = x.data();
        let mut out = vec![0.0; self.filters * span];
        for (o, block) in out.chunks_exact_mut(span).enumerate() {
            block.fill(self.bias[o]);
            for c in 0..self.in_channels {
                let xc = &xs[c * t * w..(c + 1) * t * w];
                for j in 0..self.kernel {
                    let kv = self.weight[(o * self.in_channels + c) * self.kernel + j];
                    let src = &xc[j * w..j * w + span];
                    for (d, s) in block.iter_mut().zip(src) {
                        *d += kv * s;
                    }
                }
            }
        }
        Ok((
            Tensor::new(vec![self.filters, t_out, w], out)?,
            Cache::Input(x.clone()),
        ))
    }

    fn backward(&self, cache: &Cache, grad_out: &Tensor, grads: &mut [Vec<f64>]) -> Result<Tensor> {
        let Cache::Input(x) = cache else {
            return Err(unexpected_cache("time_conv"));
        };
        let (t, w) = self.dims(x.shape())?;
        let t_out = t - self.kernel + 1;
        let span = t_out * w;
        check_dim(
            "time_conv",
            "gradient length",
            self.filters * span,
            grad_out.len(),
        )?;
        let xs = x.data();
        let go = grad_out.data();
        let mut dx = vec![0.0; xs.len()];
        let (gw, gb) = grads.split_at_mut(1);
        for o in 0..self.filters {
            let g = &go[o * span..(o + 1) * span];
            gb[0][o] += g.iter().sum::<f64>();
            for c in 0..self.in_channels {
                let xc = &xs[c * t * w..(c + 1) * t * w];
                let dxc = &mut dx[c * t * w..(c + 1) * t * w];
                for j in 0..self.kernel {
                    let idx = (o * self.in_channels + c) * self.kernel + j;
                    let kv = self.weight[idx];
                    let src = &xc[j * w..j * w + span];
                    gw[0][idx] += g.iter().zip(src).map(|(a, b)| a * b).sum::<f64>();
                    for (d, gv) in dxc[j * w..j * w + span].iter_mut().zip(g) {
                        *d += kv * gv;
                    }
                }
            }
        }
        Tensor::new(x.shape().to_vec(), dx)
    }

    fn params(&self) -> Vec<&[f64]> {
        vec![&self.weight, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.weight, &mut self.bias]
    }

    fn param_names(&self) -> Vec<&'static str> {
        vec!["kernel", "bias"]
    }
}
