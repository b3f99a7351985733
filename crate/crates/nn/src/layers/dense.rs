use rand::RngCore;

use super::{glorot, unexpected_cache, Cache, ForwardCtx, Layer};
use crate::error::{check_dim, Result};
use crate::tensor::Tensor;

/// Fully connected layer, `y = W x + b` with `W` stored `[out][in]`.
#[derive(Debug, Clone)]
pub struct Dense {
    pub(crate) inputs: usize,
    pub(crate) outputs: usize,
    pub(crate) weight: Vec<f64>,
    pub(crate) bias: Vec<f64>,
}

impl Dense {
    pub fn new(inputs: usize, outputs: usize, rng: &mut dyn RngCore) -> Self {
        Self {
            inputs,
            outputs,
            weight: glorot(rng, inputs, outputs, inputs * outputs),
            bias: vec![0.0; outputs],
        }
    }
}

impl Layer for Dense {
    fn name(&self) -> &'static str {
        "dense"
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        check_dim("dense", "input length", self.inputs, input.iter().product())?;
        Ok(vec![self.outputs])
    }

    fn forward(&self, x: &Tensor, _ctx: &mut ForwardCtx<'_>) -> Result<(Tensor, Cache)> {
        check_dim("dense", "input length", self.inputs, x.len())?;
        let xs = x.data();
        let out: Vec<f64> = self
            .weight
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(row, b)| b + row.iter().zip(xs).map(|(w, v)| w * v).sum::<f64>())
            .collect();
        Ok((
            Tensor::new(vec![self.outputs], out)?,
            Cache::Input(x.clone()),
        ))
    }

    fn backward(&self, cache: &Cache, grad_out: &Tensor, grads: &mut [Vec<f64>]) -> Result<Tensor> {
        let Cache::Input(x) = cache else {
            return Err(unexpected_cache("dense"));
        };
        check_dim("dense", "gradient length", self.outputs, grad_out.len())?;
        let xs = x.data();
        let go = grad_out.data();
        let (gw, gb) = grads.split_at_mut(1);
        let mut dx = vec![0.0; self.inputs];
        for (o, &g) in go.iter().enumerate() {
            let row = &self.weight[o * self.inputs..(o + 1) * self.inputs];
            let grow = &mut gw[0][o * self.inputs..(o + 1) * self.inputs];
            for i in 0..self.inputs {
                grow[i] += g * xs[i];
                dx[i] += g * row[i];
            }
            gb[0][o] += g;
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
        vec!["weight", "bias"]
    }
}
