use super::{unexpected_cache, Cache, ForwardCtx, Layer};
use crate::error::{check_dim, NnError, Result};
use crate::tensor::Tensor;

/// Rearranges a `[time][features]` window whose features are laid out
/// left-foot block then right-foot block into `[2][time][features / 2]`,
/// so each foot becomes an input channel.
#[derive(Debug, Clone, Copy)]
pub struct SplitFeet {
    pub(crate) features: usize,
}

impl SplitFeet {
    pub fn new(features: usize) -> Result<Self> {
        if features == 0 || features % 2 != 0 {
            return Err(NnError::InvalidConfig(format!(
                "two-foot channel split needs an even feature count, got {features}"
            )));
        }
        Ok(Self { features })
    }
}

impl Layer for SplitFeet {
    fn name(&self) -> &'static str {
        "split_feet"
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        check_dim("split_feet", "rank", 2, input.len())?;
        check_dim("split_feet", "features", self.features, input[1])?;
        Ok(vec![2, input[0], self.features / 2])
    }

    fn forward(&self, x: &Tensor, _ctx: &mut ForwardCtx<'_>) -> Result<(Tensor, Cache)> {
        let shape = self.output_shape(x.shape())?;
        let (t, half) = (shape[1], shape[2]);
        let mut out = vec![0.0; x.len()];
        for (i, row) in x.data().chunks_exact(self.features).enumerate() {
            out[i * half..(i + 1) * half].copy_from_slice(&row[..half]);
            out[(t + i) * half..(t + i + 1) * half].copy_from_slice(&row[half..]);
        }
        Ok((Tensor::new(shape, out)?, Cache::None))
    }

    fn backward(
        &self,
        _cache: &Cache,
        grad_out: &Tensor,
        _grads: &mut [Vec<f64>],
    ) -> Result<Tensor> {
        check_dim("split_feet", "rank", 3, grad_out.shape().len())?;
        let (t, half) = (grad_out.shape()[1], grad_out.shape()[2]);
        let g = grad_out.data();
        let mut dx = vec![0.0; g.len()];
        for (i, row) in dx.chunks_exact_mut(self.features).enumerate() {
            row[..half].copy_from_slice(&g[i * half..(i + 1) * half]);
            row[half..].copy_from_slice(&g[(t + i) * half..(t + i + 1) * half]);
        }
        Tensor::new(vec![t, self.features], dx)
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Flatten;

impl Layer for Flatten {
    fn name(&self) -> &'static str {
        "flatten"
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        Ok(vec![input.iter().product()])
    }

    fn forward(&self, x: &Tensor, _ctx: &mut ForwardCtx<'_>) -> Result<(Tensor, Cache)> {
        Ok((
            x.clone().reshape(vec![x.len()])?,
            Cache::Shape(x.shape().to_vec()),
        ))
    }

    fn backward(
        &self,
        cache: &Cache,
        grad_out: &Tensor,
        _grads: &mut [Vec<f64>],
    ) -> Result<Tensor> {
        let Cache::Shape(shape) = cache else {
            return Err(unexpected_cache("flatten"));
        };
        grad_out.clone().reshape(shape.clone())
    }
}
