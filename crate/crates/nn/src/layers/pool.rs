use super::{unexpected_cache, Cache, ForwardCtx, Layer};
use crate::error::{NnError, Result};
use crate::tensor::Tensor;

/// Non-overlapping max pooling over `(time, width)` of a
/// `[channels][time][width]` tensor. Trailing rows/columns that do not
/// fill a whole window are dropped.
#[derive(Debug, Clone, Copy)]
pub struct MaxPool2d {
    pub(crate) time: usize,
    pub(crate) width: usize,
}

impl MaxPool2d {
    pub fn new(time: usize, width: usize) -> Result<Self> {
        if time == 0 || width == 0 {
            return Err(NnError::InvalidConfig("pool sizes must be positive".into()));
        }
        Ok(Self { time, width })
    }

    fn out_dims(&self, shape: &[usize]) -> Result<(usize, usize, usize, usize, usize)> {
        if shape.len() != 3 {
            return Err(NnError::ShapeMismatch {
                layer: "max_pool",
                dim: "rank",
                expected: 3,
                found: shape.len(),
            });
        }
        let (c, t, w) = (shape[0], shape[1], shape[2]);
        let (to, wo) = (t / self.time, w / self.width);
        if to == 0 {
            return Err(NnError::ShapeMismatch {
                layer: "max_pool",
                dim: "time (at least pool)",
                expected: self.time,
                found: t,
            });
        }
        if wo == 0 {
            return Err(NnError::ShapeMismatch {
                layer: "max_pool",
                dim: "width (at least pool)",
                expected: self.width,
                found: w,
            });
        }
        Ok((c, t, w, to, wo))
    }
}

impl Layer for MaxPool2d {
    fn name(&self) -> &'static str {
        "max_pool"
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        let (c, _, _, to, wo) = self.out_dims(input)?;
        Ok(vec![c, to, wo])
    }

    fn forward(&self, x: &Tensor, _ctx: &mut ForwardCtx<'_>) -> Result<(Tensor, Cache)> {
        let (c, t, w, to, wo) = self.out_dims(x.shape())?;
        let xs = x.data();
        let mut out = Vec::with_capacity(c * to * wo);
        let mut arg = Vec::with_capacity(c * to * wo);
        for ch in 0..c {
            for i in 0..to {
                for j in 0..wo {
                    let mut best = f64::NEG_INFINITY;
                    let mut best_idx = 0;
                    for di in 0..self.time {
                        for dj in 0..self.width {
                            let idx = ch * t * w + (i * self.time + di) * w + j * self.width + dj;
                            if xs[idx] > best {
                                best = xs[idx];
                                best_idx = idx;
                            }
                        }
                    }
                    out.push(best);
                    arg.push(best_idx);
                }
            }
        }
        Ok((
            Tensor::new(vec![c, to, wo], out)?,
            Cache::Argmax {
                indices: arg,
                input_shape: x.shape().to_vec(),
            },
        ))
    }

    fn backward(
        &self,
        cache: &Cache,
        grad_out: &Tensor,
        _grads: &mut [Vec<f64>],
    ) -> Result<Tensor> {
        let Cache::Argmax {
            indices,
            input_shape,
        } = cache
        else {
            return Err(unexpected_cache("max_pool"));
        };
        let mut dx = vec![0.0; input_shape.iter().product()];
        for (&i, g) in indices.iter().zip(grad_out.data()) {
            dx[i] += g;
        }
        Tensor::new(input_shape.clone(), dx)
    }
}

/// Mean pooling over non-overlapping blocks of `stride` time steps of a
/// `[time][features]` sequence.
#[derive(Debug, Clone, Copy)]
pub struct TemporalAvgPool {
    pub(crate) stride: usize,
}

impl TemporalAvgPool {
    pub fn new(stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(NnError::InvalidConfig(
                "temporal pool stride must be positive".into(),
            ));
        }
        Ok(Self { stride })
    }
}

impl Layer for TemporalAvgPool {
    fn name(&self) -> &'static str {
        "temporal_avg_pool"
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        if input.len() != 2 {
            return Err(NnError::ShapeMismatch {
                layer: "temporal_avg_pool",
                dim: "rank",
                expected: 2,
                found: input.len(),
            });
        }
        if input[0] < self.stride {
            return Err(NnError::ShapeMismatch {
                layer: "temporal_avg_pool",
                dim: "time (at least stride)",
                expected: self.stride,
                found: input[0],
            });
        }
        Ok(vec![input[0] / self.stride, input[1]])
    }

    fn forward(&self, x: &Tensor, _ctx: &mut ForwardCtx<'_>) -> Result<(Tensor, Cache)> {
        let shape = self.output_shape(x.shape())?;
        let (to, f) = (shape[0], shape[1]);
        let xs = x.data();
        let scale = 1.0 / self.stride as f64;
        let mut out = vec![0.0; to * f];
        for (i, row) in out.chunks_exact_mut(f).enumerate() {
            for k in 0..self.stride {
                let src = &xs[(i * self.stride + k) * f..(i * self.stride + k + 1) * f];
                for (d, s) in row.iter_mut().zip(src) {
                    *d += s;
                }
            }
            row.iter_mut().for_each(|v| *v *= scale);
        }
        Ok((Tensor::new(shape, out)?, Cache::Shape(x.shape().to_vec())))
    }

    fn backward(
        &self,
        cache: &Cache,
        grad_out: &Tensor,
        _grads: &mut [Vec<f64>],
    ) -> Result<Tensor> {
        let Cache::Shape(input_shape) = cache else {
            return Err(unexpected_cache("temporal_avg_pool"));
        };
        let f = input_shape[1];
        let scale = 1.0 / self.stride as f64;
        let mut dx = vec![0.0; input_shape.iter().product()];
        for (i, g) in grad_out.data().chunks_exact(f).enumerate() {
            for k in 0..self.stride {
                let dst = &mut dx[(i * self.stride + k) * f..(i * self.stride + k + 1) * f];
                for (d, gv) in dst.iter_mut().zip(g) {
                    *d = gv * scale;
                }
            }
        }
        Tensor::new(input_shape.clone(), dx)
    }
}
