use rand::RngCore;

use super::{glorot, unexpected_cache, Cache, ForwardCtx, Layer};
use crate::error::{check_dim, NnError, Result};
use crate::tensor::Tensor;

/// Single-direction LSTM unrolled over a `[time][features]` sequence.
/// Emits the final hidden state `[hidden]`.
///
/// Gate blocks are stacked in the order input, forget, candidate, output
/// in `w_input` (`[4H][F]`), `w_hidden` (`[4H][H]`) and `bias` (`[4H]`).
#[derive(Debug, Clone)]
pub struct Lstm {
    pub(crate) inputs: usize,
    pub(crate) hidden: usize,
    pub(crate) w_input: Vec<f64>,
    pub(crate) w_hidden: Vec<f64>,
    pub(crate) bias: Vec<f64>,
}

/// Per-step activations kept for backpropagation through time.
#[derive(Debug, Clone)]
pub struct LstmCache {
    input: Tensor,
    /// `[T+1][H]`, row 0 is the zero initial state.
    hs: Vec<f64>,
    cs: Vec<f64>,
    /// activated gates `[T][4H]`
    gates: Vec<f64>,
    /// `tanh(c_t)`, `[T][H]`
    tanh_c: Vec<f64>,
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

impl Lstm {
    pub fn new(inputs: usize, hidden: usize, rng: &mut dyn RngCore) -> Self {
        let mut bias = vec![0.0; 4 * hidden];
        // forget-gate bias of one keeps early gradients flowing
        bias[hidden..2 * hidden].fill(1.0);
        Self {
            inputs,
            hidden,
            w_input: glorot(rng, inputs, 4 * hidden, 4 * hidden * inputs),
            w_hidden: glorot(rng, hidden, 4 * hidden, 4 * hidden * hidden),
            bias,
        }
    }

    fn steps(&self, shape: &[usize]) -> Result<usize> {
        check_dim("lstm", "rank", 2, shape.len())?;
        check_dim("lstm", "features", self.inputs, shape[1])?;
        if shape[0] == 0 {
            return Err(NnError::ShapeMismatch {
                layer: "lstm",
                dim: "time (at least 1)",
                expected: 1,
                found: 0,
            });
        }
        Ok(shape[0])
    }
}

impl Layer for Lstm {
    fn name(&self) -> &'static str {
        "lstm"
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        self.steps(input)?;
        Ok(vec![self.hidden])
    }

    fn forward(&self, x: &Tensor, _ctx: &mut ForwardCtx<'_>) -> Result<(Tensor, Cache)> {
        let steps = self.steps(x.shape())?;
        let (f, h) = (self.inputs, self.hidden);
        let xs = x.data();
        let mut hs = vec![0.0; (steps + 1) * h];
        let mut cs = vec![0.0; (steps + 1) * h];
        let mut gates = vec![0.0; steps * 4 * h];
        let mut tanh_c = vec![0.0; steps * h];
        let mut z = vec![0.0; 4 * h];
        for t in 0..steps {
            let x_t = &xs[t * f..(t + 1) * f];
            let h_prev = &hs[t * h..(t + 1) * h];
            for (r, zr) in z.iter_mut().enumerate() {
                let wi = &self.w_input[r * f..(r + 1) * f];
                let wh = &self.w_hidden[r * h..(r + 1) * h];
                let mut acc = self.bias[r];
                for (a, b) in wi.iter().zip(x_t) {
                    acc += a * b;
                }
                for (a, b) in wh.iter().zip(h_prev) {
                    acc += a * b;
                }
                *zr = acc;
            }
            let g = &mut gates[t * 4 * h..(t + 1) * 4 * h];
            for k in 0..h {
                g[k] = sigmoid(z[k]);
                g[h + k] = sigmoid(z[h + k]);
                g[2 * h + k] = z[2 * h + k].tanh();
                g[3 * h + k] = sigmoid(z[3 * h + k]);
            }
            for k in 0..h {
                let c = g[h + k] * cs[t * h + k] + g[k] * g[2 * h + k];
                let tc = c.tanh();
                cs[(t + 1) * h + k] = c;
                tanh_c[t * h + k] = tc;
                hs[(t + 1) * h + k] = g[3 * h + k] * tc;
            }
        }
        let out = hs[steps * h..].to_vec();
        Ok((
            Tensor::new(vec![h], out)?,
            Cache::Lstm(Box::new(LstmCache {
                input: x.clone(),
                hs,
                cs,
                gates,
                tanh_c,
            })),
        ))
    }

    fn backward(&self, cache: &Cache, grad_out: &Tensor, grads: &mut [Vec<f64>]) -> Result<Tensor> {
        let Cache::Lstm(c) = cache else {
            return Err(unexpected_cache("lstm"));
        };
        let (f, h) = (self.inputs, self.hidden);
        check_dim("lstm", "gradient length", h, grad_out.len())?;
        let steps = c.input.shape()[0];
        let xs = c.input.data();
        let [gwi, gwh, gb] = grads else {
            return Err(NnError::InvalidConfig(
                "lstm expects three gradient buffers".into(),
            ));
        };
        let mut dx = vec![0.0; xs.len()];
        let mut dh = grad_out.data().to_vec();
        let mut dc = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        let mut dh_prev = vec![0.0; h];
        for t in (0..steps).rev() {
            let g = &c.gates[t * 4 * h..(t + 1) * 4 * h];
            let tc = &c.tanh_c[t * h..(t + 1) * h];
            let c_prev = &c.cs[t * h..(t + 1) * h];
            for k in 0..h {
                let (i, fg, cand, o) = (g[k], g[h + k], g[2 * h + k], g[3 * h + k]);
                let d_o = dh[k] * tc[k];
                let dct = dc[k] + dh[k] * o * (1.0 - tc[k] * tc[k]);
                dz[k] = dct * cand * i * (1.0 - i);
                dz[h + k] = dct * c_prev[k] * fg * (1.0 - fg);
                dz[2 * h + k] = dct * i * (1.0 - cand * cand);
                dz[3 * h + k] = d_o * o * (1.0 - o);
                dc[k] = dct * fg;
            }
            let x_t = &xs[t * f..(t + 1) * f];
            let h_prev = &c.hs[t * h..(t + 1) * h];
            let dx_t = &mut dx[t * f..(t + 1) * f];
            dh_prev.fill(0.0);
            for (r, &d) in dz.iter().enumerate() {
                gb[r] += d;
                let wi = &self.w_input[r * f..(r + 1) * f];
                let gwi_r = &mut gwi[r * f..(r + 1) * f];
                for k in 0..f {
                    gwi_r[k] += d * x_t[k];
                    dx_t[k] += d * wi[k];
                }
                let wh = &self.w_hidden[r * h..(r + 1) * h];
                let gwh_r = &mut gwh[r * h..(r + 1) * h];
                for k in 0..h {
                    gwh_r[k] += d * h_prev[k];
                    dh_prev[k] += d * wh[k];
                }
            }
            std::mem::swap(&mut dh, &mut dh_prev);
        }
        Tensor::new(c.input.shape().to_vec(), dx)
    }

    fn params(&self) -> Vec<&[f64]> {
        vec![&self.w_input, &self.w_hidden, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.w_input, &mut self.w_hidden, &mut self.bias]
    }

    fn param_names(&self) -> Vec<&'static str> {
        vec!["w_input", "w_hidden", "bias"]
    }
}
