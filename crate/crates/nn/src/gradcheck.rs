//! Central finite-difference checks of layer backward passes.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::layers::{ForwardCtx, Layer};
use crate::tensor::Tensor;

/// Perturbation used for the central differences.
pub const STEP: f64 = 1e-5;

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Distinct values at least 1e-2 apart, so max-pool argmax and ReLU kinks
/// never move under a [`STEP`] perturbation.
pub fn separated_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|i| (i as f64 - n as f64 / 2.0) * 0.01 + 0.005)
        .collect();
    v.shuffle(rng);
    v
}

// Dropout draws from a fixed-seed rng so every evaluation sees the same mask.
fn objective(layer: &dyn Layer, x: &Tensor, weights: &[f64]) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut ctx = ForwardCtx {
        training: true,
        rng: Some(&mut rng),
    };
    let (y, _) = layer.forward(x, &mut ctx).expect("forward succeeds");
    y.data().iter().zip(weights).map(|(a, b)| a * b).sum()
}

/// Worst relative error between the analytic and numeric gradients of a
/// random linear functional of the layer output, over every input and
/// parameter entry.
pub fn check_layer(layer: &mut dyn Layer, input: Tensor, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let out_shape = layer
        .output_shape(input.shape())
        .expect("valid input shape");
    let weights = random_vec(&mut rng, out_shape.iter().product());

    let mut drng = ChaCha8Rng::seed_from_u64(99);
    let mut ctx = ForwardCtx {
        training: true,
        rng: Some(&mut drng),
    };
    let (y, cache) = layer.forward(&input, &mut ctx).expect("forward succeeds");
    assert_eq!(y.shape(), out_shape.as_slice());
    let mut grads: Vec<Vec<f64>> = layer.params().iter().map(|p| vec![0.0; p.len()]).collect();
    let g_out = Tensor::new(out_shape, weights.clone()).expect("shape matches");
    let dx = layer
        .backward(&cache, &g_out, &mut grads)
        .expect("backward succeeds");
    assert_eq!(dx.shape(), input.shape());

    let mut worst: f64 = 0.0;
    for i in 0..input.len() {
        let mut plus = input.clone();
        plus.data_mut()[i] += STEP;
        let mut minus = input.clone();
        minus.data_mut()[i] -= STEP;
        let num =
            (objective(layer, &plus, &weights) - objective(layer, &minus, &weights)) / (2.0 * STEP);
        worst = worst.max(relative_error(dx.data()[i], num));
    }
    for p in 0..layer.params().len() {
        for i in 0..layer.params()[p].len() {
            let orig = layer.params()[p][i];
            layer.params_mut()[p][i] = orig + STEP;
            let fp = objective(layer, &input, &weights);
            layer.params_mut()[p][i] = orig - STEP;
            let fm = objective(layer, &input, &weights);
            layer.params_mut()[p][i] = orig;
            worst = worst.max(relative_error(grads[p][i], (fp - fm) / (2.0 * STEP)));
        }
    }
    worst
}
