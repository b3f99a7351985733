use std::time::Instant;

use gaitnet::{Architecture, Model, ModelConfig, TrainConfig, Trainer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let arch: Architecture = std::env::args()
        .nth(1)
        .unwrap_or("lstm".into())
        .parse()
        .unwrap();
    let n: usize = std::env::args()
        .nth(2)
        .map(|s| s.parse().unwrap())
        .unwrap_or(256);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let data: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..500 * 12).map(|_| rng.random()).collect())
        .collect();
    let labels: Vec<usize> = (0..n).map(|i| i % 4).collect();
    let refs: Vec<&[f64]> = data.iter().map(|v| v.as_slice()).collect();
    let mut model = Model::new(ModelConfig::new(arch, 500, 12), 1).unwrap();
    let mut t = Trainer::new(&mut model, TrainConfig::default()).unwrap();
    let start = Instant::now();
    let s = t.run_epoch(&refs, &labels).unwrap();
    let dt = start.elapsed().as_secs_f64();
    println!(
        "{arch}: {n} windows in {dt:.2}s ({:.3} ms/window) loss {}",
        dt * 1e3 / n as f64,
        s.loss
    );
}
