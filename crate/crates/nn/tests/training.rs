use gaitnet::io::params_to_bytes;
use gaitnet::{accuracy, train, Architecture, Model, ModelConfig, TrainConfig, Trainer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 32 windows whose label is carried by a per-class waveform plus noise.
fn toy_set(window_len: usize, n_features: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for i in 0..32 {
        let label = i % 4;
        let freq = 1.0 + label as f64;
        let w: Vec<f64> = (0..window_len * n_features)
            .map(|k| {
                let t = (k / n_features) as f64 / window_len as f64;
                0.5 + 0.4 * (std::f64::consts::TAU * freq * t + (k % n_features) as f64).sin()
                    + rng.random_range(-0.05..0.05)
            })
            .collect();
        data.push(w);
        labels.push(label);
    }
    (data, labels)
}

fn refs(data: &[Vec<f64>]) -> Vec<&[f64]> {
    data.iter().map(|v| v.as_slice()).collect()
}

fn small_cfg(arch: Architecture) -> ModelConfig {
    let mut cfg = ModelConfig::new(arch, 60, 4);
    cfg.cnn.filters = vec![4, 6];
    cfg.cnn.kernels = vec![3, 3];
    cfg.cnn.pools = vec![(2, 2), (3, 1)];
    cfg.cnn.dense_units = 16;
    cfg.cnn.dropout = 0.2;
    cfg.lstm.units = 8;
    cfg.lstm.input_pool = 3;
    cfg.lstm.dense_units = 8;
    cfg
}

#[test]
fn zero_learning_rate_leaves_parameters_unchanged() {
    let (data, labels) = toy_set(60, 4, 1);
    for arch in [Architecture::Cnn, Architecture::Lstm] {
        let mut model = Model::new(small_cfg(arch), 5).unwrap();
        let before = params_to_bytes(&model);
        let cfg = TrainConfig {
            learning_rate: 0.0,
            epochs: 3,
            batch_size: 8,
            ..Default::default()
        };
        train(&mut model, &refs(&data), &labels, &cfg).unwrap();
        assert_eq!(params_to_bytes(&model), before);
    }
}

#[test]
fn same_seed_gives_identical_parameters() {
    let (data, labels) = toy_set(60, 4, 2);
    let run = |arch| {
        let mut model = Model::new(small_cfg(arch), 5).unwrap();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 8,
            seed: 11,
            ..Default::default()
        };
        let history = train(&mut model, &refs(&data), &labels, &cfg).unwrap();
        (params_to_bytes(&model), history)
    };
    for arch in [Architecture::Cnn, Architecture::Lstm] {
        assert_eq!(run(arch), run(arch));
    }
}

#[test]
fn full_batch_training_ignores_shuffle_order() {
    let (data, labels) = toy_set(60, 4, 3);
    let run = |shuffle_seed: u64| {
        // reversing the presented order changes the sampled batch order but
        // not the set, so the summed gradient must agree bit for bit
        let mut order: Vec<usize> = (0..data.len()).collect();
        if shuffle_seed % 2 == 1 {
            order.reverse();
        }
        let d: Vec<&[f64]> = order.iter().map(|&i| data[i].as_slice()).collect();
        let l: Vec<usize> = order.iter().map(|&i| labels[i]).collect();
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 32,
            seed: shuffle_seed,
            ..Default::default()
        };
        // dropout masks are keyed by example index, so switch it off here
        let mut c = small_cfg(Architecture::Cnn);
        c.cnn.dropout = 0.0;
        let mut m = Model::new(c, 5).unwrap();
        train(&mut m, &d, &l, &cfg).unwrap();
        params_to_bytes(&m)
    };
    assert_eq!(run(0), run(2));
}

#[test]
fn small_models_memorise_the_toy_set() {
    let (data, labels) = toy_set(60, 4, 4);
    let r = refs(&data);
    for arch in [Architecture::Cnn, Architecture::Lstm] {
        let mut model = Model::new(small_cfg(arch), 7).unwrap();
        let cfg = TrainConfig {
            batch_size: 8,
            learning_rate: 1e-2,
            seed: 3,
            ..Default::default()
        };
        let initial = {
            let probs = model.predict(&r).unwrap();
            probs
                .iter()
                .zip(&labels)
                .map(|(p, &y)| -p[y].ln())
                .sum::<f64>()
                / 32.0
        };
        let mut trainer = Trainer::new(&mut model, cfg).unwrap();
        let mut reached = None;
        for epoch in 0..200 {
            trainer.run_epoch(&r, &labels).unwrap();
            if reached.is_none() && accuracy(trainer.model(), &r, &labels).unwrap() == 1.0 {
                reached = Some(epoch);
            }
        }
        assert!(reached.is_some(), "{arch} did not memorise 32 windows");
        let probs = model.predict(&r).unwrap();
        let fin = probs
            .iter()
            .zip(&labels)
            .map(|(p, &y)| -p[y].ln())
            .sum::<f64>()
            / 32.0;
        assert!(fin * 10.0 <= initial, "{arch}: loss {initial} -> {fin}");
    }
}

#[test]
fn invalid_train_config_is_rejected() {
    let mut model = Model::new(small_cfg(Architecture::Lstm), 1).unwrap();
    let bad = TrainConfig {
        batch_size: 0,
        ..Default::default()
    };
    assert!(Trainer::new(&mut model, bad).is_err());
    for clip_norm in [-1.0, f64::NAN, f64::INFINITY] {
        let bad = TrainConfig {
            clip_norm,
            ..Default::default()
        };
        assert!(Trainer::new(&mut model, bad).is_err(), "{clip_norm}");
    }
}

#[test]
fn clipping_above_the_gradient_norm_changes_nothing() {
    let (data, labels) = toy_set(60, 4, 5);
    let run = |clip_norm: f64| {
        let mut model = Model::new(small_cfg(Architecture::Lstm), 5).unwrap();
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 8,
            clip_norm,
            ..Default::default()
        };
        train(&mut model, &refs(&data), &labels, &cfg).unwrap();
        params_to_bytes(&model)
    };
    let unclipped = run(0.0);
    assert_eq!(run(1e12), unclipped);
    assert_ne!(run(1e-6), unclipped);
}
