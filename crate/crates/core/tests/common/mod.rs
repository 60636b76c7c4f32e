//! Shared fixtures: Gaussian-blob tasks and trained MLPs.

use univperturb_core::models::{train, Model, SampleSet, TrainConfig, TrainReport};
use univperturb_core::numerics::{RngStream, Tensor};

/// Gaussian blobs: one unit-norm random center per class, isotropic noise.
pub fn make_blobs(
    dim: usize,
    classes: usize,
    per_class: usize,
    noise: f64,
    seed: u64,
) -> SampleSet {
    let mut rng = RngStream::new(seed);
    let mut centers = Vec::with_capacity(classes);
    for _ in 0..classes {
        let dir: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        centers.push(dir.into_iter().map(|v| v / norm).collect::<Vec<f64>>());
    }
    let mut inputs = Vec::with_capacity(classes * per_class);
    let mut labels = Vec::with_capacity(classes * per_class);
    for (class, center) in centers.iter().enumerate() {
        for _ in 0..per_class {
            let x: Vec<f64> = center.iter().map(|c| c + noise * rng.normal()).collect();
            inputs.push(Tensor::vector(x).unwrap());
            labels.push(class);
        }
    }
    SampleSet::new(inputs, labels, "blobs").unwrap()
}

pub fn train_mlp(data: &SampleSet, classes: usize, hidden: &[usize], seed: u64) -> TrainReport {
    let mut rng = RngStream::new(seed);
    let model = Model::mlp(data.dim(), hidden, classes, &mut rng);
    let cfg = TrainConfig {
        epochs: 40,
        seed: seed ^ 0x5EED,
        ..TrainConfig::default()
    };
    train(&model, data, &cfg).unwrap()
}
