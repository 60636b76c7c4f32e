//! Minibatch SGD on softmax cross-entropy.

use crate::error::{Error, Result};
use crate::models::{accuracy, softmax, Model, SampleSet};
use crate::numerics::{RngStream, Tensor};

/// Training hyperparameters. All randomness (shuffling) flows from `seed`,
/// so a fixed config yields bitwise identical parameters.
#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub weight_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.1,
            epochs: 30,
            batch_size: 32,
            seed: 0,
            weight_decay: 1e-4,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.epochs < 1 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size < 1 {
            return Err(Error::Config("batch size must be >= 1".into()));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Config("weight decay must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: Model,
    pub train_accuracy: f64,
    /// Mean cross-entropy observed during each epoch's pass.
    pub epoch_losses: Vec<f64>,
}

/// Trains a copy of `model` and reports the final training accuracy.
///
/// `cfg.epochs == 0` is accepted and returns the parameters unchanged.
pub fn train(model: &Model, data: &SampleSet, cfg: &TrainConfig) -> Result<TrainReport> {
    if data.dim() != model.input_dim() {
        return Err(Error::Shape(format!(
            "training data has dimension {} but model expects {}",
            data.dim(),
            model.input_dim()
        )));
    }
    if let Some(&bad) = data.labels().iter().find(|&&l| l >= model.num_classes()) {
        return Err(Error::Domain(format!(
            "label {bad} out of range for {} classes",
            model.num_classes()
        )));
    }

    let mut current = model.clone();
    let mut rng = RngStream::new(cfg.seed);
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut order: Vec<usize> = (0..data.len()).collect();

    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            epoch_loss += sgd_step(&mut current, data, batch, cfg)?;
        }
        let mean = epoch_loss / data.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Numerical(format!(
                "training loss became non-finite in epoch {epoch} (lr {}, batch {})",
                cfg.learning_rate, cfg.batch_size
            )));
        }
        epoch_losses.push(mean);
    }

    let train_accuracy = accuracy(&current, data)?;
    Ok(TrainReport {
        model: current,
        train_accuracy,
        epoch_losses,
    })
}

/// One minibatch update. Returns the summed (pre-update) loss of the batch.
fn sgd_step(model: &mut Model, data: &SampleSet, batch: &[usize], cfg: &TrainConfig) -> Result<f64> {
    let num_layers = model.layers.len();
    let mut weight_grads: Vec<Vec<f64>> = model
        .layers
        .iter()
        .map(|l| vec![0.0; l.weight.len()])
        .collect();
    let mut bias_grads: Vec<Vec<f64>> = model
        .layers
        .iter()
        .map(|l| vec![0.0; l.bias.len()])
        .collect();

    let mut loss_sum = 0.0;
    for &idx in batch {
        let x = data.input(idx);
        let label = data.label(idx);
        let trace = model.forward_trace(x)?;
        let logits = trace.output();
        loss_sum += cross_entropy(logits, label);

        // delta at the output: softmax - onehot
        let mut delta = softmax(logits);
        delta[label] -= 1.0;

        for layer_idx in (0..num_layers).rev() {
            let layer = &model.layers[layer_idx];
            for (d, &z) in delta.iter_mut().zip(&trace.preacts[layer_idx]) {
                *d *= layer.activation.derivative(z);
            }
            let input = &trace.activations[layer_idx];
            let cols = layer.weight.cols();
            let wg = &mut weight_grads[layer_idx];
            for (i, d) in delta.iter().enumerate() {
                if *d == 0.0 {
                    continue;
                }
                let row = &mut wg[i * cols..(i + 1) * cols];
                for (g, &a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
                bias_grads[layer_idx][i] += d;
            }
            if layer_idx > 0 {
                let mut next = vec![0.0; cols];
                for (i, d) in delta.iter().enumerate() {
                    if *d == 0.0 {
                        continue;
                    }
                    for (n, w) in next.iter_mut().zip(layer.weight.row(i)) {
                        *n += d * w;
                    }
                }
                delta = next;
            }
        }
    }

    let scale = cfg.learning_rate / batch.len() as f64;
    for (layer, (wg, bg)) in model
        .layers
        .iter_mut()
        .zip(weight_grads.iter().zip(bias_grads.iter()))
    {
        let mut w = layer.weight.data().to_vec();
        for (wv, g) in w.iter_mut().zip(wg) {
            *wv -= scale * g + cfg.learning_rate * cfg.weight_decay * *wv;
        }
        layer.weight = Tensor::matrix(layer.weight.rows(), layer.weight.cols(), w)
            .map_err(|_| Error::Numerical("non-finite weights after update".into()))?;
        let mut b = layer.bias.data().to_vec();
        for (bv, g) in b.iter_mut().zip(bg) {
            *bv -= scale * g;
        }
        layer.bias = Tensor::vector(b)
            .map_err(|_| Error::Numerical("non-finite bias after update".into()))?;
    }
    Ok(loss_sum)
}

fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = logits.iter().map(|&z| (z - max).exp()).sum::<f64>().ln();
    log_sum - (logits[label] - max)
}

/// Mean softmax cross-entropy of a model over a sample set.
pub fn mean_cross_entropy(model: &Model, data: &SampleSet) -> Result<f64> {
    let mut sum = 0.0;
    for i in 0..data.len() {
        let logits = model.forward(data.input(i))?;
        sum += cross_entropy(logits.data(), data.label(i));
    }
    Ok(sum / data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two well-separated Gaussian blobs in the plane.
    fn blobs(n_per_class: usize, seed: u64) -> SampleSet {
        let mut rng = RngStream::new(seed);
        let mut inputs = Vec::new();
        let mut labels = Vec::new();
        for class in 0..2 {
            let center = if class == 0 { -2.0 } else { 2.0 };
            for _ in 0..n_per_class {
                inputs.push(
                    Tensor::vector(vec![
                        center + 0.4 * rng.normal(),
                        -center + 0.4 * rng.normal(),
                    ])
                    .unwrap(),
                );
                labels.push(class);
            }
        }
        SampleSet::new(inputs, labels, "blobs").unwrap()
    }

    #[test]
    fn separable_blobs_reach_high_accuracy() {
        let data = blobs(50, 1);
        let mut rng = RngStream::new(2);
        let model = Model::mlp(2, &[8], 2, &mut rng);
        let cfg = TrainConfig {
            epochs: 50,
            ..TrainConfig::default()
        };
        let report = train(&model, &data, &cfg).unwrap();
        assert!(
            report.train_accuracy >= 0.99,
            "accuracy {}",
            report.train_accuracy
        );
    }

    #[test]
    fn zero_epochs_leaves_parameters_unchanged() {
        let data = blobs(10, 3);
        let mut rng = RngStream::new(4);
        let model = Model::affine(2, 2, &mut rng);
        let cfg = TrainConfig {
            epochs: 0,
            ..TrainConfig::default()
        };
        let report = train(&model, &data, &cfg).unwrap();
        for (before, after) in model.layers().iter().zip(report.model.layers()) {
            assert_eq!(before.weight.data(), after.weight.data());
            assert_eq!(before.bias.data(), after.bias.data());
        }
    }

    #[test]
    fn fixed_seed_is_bitwise_reproducible() {
        let data = blobs(20, 5);
        let mut rng = RngStream::new(6);
        let model = Model::mlp(2, &[6], 2, &mut rng);
        let cfg = TrainConfig {
            epochs: 5,
            seed: 77,
            ..TrainConfig::default()
        };
        let a = train(&model, &data, &cfg).unwrap();
        let b = train(&model, &data, &cfg).unwrap();
        for (la, lb) in a.model.layers().iter().zip(b.model.layers()) {
            assert_eq!(la.weight.data(), lb.weight.data());
            assert_eq!(la.bias.data(), lb.bias.data());
        }
    }

    #[test]
    fn first_epoch_decreases_loss_on_separable_data() {
        let data = blobs(30, 7);
        let mut rng = RngStream::new(8);
        let model = Model::mlp(2, &[8], 2, &mut rng);
        let before = mean_cross_entropy(&model, &data).unwrap();
        let cfg = TrainConfig {
            epochs: 1,
            ..TrainConfig::default()
        };
        let report = train(&model, &data, &cfg).unwrap();
        let after = mean_cross_entropy(&report.model, &data).unwrap();
        assert!(after < before, "loss did not decrease: {before} -> {after}");
    }

    #[test]
    fn rejects_out_of_range_labels() {
        let x = Tensor::vector(vec![0.0, 0.0]).unwrap();
        let data = SampleSet::new(vec![x], vec![5], "bad").unwrap();
        let mut rng = RngStream::new(9);
        let model = Model::affine(2, 2, &mut rng);
        assert!(train(&model, &data, &TrainConfig::default()).is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = TrainConfig::default();
        assert!(cfg.validate().is_ok());
        cfg.learning_rate = 0.0;
        assert!(cfg.validate().is_err());
        cfg.learning_rate = 0.1;
        cfg.epochs = 0;
        assert!(cfg.validate().is_err());
    }
}
