//! Attack solvers checked against the closed-form affine oracle.

mod common;

use univperturb_core::attacks::{affine_minimal_oracle, minimal_perturbation};
use univperturb_core::models::{Activation, Layer, Model};
use univperturb_core::numerics::{lp_norm, NormOrder, RngStream, Tensor};

const OVERSHOOT: f64 = 0.02;

fn random_affine(classes: usize, dim: usize, rng: &mut RngStream) -> (Model, Tensor, Vec<f64>) {
    let weights = Tensor::matrix(
        classes,
        dim,
        (0..classes * dim).map(|_| rng.normal()).collect(),
    )
    .unwrap();
    let bias: Vec<f64> = (0..classes).map(|_| rng.normal()).collect();
    let model = Model::new(vec![Layer::new(
        weights.clone(),
        Tensor::vector(bias.clone()).unwrap(),
        Activation::Identity,
    )
    .unwrap()])
    .unwrap();
    (model, weights, bias)
}

#[test]
fn deepfool_matches_oracle_norms_on_random_affine_instances() {
    let mut rng = RngStream::new(2024);
    for trial in 0..50 {
        let classes = 2 + trial % 4;
        let dim = 3 + trial % 10;
        let (model, weights, bias) = random_affine(classes, dim, &mut rng);
        let x = Tensor::vector((0..dim).map(|_| rng.normal()).collect()).unwrap();

        let oracle = affine_minimal_oracle(&weights, &bias, &x).unwrap();
        let attack = minimal_perturbation(&model, &x, 50, OVERSHOOT).unwrap();
        assert!(attack.fooled, "trial {trial}: attack failed on affine model");
        assert!(oracle.fooled, "trial {trial}: oracle failed");

        let oracle_norm = lp_norm(&oracle.perturbation, NormOrder::L2).unwrap();
        let attack_norm = lp_norm(&attack.perturbation, NormOrder::L2).unwrap();
        let ratio = attack_norm / oracle_norm;
        assert!(
            ratio >= 1.0 - 1e-9,
            "trial {trial}: attack beat the exact lower bound, ratio {ratio}"
        );
        assert!(
            ratio <= (1.0 + OVERSHOOT) * (1.0 + 1e-6),
            "trial {trial}: ratio {ratio} above overshoot bound"
        );
    }
}

#[test]
fn deepfool_direction_matches_oracle_on_binary_instances() {
    let mut rng = RngStream::new(2025);
    for trial in 0..30 {
        let dim = 2 + trial % 8;
        let (model, weights, bias) = random_affine(2, dim, &mut rng);
        let x = Tensor::vector((0..dim).map(|_| rng.normal()).collect()).unwrap();
        let oracle = affine_minimal_oracle(&weights, &bias, &x).unwrap();
        let attack = minimal_perturbation(&model, &x, 50, OVERSHOOT).unwrap();
        let dot: f64 = attack
            .perturbation
            .data()
            .iter()
            .zip(oracle.perturbation.data())
            .map(|(a, b)| a * b)
            .sum();
        let cos = dot
            / (lp_norm(&attack.perturbation, NormOrder::L2).unwrap()
                * lp_norm(&oracle.perturbation, NormOrder::L2).unwrap());
        assert!(cos > 0.999, "trial {trial}: direction cosine {cos}");
    }
}

#[test]
fn deepfool_fools_nearly_all_points_on_mlp_blobs() {
    let data = common::make_blobs(10, 4, 50, 0.08, 77);
    let report = common::train_mlp(&data, 4, &[16, 16], 78);
    assert!(report.train_accuracy > 0.95, "fixture underfit");

    let mut fooled = 0;
    let test_points = 100.min(data.len());
    for i in 0..test_points {
        let res = minimal_perturbation(&report.model, data.input(i), 50, OVERSHOOT).unwrap();
        fooled += res.fooled as usize;
        if res.fooled {
            // Validity: the flip must be real.
            let moved = data.input(i).add(&res.perturbation).unwrap();
            assert_ne!(
                report.model.predict(&moved).unwrap(),
                res.original_label
            );
        }
    }
    let rate = fooled as f64 / test_points as f64;
    assert!(rate >= 0.99, "deepfool fooled only {rate} of MLP points");
}
