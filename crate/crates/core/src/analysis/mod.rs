//! Evaluation suite: baseline perturbations, norm sweeps, cross-model
//! transfer, decision-boundary geometry, and the dominant-label graph.

mod geometry;
mod graph;

pub use geometry::{
    build_normals_matrix, random_norm_scaling_check, singular_spectrum_comparison, subspace_probe,
    top_energy_fraction, NormalsMatrix, ScalingCheck, ScalingSample, SpectrumComparison,
    SubspaceProbe,
};
pub use graph::{build_label_graph, ClassFlow, Component, LabelEdge, LabelGraph};

use crate::attacks::{fgs_perturbation, minimal_perturbation};
use crate::error::{Error, Result};
use crate::models::{Model, SampleSet};
use crate::numerics::{lp_norm, sample_sphere, NormOrder, RngStream, Tensor};
use crate::universal::{compute_universal, fooling_rate, UniversalConfig};

/// The comparison perturbations: unscaled directions that a norm sweep
/// rescales to each target magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    RandomSphere,
    SingleAdversarialDf,
    SingleAdversarialFgs,
    SumAdversarial,
    DataMean,
}

impl BaselineKind {
    pub const ALL: [BaselineKind; 5] = [
        BaselineKind::RandomSphere,
        BaselineKind::SingleAdversarialDf,
        BaselineKind::SingleAdversarialFgs,
        BaselineKind::SumAdversarial,
        BaselineKind::DataMean,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            BaselineKind::RandomSphere => "random_sphere",
            BaselineKind::SingleAdversarialDf => "single_adversarial_df",
            BaselineKind::SingleAdversarialFgs => "single_adversarial_fgs",
            BaselineKind::SumAdversarial => "sum_adversarial",
            BaselineKind::DataMean => "data_mean",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown baseline kind {s:?}")))
    }
}

/// Computes an unscaled baseline perturbation vector.
///
/// `random_sphere` draws from the unit sphere; the single-sample kinds
/// attack one randomly picked sample (redrawing up to 10 times if the
/// attack fails); `sum_adversarial` sums minimal perturbations over the
/// whole set; `data_mean` averages the inputs.
pub fn baseline_perturbation(
    model: &Model,
    samples: &SampleSet,
    kind: BaselineKind,
    attack_max_iter: usize,
    overshoot: f64,
    rng: &mut RngStream,
) -> Result<Tensor> {
    if samples.is_empty() {
        return Err(Error::Domain("baseline needs a nonempty sample set".into()));
    }
    let d = samples.dim();
    match kind {
        BaselineKind::RandomSphere => sample_sphere(d, 1.0, rng),
        BaselineKind::SingleAdversarialDf => {
            single_sample_attack(samples, rng, |x| {
                let res = minimal_perturbation(model, x, attack_max_iter, overshoot)?;
                Ok(res.fooled.then_some(res.perturbation))
            })
        }
        BaselineKind::SingleAdversarialFgs => {
            single_sample_attack(samples, rng, |x| {
                let label = model.predict(x)?;
                let res = fgs_perturbation(model, x, label, 1.0)?;
                // A zero sign vector carries no direction; redraw.
                let nonzero = res.perturbation.data().iter().any(|&v| v != 0.0);
                Ok(nonzero.then_some(res.perturbation))
            })
        }
        BaselineKind::SumAdversarial => {
            let mut sum = vec![0.0; d];
            for x in samples.inputs() {
                let res = minimal_perturbation(model, x, attack_max_iter, overshoot)?;
                if res.fooled {
                    for (s, r) in sum.iter_mut().zip(res.perturbation.data()) {
                        *s += r;
                    }
                }
            }
            Tensor::vector(sum)
        }
        BaselineKind::DataMean => {
            let mut mean = vec![0.0; d];
            for x in samples.inputs() {
                for (m, v) in mean.iter_mut().zip(x.data()) {
                    *m += v;
                }
            }
            let inv = 1.0 / samples.len() as f64;
            Tensor::vector(mean.into_iter().map(|v| v * inv).collect())
        }
    }
}

fn single_sample_attack(
    samples: &SampleSet,
    rng: &mut RngStream,
    mut attack: impl FnMut(&Tensor) -> Result<Option<Tensor>>,
) -> Result<Tensor> {
    for _ in 0..10 {
        let idx = rng.index(samples.len());
        if let Some(r) = attack(samples.input(idx))? {
            return Ok(r);
        }
    }
    Err(Error::Analysis(
        "single-sample attack failed on 10 redraws".into(),
    ))
}

/// One point of a norm sweep curve.
#[derive(Debug, Clone, Copy)]
pub struct SweepPoint {
    pub norm: f64,
    pub rate: f64,
}

/// Rescales `perturbation` to each target l2 norm and evaluates its
/// fooling rate. Monotonicity is reported, never assumed.
pub fn norm_sweep(
    model: &Model,
    valset: &SampleSet,
    perturbation: &Tensor,
    norms: &[f64],
) -> Result<Vec<SweepPoint>> {
    let base = lp_norm(perturbation, NormOrder::L2)?;
    if base == 0.0 {
        return Err(Error::Domain("norm_sweep needs a nonzero perturbation".into()));
    }
    let mut curve = Vec::with_capacity(norms.len());
    for &target in norms {
        if target < 0.0 {
            return Err(Error::Config(format!("negative sweep norm {target}")));
        }
        let scaled = perturbation.scale(target / base);
        let rate = if target == 0.0 {
            0.0 // k(x + 0) = k(x) identically
        } else {
            fooling_rate(model, valset, &scaled)?.rate
        };
        curve.push(SweepPoint { norm: target, rate });
    }
    Ok(curve)
}

/// Cross-model fooling rates. Row: the model a perturbation was computed
/// on; column: the model it is evaluated against.
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    pub model_ids: Vec<String>,
    /// `rates[i][j]` = fooling rate of model i's perturbation on model j.
    pub rates: Vec<Vec<f64>>,
}

/// Computes one universal perturbation per model on `x_train` and
/// evaluates every perturbation against every model on `eval`.
pub fn transfer_matrix(
    models: &[(String, Model)],
    x_train: &SampleSet,
    eval: &SampleSet,
    cfg: &UniversalConfig,
) -> Result<TransferMatrix> {
    if models.is_empty() {
        return Err(Error::Config("transfer matrix needs at least one model".into()));
    }
    let dim = models[0].1.input_dim();
    if models.iter().any(|(_, m)| m.input_dim() != dim) {
        return Err(Error::Config(
            "transfer matrix models must share the input dimension".into(),
        ));
    }

    let mut perturbations = Vec::with_capacity(models.len());
    for (id, model) in models {
        let mut model_cfg = cfg.clone();
        model_cfg.model_id = id.clone();
        perturbations.push(compute_universal(model, x_train, &model_cfg)?.perturbation);
    }

    let mut rates = Vec::with_capacity(models.len());
    for p in &perturbations {
        let mut row = Vec::with_capacity(models.len());
        for (_, model) in models {
            row.push(fooling_rate(model, eval, &p.v)?.rate);
        }
        rates.push(row);
    }
    Ok(TransferMatrix {
        model_ids: models.iter().map(|(id, _)| id.clone()).collect(),
        rates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Activation, Layer};

    fn binary_affine(w: Vec<f64>, b: f64) -> Model {
        let d = w.len();
        let mut weights = vec![0.0; 2 * d];
        weights[d..].copy_from_slice(&w);
        Model::new(vec![Layer::new(
            Tensor::matrix(2, d, weights).unwrap(),
            Tensor::vector(vec![0.0, b]).unwrap(),
            Activation::Identity,
        )
        .unwrap()])
        .unwrap()
    }

    fn pair_set(points: Vec<Vec<f64>>, labels: Vec<usize>) -> SampleSet {
        SampleSet::new(
            points.into_iter().map(|p| Tensor::vector(p).unwrap()).collect(),
            labels,
            "test",
        )
        .unwrap()
    }

    #[test]
    fn data_mean_baseline() {
        let model = binary_affine(vec![1.0, 0.0], 0.0);
        let samples = pair_set(vec![vec![1.0, 1.0], vec![3.0, 3.0]], vec![1, 1]);
        let mut rng = RngStream::new(1);
        let mean =
            baseline_perturbation(&model, &samples, BaselineKind::DataMean, 50, 0.02, &mut rng)
                .unwrap();
        assert_eq!(mean.data(), &[2.0, 2.0]);
    }

    #[test]
    fn random_sphere_baseline_is_unit_norm() {
        let model = binary_affine(vec![1.0, 0.0], 0.0);
        let samples = pair_set(vec![vec![1.0, 0.0]], vec![1]);
        let mut rng = RngStream::new(2);
        let v =
            baseline_perturbation(&model, &samples, BaselineKind::RandomSphere, 50, 0.02, &mut rng)
                .unwrap();
        let norm = lp_norm(&v, NormOrder::L2).unwrap();
        assert!((norm - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sum_adversarial_cancels_on_mirror_symmetric_instance() {
        // Boundary x0 = 0, one point on each side at equal distance: the
        // two minimal perturbations are opposite.
        let model = binary_affine(vec![1.0, 0.0], 0.0);
        let samples = pair_set(vec![vec![2.0, 0.0], vec![-2.0, 0.0]], vec![1, 0]);
        let mut rng = RngStream::new(3);
        let sum = baseline_perturbation(
            &model,
            &samples,
            BaselineKind::SumAdversarial,
            50,
            0.02,
            &mut rng,
        )
        .unwrap();
        let norm = lp_norm(&sum, NormOrder::L2).unwrap();
        assert!(norm < 1e-9, "sum should cancel, got norm {norm}");
    }

    #[test]
    fn single_adversarial_baselines_return_directions() {
        let model = binary_affine(vec![1.0, -1.0], 0.3);
        let samples = pair_set(vec![vec![2.0, 0.0], vec![-1.0, 1.0]], vec![1, 0]);
        let mut rng = RngStream::new(4);
        for kind in [
            BaselineKind::SingleAdversarialDf,
            BaselineKind::SingleAdversarialFgs,
        ] {
            let v = baseline_perturbation(&model, &samples, kind, 50, 0.02, &mut rng).unwrap();
            assert!(lp_norm(&v, NormOrder::L2).unwrap() > 0.0);
        }
    }

    #[test]
    fn sweep_zero_norm_rate_is_zero_and_targets_are_exact() {
        let model = binary_affine(vec![1.0, 0.0], 0.0);
        let samples = pair_set(vec![vec![0.5, 0.0], vec![1.5, 0.0]], vec![1, 1]);
        let v = Tensor::vector(vec![-1.0, 0.0]).unwrap();
        let curve = norm_sweep(&model, &samples, &v, &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!(curve[0].rate, 0.0);
        assert!((curve[1].rate - 0.5).abs() < 1e-12);
        assert_eq!(curve[2].rate, 1.0);
        for (point, &target) in curve.iter().zip(&[0.0, 1.0, 2.0]) {
            let scaled = v.scale(target / lp_norm(&v, NormOrder::L2).unwrap());
            let measured = lp_norm(&scaled, NormOrder::L2).unwrap();
            let denom = target.max(1e-300);
            assert!((measured - target).abs() / denom < 1e-9 || target == 0.0);
        }
        assert!(matches!(
            norm_sweep(&model, &samples, &Tensor::zeros(vec![2]), &[1.0]),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn transfer_single_model_is_self_rate() {
        let model = binary_affine(vec![1.0, 0.0], 0.0);
        let train = pair_set(
            vec![vec![0.5, 0.0], vec![1.0, 0.5], vec![-0.8, 0.2], vec![-1.2, -0.4]],
            vec![1, 1, 0, 0],
        );
        let eval = pair_set(vec![vec![0.7, 0.3], vec![-0.9, 0.1]], vec![1, 0]);
        let cfg = UniversalConfig {
            p: NormOrder::L2,
            xi: 3.0,
            delta: 0.4,
            shuffle_seed: 5,
            ..UniversalConfig::default()
        };
        let tm = transfer_matrix(&[("m0".into(), model.clone())], &train, &eval, &cfg).unwrap();
        assert_eq!(tm.rates.len(), 1);
        let rate = tm.rates[0][0];
        assert!((0.0..=1.0).contains(&rate));
    }

    #[test]
    fn identical_models_transfer_identically() {
        let model = binary_affine(vec![1.0, 0.4], 0.1);
        let train = pair_set(
            vec![vec![0.6, 0.0], vec![1.1, 0.2], vec![-0.7, -0.1], vec![-1.3, 0.3]],
            vec![1, 1, 0, 0],
        );
        let eval = pair_set(vec![vec![0.8, 0.1], vec![-0.85, 0.05]], vec![1, 0]);
        let cfg = UniversalConfig {
            p: NormOrder::L2,
            xi: 3.0,
            delta: 0.4,
            shuffle_seed: 6,
            ..UniversalConfig::default()
        };
        let tm = transfer_matrix(
            &[("a".into(), model.clone()), ("b".into(), model.clone())],
            &train,
            &eval,
            &cfg,
        )
        .unwrap();
        // Identical decision functions: each row is constant.
        for row in &tm.rates {
            assert_eq!(row[0], row[1]);
        }
    }

    #[test]
    fn transfer_rejects_mixed_dimensions() {
        let a = binary_affine(vec![1.0, 0.0], 0.0);
        let b = binary_affine(vec![1.0, 0.0, 0.0], 0.0);
        let train = pair_set(vec![vec![0.5, 0.0]], vec![1]);
        let cfg = UniversalConfig::default();
        assert!(matches!(
            transfer_matrix(&[("a".into(), a), ("b".into(), b)], &train, &train, &cfg),
            Err(Error::Config(_))
        ));
    }
}
