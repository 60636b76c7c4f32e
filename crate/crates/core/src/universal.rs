//! Construction of universal (input-agnostic) perturbations.
//!
//! The algorithm passes over a sample set in shuffled order, aggregates
//! per-sample minimal perturbations of the still-unfooled points, and
//! projects the running vector back onto the lp ball of radius `xi` after
//! every update. It stops once the fooling rate on the set exceeds
//! `1 - delta`, or after `max_passes` passes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::attacks::minimal_perturbation;
use crate::error::{Error, Result};
use crate::models::{Model, SampleSet};
use crate::numerics::{lp_norm, NormOrder, RngStream, Tensor};

/// A universal perturbation with its budget and provenance.
#[derive(Debug, Clone)]
pub struct Perturbation {
    pub v: Tensor,
    pub p: NormOrder,
    pub xi: f64,
    pub model_id: String,
    pub seed: u64,
    pub passes: u32,
    pub converged: bool,
}

/// Parameters of the universal-perturbation construction.
#[derive(Debug, Clone)]
pub struct UniversalConfig {
    pub p: NormOrder,
    pub xi: f64,
    /// Target residual accuracy: the loop stops when the fooling rate on
    /// the sample set exceeds `1 - delta`.
    pub delta: f64,
    pub max_passes: usize,
    pub shuffle_seed: u64,
    pub overshoot: f64,
    pub attack_max_iter: usize,
    pub model_id: String,
}

impl Default for UniversalConfig {
    fn default() -> Self {
        UniversalConfig {
            p: NormOrder::LInf,
            xi: 1.0,
            delta: 0.2,
            max_passes: 10,
            shuffle_seed: 0,
            overshoot: 0.02,
            attack_max_iter: 50,
            model_id: "model".into(),
        }
    }
}

impl UniversalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.xi > 0.0 && self.xi.is_finite()) {
            return Err(Error::Config(format!("xi must be positive, got {}", self.xi)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if self.max_passes < 1 {
            return Err(Error::Config("max_passes must be >= 1".into()));
        }
        if self.attack_max_iter < 1 {
            return Err(Error::Config("attack_max_iter must be >= 1".into()));
        }
        if !(self.overshoot >= 0.0) {
            return Err(Error::Config("overshoot must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Evaluation of a perturbation against clean predictions.
#[derive(Debug, Clone)]
pub struct FoolingReport {
    /// Fraction of samples whose prediction changed.
    pub rate: f64,
    pub flipped: Vec<bool>,
    /// (clean prediction, perturbed prediction) per sample.
    pub label_pairs: Vec<(usize, usize)>,
}

/// Result of `compute_universal`, with per-pass diagnostics.
#[derive(Debug, Clone)]
pub struct UniversalOutcome {
    pub perturbation: Perturbation,
    /// Fooling rate of the returned vector on the construction set.
    pub final_rate: f64,
    /// Fooling rate measured at the end of each pass.
    pub pass_rates: Vec<f64>,
    /// Points skipped because the inner attack failed numerically.
    pub skipped_points: usize,
}

/// Slack on the lp budget: one projection plus accumulated rounding stays
/// within this relative margin, and re-projection is then an exact no-op.
const BUDGET_SLACK: f64 = 1e-10;

/// l2-nearest point of the lp ball of radius `xi`: elementwise clamp for
/// p = inf, radial scaling for p = 2. Idempotent.
pub fn project_lp(v: &Tensor, p: NormOrder, xi: f64) -> Result<Tensor> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::Config(format!("projection radius must be positive, got {xi}")));
    }
    match p {
        NormOrder::LInf => Ok(v.clamp(-xi, xi)),
        NormOrder::L2 => {
            let norm = lp_norm(v, NormOrder::L2)?;
            if norm <= xi * (1.0 + BUDGET_SLACK) {
                Ok(v.clone())
            } else {
                Ok(v.scale(xi / norm))
            }
        }
    }
}

/// Fooling rate of `v` on a sample set: the fraction of samples whose
/// prediction under `x + v` differs from the prediction under `x` alone.
/// Reference labels play no part.
pub fn fooling_rate(model: &Model, samples: &SampleSet, v: &Tensor) -> Result<FoolingReport> {
    fooling_rate_clamped(model, samples, v, None)
}

/// `fooling_rate` with an optional elementwise clamp of the perturbed
/// point to `[lo, hi]`, for image-like data with a fixed pixel range.
pub fn fooling_rate_clamped(
    model: &Model,
    samples: &SampleSet,
    v: &Tensor,
    clamp: Option<(f64, f64)>,
) -> Result<FoolingReport> {
    if samples.is_empty() {
        return Err(Error::Domain("fooling_rate over an empty sample set".into()));
    }
    if samples.dim() != v.len() {
        return Err(Error::Shape(format!(
            "perturbation has dimension {} but samples have {}",
            v.len(),
            samples.dim()
        )));
    }
    let mut flipped = Vec::with_capacity(samples.len());
    let mut label_pairs = Vec::with_capacity(samples.len());
    let mut count = 0usize;
    for i in 0..samples.len() {
        let x = samples.input(i);
        let clean = model.predict(x)?;
        let mut moved = x.add(v)?;
        if let Some((lo, hi)) = clamp {
            moved = moved.clamp(lo, hi);
        }
        let perturbed = model.predict(&moved)?;
        let flip = perturbed != clean;
        count += flip as usize;
        flipped.push(flip);
        label_pairs.push((clean, perturbed));
    }
    Ok(FoolingReport {
        rate: count as f64 / samples.len() as f64,
        flipped,
        label_pairs,
    })
}

/// Builds a universal perturbation for `model` over `samples`.
pub fn compute_universal(
    model: &Model,
    samples: &SampleSet,
    cfg: &UniversalConfig,
) -> Result<UniversalOutcome> {
    compute_universal_observed(model, samples, cfg, &mut |_| {})
}

/// `compute_universal` with an observer invoked after every projection,
/// for mid-run instrumentation (budget assertions, tracing).
pub fn compute_universal_observed(
    model: &Model,
    samples: &SampleSet,
    cfg: &UniversalConfig,
    observer: &mut dyn FnMut(&Tensor),
) -> Result<UniversalOutcome> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Domain("universal perturbation needs a nonempty set".into()));
    }
    if samples.dim() != model.input_dim() {
        return Err(Error::Shape(format!(
            "samples have dimension {} but model expects {}",
            samples.dim(),
            model.input_dim()
        )));
    }

    let clean_labels: Vec<usize> = samples
        .inputs()
        .iter()
        .map(|x| model.predict(x))
        .collect::<Result<_>>()?;

    let mut v = Tensor::zeros(vec![samples.dim()]);
    let mut rng = RngStream::new(cfg.shuffle_seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut pass_rates = Vec::new();
    let mut skipped_points = 0usize;
    let mut converged = false;
    let mut passes = 0u32;

    while (passes as usize) < cfg.max_passes {
        rng.shuffle(&mut order);
        for &i in &order {
            let point = samples.input(i).add(&v)?;
            if model.predict(&point)? != clean_labels[i] {
                continue; // already fooled under the current v
            }
            match minimal_perturbation(model, &point, cfg.attack_max_iter, cfg.overshoot) {
                Ok(res) if res.fooled => {
                    v = project_lp(&v.add(&res.perturbation)?, cfg.p, cfg.xi)?;
                    observer(&v);
                }
                Ok(_) => {} // attack hit its iteration cap: leave the point for a later pass
                Err(Error::Numerical(_)) => skipped_points += 1,
                Err(other) => return Err(other),
            }
        }
        passes += 1;
        let rate = fooling_rate(model, samples, &v)?.rate;
        pass_rates.push(rate);
        if rate > 1.0 - cfg.delta {
            converged = true;
            break;
        }
    }

    let final_rate = *pass_rates.last().unwrap();
    Ok(UniversalOutcome {
        perturbation: Perturbation {
            v,
            p: cfg.p,
            xi: cfg.xi,
            model_id: cfg.model_id.clone(),
            seed: cfg.shuffle_seed,
            passes,
            converged,
        },
        final_rate,
        pass_rates,
        skipped_points,
    })
}

const FORMAT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct PerturbationFile {
    format_version: u32,
    p: String,
    xi: f64,
    dim: usize,
    data: Vec<f64>,
    model_id: String,
    seed: u64,
    passes: u32,
    converged: bool,
}

pub fn save_perturbation(p: &Perturbation, path: impl AsRef<Path>) -> Result<()> {
    let file = PerturbationFile {
        format_version: FORMAT_VERSION,
        p: p.p.as_str().to_string(),
        xi: p.xi,
        dim: p.v.len(),
        data: p.v.data().to_vec(),
        model_id: p.model_id.clone(),
        seed: p.seed,
        passes: p.passes,
        converged: p.converged,
    };
    std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

pub fn load_perturbation(path: impl AsRef<Path>) -> Result<Perturbation> {
    let text = std::fs::read_to_string(&path)?;
    let file: PerturbationFile = serde_json::from_str(&text)?;
    if file.format_version != FORMAT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: file.format_version,
            expected: FORMAT_VERSION,
        });
    }
    if file.data.len() != file.dim {
        return Err(Error::Parse(format!(
            "perturbation declares dim {} but carries {} values",
            file.dim,
            file.data.len()
        )));
    }
    Ok(Perturbation {
        v: Tensor::vector(file.data).map_err(|e| Error::Parse(e.to_string()))?,
        p: NormOrder::parse(&file.p).map_err(|e| Error::Parse(e.to_string()))?,
        xi: file.xi,
        model_id: file.model_id,
        seed: file.seed,
        passes: file.passes,
        converged: file.converged,
    })
}
