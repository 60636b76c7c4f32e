//! Fine-tuning against universal perturbations: adaptive-magnitude
//! perturbation mixing and the recompute-and-remeasure robustness loop.

use crate::error::{Error, Result};
use crate::models::{accuracy, train, Model, SampleSet, TrainConfig};
use crate::numerics::{lp_norm, RngStream, Tensor};
use crate::universal::{compute_universal, fooling_rate, Perturbation, UniversalConfig};

/// A set of precomputed universal perturbations sharing their norm order,
/// budget, and model provenance. Members must be nonzero and within
/// budget.
#[derive(Debug, Clone)]
pub struct PerturbationPool {
    members: Vec<Perturbation>,
}

impl PerturbationPool {
    pub fn new(members: Vec<Perturbation>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Config("perturbation pool must be nonempty".into()));
        }
        let (p, xi) = (members[0].p, members[0].xi);
        for (i, m) in members.iter().enumerate() {
            if m.p != p || m.xi != xi {
                return Err(Error::Config(format!(
                    "pool member {i} has (p, xi) = ({}, {}) but the pool uses ({}, {})",
                    m.p, m.xi, p, xi
                )));
            }
            let norm = lp_norm(&m.v, m.p)?;
            if norm > xi * (1.0 + 1e-9) {
                return Err(Error::Config(format!(
                    "pool member {i} exceeds its budget: |v|_{p} = {norm} > {xi}"
                )));
            }
            if norm == 0.0 {
                return Err(Error::Config(format!("pool member {i} is the zero vector")));
            }
        }
        Ok(PerturbationPool { members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn member(&self, i: usize) -> &Perturbation {
        &self.members[i]
    }
}

pub const DEFAULT_ALPHA_MAX: f64 = 10.0;

/// Smallest coefficient `alpha` in `(0, alpha_max]` with
/// `predict(x + alpha v) != predict(x)`, or `None` when no such
/// coefficient exists below the cap.
///
/// A doubling search brackets the first label change along the ray and a
/// 30-step bisection pins it down, so the result is the first crossing the
/// bracket meets, minimal up to bisection tolerance.
pub fn adaptive_magnitude(
    model: &Model,
    x: &Tensor,
    v: &Tensor,
    alpha_max: f64,
) -> Result<Option<f64>> {
    if v.data().iter().all(|&c| c == 0.0) {
        return Err(Error::Domain("adaptive magnitude of a zero vector".into()));
    }
    if !(alpha_max > 0.0) {
        return Err(Error::Config(format!("alpha_max must be positive, got {alpha_max}")));
    }
    let clean = model.predict(x)?;
    let fools = |alpha: f64| -> Result<bool> {
        Ok(model.predict(&x.add(&v.scale(alpha))?)? != clean)
    };

    let mut lo = 0.0;
    let mut hi = alpha_max * 2f64.powi(-30);
    loop {
        if fools(hi)? {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if hi >= alpha_max {
            if fools(alpha_max)? {
                hi = alpha_max;
                break;
            }
            return Ok(None);
        }
    }
    for _ in 0..30 {
        let mid = 0.5 * (lo + hi);
        if fools(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(hi))
}

/// Builds the mixed training set for one epoch: each sample is replaced by
/// `x + alpha v` with probability `mix_prob`, for a pool member chosen
/// uniformly and `alpha` the adaptive magnitude (falling back to
/// `alpha = 1` when no crossing exists). Labels stay clean. Returns the
/// set and how many samples were perturbed.
pub fn mix_with_pool(
    model: &Model,
    trainset: &SampleSet,
    pool: &PerturbationPool,
    mix_prob: f64,
    alpha_max: f64,
    rng: &mut RngStream,
) -> Result<(SampleSet, usize)> {
    if !(0.0..=1.0).contains(&mix_prob) {
        return Err(Error::Config(format!("mix_prob must lie in [0, 1], got {mix_prob}")));
    }
    let mut inputs = Vec::with_capacity(trainset.len());
    let mut perturbed = 0usize;
    for i in 0..trainset.len() {
        let x = trainset.input(i);
        if rng.next_f64() < mix_prob {
            let member = pool.member(rng.index(pool.len()));
            let alpha = adaptive_magnitude(model, x, &member.v, alpha_max)?.unwrap_or(1.0);
            inputs.push(x.add(&member.v.scale(alpha))?);
            perturbed += 1;
        } else {
            inputs.push(x.clone());
        }
    }
    let mixed = SampleSet::new(inputs, trainset.labels().to_vec(), trainset.name())?;
    Ok((mixed, perturbed))
}

const FINETUNE_SEED_LANE: u64 = 0x66_74_75_6E_65; // distinct trainer seeds per epoch

/// Fine-tunes `model` for `epochs` epochs, rebuilding the mixed training
/// set before each epoch against the current parameters. Training runs at
/// one tenth of the base learning rate.
pub fn finetune_with_pool(
    model: &Model,
    trainset: &SampleSet,
    pool: &PerturbationPool,
    epochs: usize,
    mix_prob: f64,
    alpha_max: f64,
    base_cfg: &TrainConfig,
    rng: &mut RngStream,
) -> Result<Model> {
    if epochs < 1 {
        return Err(Error::Config("fine-tuning needs at least one epoch".into()));
    }
    let mut current = model.clone();
    for epoch in 0..epochs {
        let (mixed, _) = mix_with_pool(&current, trainset, pool, mix_prob, alpha_max, rng)?;
        let cfg = TrainConfig {
            learning_rate: base_cfg.learning_rate * 0.1,
            epochs: 1,
            batch_size: base_cfg.batch_size,
            seed: base_cfg.seed ^ FINETUNE_SEED_LANE ^ (epoch as u64),
            weight_decay: base_cfg.weight_decay,
        };
        current = train(&current, &mixed, &cfg)?.model;
    }
    Ok(current)
}

/// One row of the robustness loop's report.
#[derive(Debug, Clone)]
pub struct RoundReport {
    pub round: usize,
    /// Validation fooling rate of a freshly recomputed universal
    /// perturbation against the current model.
    pub fresh_fooling_rate: f64,
    /// Clean validation accuracy of the current model.
    pub clean_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct RobustnessConfig {
    pub universal: UniversalConfig,
    pub train: TrainConfig,
    pub pool_size: usize,
    pub finetune_epochs: usize,
    pub mix_prob: f64,
    pub alpha_max: f64,
    /// Use only the first `x_size` training samples as the construction
    /// set X for universal perturbations (all of them when `None`).
    pub x_size: Option<usize>,
    pub seed: u64,
}

impl Default for RobustnessConfig {
    fn default() -> Self {
        RobustnessConfig {
            universal: UniversalConfig::default(),
            train: TrainConfig::default(),
            pool_size: 10,
            finetune_epochs: 5,
            mix_prob: 0.5,
            alpha_max: DEFAULT_ALPHA_MAX,
            x_size: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RobustnessOutcome {
    /// Round 0: the original model measured before any fine-tuning.
    pub baseline: RoundReport,
    pub rounds: Vec<RoundReport>,
    pub model: Model,
}

/// Alternates pool computation, fine-tuning, and fresh-perturbation
/// measurement for `rounds` rounds.
pub fn robustness_iteration(
    model: &Model,
    trainset: &SampleSet,
    valset: &SampleSet,
    cfg: &RobustnessConfig,
    rounds: usize,
) -> Result<RobustnessOutcome> {
    if rounds < 1 {
        return Err(Error::Config("robustness loop needs at least one round".into()));
    }
    if cfg.pool_size < 1 {
        return Err(Error::Config("pool size must be >= 1".into()));
    }
    let x_set = match cfg.x_size {
        Some(n) if n < trainset.len() => {
            let idx: Vec<usize> = (0..n).collect();
            trainset.subset(&idx, "x")?
        }
        _ => trainset.clone(),
    };

    let mut mix_rng = RngStream::new(cfg.seed);
    let baseline = measure_round(model, &x_set, valset, cfg, 0)?;

    let mut current = model.clone();
    let mut reports = Vec::with_capacity(rounds);
    for round in 1..=rounds {
        let mut members = Vec::with_capacity(cfg.pool_size);
        for j in 0..cfg.pool_size {
            let mut ucfg = cfg.universal.clone();
            ucfg.shuffle_seed = pool_seed(cfg.universal.shuffle_seed, round, j as u64);
            members.push(compute_universal(&current, &x_set, &ucfg)?.perturbation);
        }
        let pool = PerturbationPool::new(members)?;
        current = finetune_with_pool(
            &current,
            trainset,
            &pool,
            cfg.finetune_epochs,
            cfg.mix_prob,
            cfg.alpha_max,
            &cfg.train,
            &mut mix_rng,
        )?;
        reports.push(measure_round(&current, &x_set, valset, cfg, round)?);
    }
    Ok(RobustnessOutcome {
        baseline,
        rounds: reports,
        model: current,
    })
}

fn measure_round(
    model: &Model,
    x_set: &SampleSet,
    valset: &SampleSet,
    cfg: &RobustnessConfig,
    round: usize,
) -> Result<RoundReport> {
    let mut ucfg = cfg.universal.clone();
    ucfg.shuffle_seed = pool_seed(cfg.universal.shuffle_seed, round, 0xF7E5);
    let fresh = compute_universal(model, x_set, &ucfg)?.perturbation;
    let fresh_fooling_rate = fooling_rate(model, valset, &fresh.v)?.rate;
    let clean_accuracy = accuracy(model, valset)?;
    Ok(RoundReport {
        round,
        fresh_fooling_rate,
        clean_accuracy,
    })
}

fn pool_seed(base: u64, round: usize, member: u64) -> u64 {
    base ^ (round as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ member.wrapping_mul(0xC2B2_AE3D_27D4_EB4F)
        ^ 0x706F_6F6C
}
