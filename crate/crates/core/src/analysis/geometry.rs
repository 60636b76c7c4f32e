//! Decision-boundary geometry: the normals matrix, its singular spectrum
//! against a random control, subspace fooling probes, and the sqrt(d)
//! random-perturbation scaling check.

use crate::attacks::minimal_perturbation;
use crate::error::{Error, Result};
use crate::models::{Model, SampleSet};
use crate::numerics::{l2_norm_slice, sample_sphere, svd, RngStream, Tensor};
use crate::universal::fooling_rate;

/// d x n matrix whose columns are unit-normalized minimal perturbations,
/// each normal to the decision boundary near one sample.
#[derive(Debug, Clone)]
pub struct NormalsMatrix {
    pub matrix: Tensor,
    /// Index (into the sample set) behind each column.
    pub sample_ids: Vec<usize>,
}

/// Attacks every sample and collects the normalized perturbation
/// directions. Fails unless at least 90% of the attacks succeed; the
/// failures are dropped.
pub fn build_normals_matrix(
    model: &Model,
    samples: &SampleSet,
    attack_max_iter: usize,
    overshoot: f64,
) -> Result<NormalsMatrix> {
    if samples.is_empty() {
        return Err(Error::Domain("normals matrix needs samples".into()));
    }
    let d = samples.dim();
    let mut columns: Vec<Vec<f64>> = Vec::new();
    let mut sample_ids = Vec::new();
    for i in 0..samples.len() {
        let res = match minimal_perturbation(model, samples.input(i), attack_max_iter, overshoot) {
            Ok(res) if res.fooled => res,
            _ => continue,
        };
        let norm = l2_norm_slice(res.perturbation.data());
        if norm == 0.0 {
            continue;
        }
        columns.push(res.perturbation.data().iter().map(|v| v / norm).collect());
        sample_ids.push(i);
    }
    let success = columns.len() as f64 / samples.len() as f64;
    if success < 0.9 {
        return Err(Error::Analysis(format!(
            "only {:.1}% of attacks succeeded (need 90%); sample more points",
            success * 100.0
        )));
    }
    let n = columns.len();
    let mut data = vec![0.0; d * n];
    for (j, col) in columns.iter().enumerate() {
        for (i, &v) in col.iter().enumerate() {
            data[i * n + j] = v;
        }
    }
    Ok(NormalsMatrix {
        matrix: Tensor::matrix(d, n, data)?,
        sample_ids,
    })
}

/// Singular spectra of a normals matrix and of an equally shaped control
/// whose columns are drawn uniformly from the unit sphere.
#[derive(Debug, Clone)]
pub struct SpectrumComparison {
    pub sigma_normals: Vec<f64>,
    pub sigma_random: Vec<f64>,
}

pub fn singular_spectrum_comparison(
    normals: &NormalsMatrix,
    rng: &mut RngStream,
) -> Result<SpectrumComparison> {
    let (d, n) = (normals.matrix.rows(), normals.matrix.cols());
    let sigma_normals = svd(&normals.matrix)?.sigma;

    let mut data = vec![0.0; d * n];
    for j in 0..n {
        let col = sample_sphere(d, 1.0, rng)?;
        for (i, &v) in col.data().iter().enumerate() {
            data[i * n + j] = v;
        }
    }
    let control = Tensor::matrix(d, n, data)?;
    let sigma_random = svd(&control)?.sigma;
    Ok(SpectrumComparison {
        sigma_normals,
        sigma_random,
    })
}

/// Fraction of squared singular mass carried by the top `k` values.
pub fn top_energy_fraction(sigma: &[f64], k: usize) -> f64 {
    let total: f64 = sigma.iter().map(|s| s * s).sum();
    if total == 0.0 {
        return 0.0;
    }
    sigma.iter().take(k).map(|s| s * s).sum::<f64>() / total
}

/// A random direction drawn inside the span of the top singular vectors,
/// scaled to norm `xi`, with its fooling rate on the evaluation set.
#[derive(Debug, Clone)]
pub struct SubspaceProbe {
    pub rate: f64,
    pub vector: Tensor,
}

/// Draws a rotation-invariant random unit vector in the span of the first
/// `k` left singular vectors of the normals matrix, scales it to l2 norm
/// `xi`, and evaluates its fooling rate.
///
/// The evaluation set must be disjoint from the samples the matrix was
/// built on; callers own that split discipline.
pub fn subspace_probe(
    normals: &NormalsMatrix,
    k: usize,
    xi: f64,
    evalset: &SampleSet,
    model: &Model,
    rng: &mut RngStream,
) -> Result<SubspaceProbe> {
    if !(xi > 0.0) {
        return Err(Error::Config(format!("probe norm must be positive, got {xi}")));
    }
    let decomp = svd(&normals.matrix)?;
    let rank = matrix_rank(&decomp.sigma);
    if k == 0 || k > rank {
        return Err(Error::Config(format!(
            "subspace dimension {k} outside the matrix rank {rank}"
        )));
    }
    let d = normals.matrix.rows();
    // Gaussian coefficients over the top-k left singular vectors.
    let coeffs: Vec<f64> = (0..k).map(|_| rng.normal()).collect();
    let mut vector = vec![0.0; d];
    for (j, &c) in coeffs.iter().enumerate() {
        for i in 0..d {
            vector[i] += c * decomp.u.get2(i, j);
        }
    }
    let norm = l2_norm_slice(&vector);
    if norm == 0.0 {
        return Err(Error::Numerical("degenerate subspace draw".into()));
    }
    let vector = Tensor::vector(vector.into_iter().map(|v| v * xi / norm).collect())?;
    let rate = fooling_rate(model, evalset, &vector)?.rate;
    Ok(SubspaceProbe { rate, vector })
}

fn matrix_rank(sigma: &[f64]) -> usize {
    let cutoff = sigma.first().copied().unwrap_or(0.0) * 1e-10;
    sigma.iter().filter(|&&s| s > cutoff && s > 0.0).count()
}

/// Per-sample outcome of the random-perturbation scaling check.
#[derive(Debug, Clone)]
pub struct ScalingSample {
    pub sample_id: usize,
    /// Smallest fooling radius along the random direction; `None` when no
    /// radius below the cap fools (censored).
    pub radius: Option<f64>,
    /// l2 norm of the sample's minimal adversarial perturbation.
    pub minimal_norm: f64,
    /// `radius / (sqrt(d) * minimal_norm)`.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct ScalingCheck {
    pub samples: Vec<ScalingSample>,
    pub censored: usize,
    /// Median of the uncensored ratios.
    pub median_ratio: f64,
}

/// For each sample, finds (by bisection) the radius at which a random
/// direction first fools the point, and compares it against
/// `sqrt(d) * ||r(x)||_2` where `r(x)` is the minimal perturbation.
pub fn random_norm_scaling_check(
    model: &Model,
    samples: &SampleSet,
    attack_max_iter: usize,
    overshoot: f64,
    rng: &mut RngStream,
) -> Result<ScalingCheck> {
    if samples.is_empty() {
        return Err(Error::Domain("scaling check needs samples".into()));
    }
    let d = samples.dim();
    let sqrt_d = (d as f64).sqrt();
    let mut out = Vec::new();
    let mut censored = 0usize;

    for i in 0..samples.len() {
        let x = samples.input(i);
        let attack = minimal_perturbation(model, x, attack_max_iter, overshoot)?;
        if !attack.fooled {
            continue;
        }
        let minimal_norm = l2_norm_slice(attack.perturbation.data());
        let clean = model.predict(x)?;
        let direction = sample_sphere(d, 1.0, rng)?;
        let cap = 1e6 * minimal_norm;

        let fools = |t: f64| -> Result<bool> {
            let moved = x.add(&direction.scale(t))?;
            Ok(model.predict(&moved)? != clean)
        };

        let radius = if fools(cap)? {
            // Bisect [0, cap]; 40 halvings pin the crossing radius.
            let mut lo = 0.0;
            let mut hi = cap;
            for _ in 0..40 {
                let mid = 0.5 * (lo + hi);
                if fools(mid)? {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            Some(hi)
        } else {
            censored += 1;
            None
        };

        let ratio = radius.map(|r| r / (sqrt_d * minimal_norm));
        out.push(ScalingSample {
            sample_id: i,
            radius,
            minimal_norm,
            ratio,
        });
    }

    let mut ratios: Vec<f64> = out.iter().filter_map(|s| s.ratio).collect();
    if ratios.is_empty() {
        return Err(Error::Analysis(
            "every sample was censored: no fooling radius below the cap".into(),
        ));
    }
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median_ratio = if ratios.len() % 2 == 1 {
        ratios[ratios.len() / 2]
    } else {
        0.5 * (ratios[ratios.len() / 2 - 1] + ratios[ratios.len() / 2])
    };
    Ok(ScalingCheck {
        samples: out,
        censored,
        median_ratio,
    })
}
