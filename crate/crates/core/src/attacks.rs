//! Per-sample adversarial perturbation solvers.
//!
//! `minimal_perturbation` approximates the smallest l2 perturbation that
//! changes a prediction by iteratively linearizing every other class
//! boundary and stepping across the nearest one. `fgs_perturbation` is the
//! one-step sign-of-gradient baseline. `affine_minimal_oracle` solves the
//! same subproblem exactly for affine classifiers and anchors the tests.

use crate::error::{Error, Result};
use crate::models::{argmax, Model};
use crate::numerics::{dot, l2_norm_slice, Tensor};

/// Outcome of a single attack.
#[derive(Debug, Clone)]
pub struct AttackResult {
    pub perturbation: Tensor,
    pub iterations: usize,
    pub fooled: bool,
    pub original_label: usize,
    pub new_label: usize,
}

/// Iterative linearization attack (multiclass, l2).
///
/// Each step linearizes the boundaries `f_k - f_orig` at the current
/// point, crosses the one with the smallest distance-to-boundary ratio,
/// and accumulates the step. The returned perturbation carries the final
/// `(1 + overshoot)` scaling that pushes past the boundary; `fooled`
/// reports whether the label actually changed.
pub fn minimal_perturbation(
    model: &Model,
    x: &Tensor,
    max_iter: usize,
    overshoot: f64,
) -> Result<AttackResult> {
    if max_iter < 1 {
        return Err(Error::Config("max_iter must be >= 1".into()));
    }
    if !(overshoot >= 0.0) {
        return Err(Error::Config(format!(
            "overshoot must be nonnegative, got {overshoot}"
        )));
    }
    let d = x.len();
    let num_classes = model.num_classes();
    let original = model.predict(x)?;

    let mut r_total = vec![0.0; d];
    let mut iterations = 0;

    while iterations < max_iter {
        let point = offset_point(x, &r_total, 1.0 + overshoot)?;
        if model.predict(&point)? != original {
            break;
        }
        let logits = model.forward(&point)?;
        let grad_orig = model.input_gradient(&point, original)?;

        // Nearest linearized boundary over all other classes.
        let mut best: Option<(f64, Vec<f64>, f64)> = None; // (ratio, w', |f'|)
        for k in 0..num_classes {
            if k == original {
                continue;
            }
            let grad_k = model.input_gradient(&point, k)?;
            let w: Vec<f64> = grad_k
                .data()
                .iter()
                .zip(grad_orig.data())
                .map(|(a, b)| a - b)
                .collect();
            let w_norm = l2_norm_slice(&w);
            if w_norm == 0.0 {
                continue; // parallel logits, boundary unreachable
            }
            let gap = (logits.data()[k] - logits.data()[original]).abs();
            let ratio = gap / w_norm;
            if best.as_ref().map_or(true, |(r, _, _)| ratio < *r) {
                best = Some((ratio, w, gap));
            }
        }
        let Some((_, w, gap)) = best else {
            break; // every boundary degenerate: cannot move
        };
        let w_sq = dot(&w, &w);
        // Step onto the linearized boundary; for an exact tie, nudge just
        // enough that the overshoot crosses it.
        let magnitude = if gap > 0.0 {
            gap / w_sq
        } else {
            1e-12 * (1.0 + l2_norm_slice(x.data())) / w_sq.sqrt()
        };
        for (r, wi) in r_total.iter_mut().zip(&w) {
            *r += magnitude * wi;
        }
        iterations += 1;
    }

    let perturbation = scaled_tensor(&r_total, 1.0 + overshoot)?;
    let new_label = model.predict(&offset_point(x, &r_total, 1.0 + overshoot)?)?;
    Ok(AttackResult {
        perturbation,
        iterations,
        fooled: new_label != original,
        original_label: original,
        new_label,
    })
}

/// Fast gradient sign perturbation: `epsilon * sign(grad_x L(x, label))`
/// with softmax cross-entropy loss; `sign(0)` is 0.
pub fn fgs_perturbation(
    model: &Model,
    x: &Tensor,
    label: usize,
    epsilon: f64,
) -> Result<AttackResult> {
    if !(epsilon >= 0.0) {
        return Err(Error::Domain(format!(
            "epsilon must be nonnegative, got {epsilon}"
        )));
    }
    let original = model.predict(x)?;
    let grad = model.loss_input_gradient(x, label)?;
    let r: Vec<f64> = grad
        .data()
        .iter()
        .map(|&g| {
            if g > 0.0 {
                epsilon
            } else if g < 0.0 {
                -epsilon
            } else {
                0.0
            }
        })
        .collect();
    let perturbation = Tensor::vector(r)?;
    let new_label = model.predict(&x.add(&perturbation)?)?;
    Ok(AttackResult {
        perturbation,
        iterations: 1,
        fooled: new_label != original,
        original_label: original,
        new_label,
    })
}

/// Exact minimal l2 perturbation for an affine classifier
/// `f_k(x) = w_k . x + b_k`: the distance to the nearest class hyperplane,
/// plus a 1e-9 relative nudge to land strictly on the other side.
pub fn affine_minimal_oracle(weights: &Tensor, bias: &[f64], x: &Tensor) -> Result<AttackResult> {
    if weights.rank() != 2 {
        return Err(Error::Shape("oracle weights must be rank-2".into()));
    }
    let num_classes = weights.rows();
    if bias.len() != num_classes || weights.cols() != x.len() {
        return Err(Error::Shape(format!(
            "oracle dims: weights {}x{}, bias {}, x {}",
            weights.rows(),
            weights.cols(),
            bias.len(),
            x.len()
        )));
    }
    let logits: Vec<f64> = (0..num_classes)
        .map(|k| dot(weights.row(k), x.data()) + bias[k])
        .collect();
    let original = argmax(&logits);

    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    for k in 0..num_classes {
        if k == original {
            continue;
        }
        let w: Vec<f64> = weights
            .row(k)
            .iter()
            .zip(weights.row(original))
            .map(|(a, b)| a - b)
            .collect();
        let w_norm = l2_norm_slice(&w);
        if w_norm == 0.0 {
            continue; // identical rows: no boundary with this class
        }
        let dist = (logits[original] - logits[k]) / w_norm;
        if best.as_ref().map_or(true, |(d, _, _)| dist < *d) {
            best = Some((dist, k, w));
        }
    }
    let Some((dist, _, w)) = best else {
        return Err(Error::Infeasible(
            "all class rows identical: no boundary to cross".into(),
        ));
    };

    let w_norm = l2_norm_slice(&w);
    let magnitude = (dist / w_norm) * (1.0 + 1e-9);
    let r: Vec<f64> = w.iter().map(|wi| magnitude * wi).collect();
    let perturbed: Vec<f64> = x.data().iter().zip(&r).map(|(a, b)| a + b).collect();
    let new_logits: Vec<f64> = (0..num_classes)
        .map(|k| dot(weights.row(k), &perturbed) + bias[k])
        .collect();
    let new_label = argmax(&new_logits);
    Ok(AttackResult {
        perturbation: Tensor::vector(r)?,
        iterations: 1,
        fooled: new_label != original,
        original_label: original,
        new_label,
    })
}

fn offset_point(x: &Tensor, r: &[f64], scale: f64) -> Result<Tensor> {
    let data: Vec<f64> = x
        .data()
        .iter()
        .zip(r)
        .map(|(a, b)| a + scale * b)
        .collect();
    if !data.iter().all(|v| v.is_finite()) {
        return Err(Error::Numerical("perturbed point became non-finite".into()));
    }
    Tensor::vector(data)
}

fn scaled_tensor(r: &[f64], scale: f64) -> Result<Tensor> {
    Tensor::vector(r.iter().map(|v| v * scale).collect())
        .map_err(|_| Error::Numerical("perturbation became non-finite".into()))
}
