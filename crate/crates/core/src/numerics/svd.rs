//! Thin singular value decomposition via one-sided Jacobi rotations.
//!
//! Accurate and compact at the matrix sizes this toolkit meets (normals
//! matrices with at most a few hundred columns on the short side). The
//! decomposition always runs on the side with fewer columns.

use crate::error::{Error, Result};
use crate::numerics::tensor::{dot, l2_norm_slice, Tensor};

/// Thin SVD: `a = u * diag(sigma) * v^T` with `k = min(rows, cols)`
/// columns in `u` and `v`, and `sigma` sorted nonincreasing.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: Tensor,
    pub sigma: Vec<f64>,
    pub v: Tensor,
}

/// Rotation trigger: normalized off-diagonal Gram mass above this runs a
/// Jacobi rotation; a sweep with no rotations means convergence.
const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 60;

pub fn svd(m: &Tensor) -> Result<Svd> {
    if m.rank() != 2 {
        return Err(Error::Shape(format!(
            "svd expects a rank-2 tensor, got rank {}",
            m.rank()
        )));
    }
    if !m.data().iter().all(|v| v.is_finite()) {
        return Err(Error::Domain("svd input has non-finite entries".into()));
    }
    if m.rows() >= m.cols() {
        jacobi_tall(m)
    } else {
        // A = (A^T)^T: decompose the transpose and swap the factors.
        let t = jacobi_tall(&m.transpose())?;
        Ok(Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        })
    }
}

/// One-sided Jacobi on a matrix with rows >= cols. Orthogonalizes the
/// columns of a working copy B; at convergence B = U * diag(sigma) and the
/// accumulated rotations form V.
fn jacobi_tall(a: &Tensor) -> Result<Svd> {
    let (m, n) = (a.rows(), a.cols());

    // Column-major working copies keep the rotation loops contiguous.
    let mut b: Vec<Vec<f64>> = (0..n).map(|j| a.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut col = vec![0.0; n];
            col[j] = 1.0;
            col
        })
        .collect();

    for _sweep in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (bp, bq) = pick_two(&mut b, p, q);
                let app = dot(bp, bp);
                let aqq = dot(bq, bq);
                let apq = dot(bp, bq);
                let denom = (app * aqq).sqrt();
                if denom == 0.0 || apq.abs() <= JACOBI_TOL * denom {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                rotate(bp, bq, c, s);
                let (vp, vq) = pick_two(&mut v, p, q);
                rotate(vp, vq, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma: Vec<f64> = b.iter().map(|col| l2_norm_slice(col)).collect();
    let sigma_max = sigma.iter().fold(0.0f64, |a, &s| a.max(s));

    // Sort nonincreasing, carrying B and V columns along.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].partial_cmp(&sigma[i]).unwrap());
    let b: Vec<Vec<f64>> = order.iter().map(|&j| b[j].clone()).collect();
    let v: Vec<Vec<f64>> = order.iter().map(|&j| v[j].clone()).collect();
    sigma = order.iter().map(|&j| sigma[j]).collect();

    // Normalize B into U. Columns whose singular value underflows carry no
    // usable direction; replace them by completing the orthonormal basis.
    let tiny = sigma_max * 1e-13;
    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (j, col) in b.into_iter().enumerate() {
        if sigma[j] > tiny && sigma[j] > 0.0 {
            let inv = 1.0 / sigma[j];
            u_cols.push(col.into_iter().map(|x| x * inv).collect());
        } else {
            u_cols.push(complete_column(&u_cols, m));
        }
    }

    let u = from_columns(m, &u_cols);
    let v = from_columns(n, &v);
    Ok(Svd { u, sigma, v })
}

/// Finds a unit vector orthogonal to all columns produced so far, by
/// re-orthogonalized Gram-Schmidt over the canonical basis.
fn complete_column(existing: &[Vec<f64>], m: usize) -> Vec<f64> {
    for k in 0..m {
        let mut cand = vec![0.0; m];
        cand[k] = 1.0;
        for _ in 0..2 {
            for col in existing {
                let proj = dot(&cand, col);
                for (c, e) in cand.iter_mut().zip(col) {
                    *c -= proj * e;
                }
            }
        }
        let norm = l2_norm_slice(&cand);
        if norm > 1e-6 {
            for c in &mut cand {
                *c /= norm;
            }
            return cand;
        }
    }
    // Unreachable for existing.len() < m: some canonical vector always
    // survives projection.
    vec![0.0; m]
}

fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let xv = *xi;
        let yv = *yi;
        *xi = c * xv - s * yv;
        *yi = s * xv + c * yv;
    }
}

/// Mutable references to two distinct columns.
fn pick_two<'a>(cols: &'a mut [Vec<f64>], p: usize, q: usize) -> (&'a mut [f64], &'a mut [f64]) {
    debug_assert!(p < q);
    let (lo, hi) = cols.split_at_mut(q);
    (&mut lo[p], &mut hi[0])
}

fn from_columns(rows: usize, cols: &[Vec<f64>]) -> Tensor {
    let n = cols.len();
    let mut data = vec![0.0; rows * n];
    for (j, col) in cols.iter().enumerate() {
        for (i, &x) in col.iter().enumerate() {
            data[i * n + j] = x;
        }
    }
    Tensor::matrix(rows, n, data).expect("columns are finite by construction")
}
