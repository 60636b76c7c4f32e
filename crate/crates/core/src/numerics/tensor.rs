//! Dense row-major tensors and the norms used throughout the toolkit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::rng::RngStream;

/// Dense real-valued array with an explicit shape, stored row-major.
///
/// All public constructors reject non-finite entries, so code holding a
/// `Tensor` may assume every value is finite.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    /// Builds a tensor, validating that `data.len()` matches the shape
    /// product and that every entry is finite.
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if shape.iter().any(|&e| e == 0) {
            return Err(Error::Shape(format!("zero extent in shape {shape:?}")));
        }
        if data.len() != expected {
            return Err(Error::Shape(format!(
                "data length {} does not match shape {:?} (expected {})",
                data.len(),
                shape,
                expected
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::Domain("tensor contains non-finite values".into()));
        }
        Ok(Tensor { shape, data })
    }

    /// Rank-1 tensor from a flat vector.
    pub fn vector(data: Vec<f64>) -> Result<Self> {
        let n = data.len();
        Tensor::new(vec![n], data)
    }

    /// Rank-2 tensor with `rows * cols` row-major entries.
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        Tensor::new(vec![rows, cols], data)
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; len],
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    /// Number of rows of a rank-2 tensor.
    pub fn rows(&self) -> usize {
        self.shape[0]
    }

    /// Number of columns of a rank-2 tensor.
    pub fn cols(&self) -> usize {
        self.shape[1]
    }

    /// Row `i` of a rank-2 tensor as a slice.
    pub fn row(&self, i: usize) -> &[f64] {
        let cols = self.cols();
        &self.data[i * cols..(i + 1) * cols]
    }

    pub fn get2(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols() + c]
    }

    /// Column `j` of a rank-2 tensor, copied out.
    pub fn column(&self, j: usize) -> Vec<f64> {
        let (rows, cols) = (self.rows(), self.cols());
        (0..rows).map(|i| self.data[i * cols + j]).collect()
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, c: f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }

    /// Elementwise clamp to `[lo, hi]`.
    pub fn clamp(&self, lo: f64, hi: f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| v.clamp(lo, hi)).collect(),
        }
    }

    pub fn dot(&self, other: &Tensor) -> Result<f64> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "dot of mismatched shapes {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(dot(&self.data, &other.data))
    }

    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor> {
        if self.rank() != 2 || other.rank() != 2 {
            return Err(Error::Shape("matmul requires rank-2 tensors".into()));
        }
        let (m, k) = (self.rows(), self.cols());
        let (k2, n) = (other.rows(), other.cols());
        if k != k2 {
            return Err(Error::Shape(format!(
                "matmul inner dims differ: {k} vs {k2}"
            )));
        }
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for l in 0..k {
                let a = self.data[i * k + l];
                if a == 0.0 {
                    continue;
                }
                let row = &other.data[l * n..(l + 1) * n];
                for (j, b) in row.iter().enumerate() {
                    out[i * n + j] += a * b;
                }
            }
        }
        Tensor::matrix(m, n, out)
    }

    /// Transpose of a rank-2 tensor.
    pub fn transpose(&self) -> Tensor {
        let (m, n) = (self.rows(), self.cols());
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = self.data[i * n + j];
            }
        }
        Tensor {
            shape: vec![n, m],
            data: out,
        }
    }

    fn zip_with(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        if self.shape != other.shape {
            return Err(Error::Shape(format!(
                "elementwise op on mismatched shapes {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        let data = self
            .data
            .iter()
            .zip(other.data.iter())
            .map(|(&a, &b)| f(a, b))
            .collect();
        Ok(Tensor {
            shape: self.shape.clone(),
            data,
        })
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub(crate) fn l2_norm_slice(xs: &[f64]) -> f64 {
    dot(xs, xs).sqrt()
}

/// Norm order used for perturbation budgets; only the orders the
/// experiments need.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormOrder {
    #[serde(rename = "2")]
    L2,
    #[serde(rename = "inf")]
    LInf,
}

impl NormOrder {
    pub fn as_str(self) -> &'static str {
        match self {
            NormOrder::L2 => "2",
            NormOrder::LInf => "inf",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "2" => Ok(NormOrder::L2),
            "inf" => Ok(NormOrder::LInf),
            other => Err(Error::Config(format!(
                "unsupported norm order {other:?} (expected \"2\" or \"inf\")"
            ))),
        }
    }
}

impl std::fmt::Display for NormOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The lp norm of a tensor for `p` in {2, inf}.
pub fn lp_norm(t: &Tensor, p: NormOrder) -> Result<f64> {
    if t.is_empty() {
        return Err(Error::Domain("lp_norm of empty tensor".into()));
    }
    Ok(match p {
        NormOrder::L2 => l2_norm_slice(t.data()),
        NormOrder::LInf => t.data().iter().fold(0.0f64, |m, v| m.max(v.abs())),
    })
}

/// Draws a vector uniformly from the sphere of the given radius:
/// Gaussian components, normalized, then scaled. The construction makes
/// the direction distribution rotation-invariant and the norm exact up
/// to one multiply per component.
pub fn sample_sphere(d: usize, radius: f64, rng: &mut RngStream) -> Result<Tensor> {
    if d == 0 {
        return Err(Error::Domain("sample_sphere needs dimension >= 1".into()));
    }
    if radius <= 0.0 || !radius.is_finite() {
        return Err(Error::Domain(format!(
            "sample_sphere needs a positive finite radius, got {radius}"
        )));
    }
    loop {
        let g: Vec<f64> = (0..d).map(|_| rng.normal()).collect();
        let norm = l2_norm_slice(&g);
        // Resample in the (measure-zero) case of a zero draw.
        if norm > 0.0 {
            let scale = radius / norm;
            return Tensor::vector(g.into_iter().map(|v| v * scale).collect());
        }
    }
}
