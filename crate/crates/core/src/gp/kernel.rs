//! Squared-exponential kernel with one lengthscale per input dimension.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hyperparameters of the RBF-ARD kernel plus a homoscedastic noise term.
///
/// Lengthscales are in normalized-input units; both variances are in
/// standardized-output units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    lengthscales: Vec<f64>,
    output_variance: f64,
    noise_variance: f64,
}

impl KernelParams {
    pub fn new(lengthscales: Vec<f64>, output_variance: f64, noise_variance: f64) -> Result<Self> {
        if lengthscales.is_empty() {
            return Err(Error::Contract("at least one lengthscale is required".into()));
        }
        if let Some(l) = lengthscales.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
            return Err(Error::Contract(format!("lengthscale must be positive, got {l}")));
        }
        if !(output_variance > 0.0 && output_variance.is_finite()) {
            return Err(Error::Contract(format!(
                "output variance must be positive, got {output_variance}"
            )));
        }
        if !(noise_variance >= 0.0 && noise_variance.is_finite()) {
            return Err(Error::Contract(format!(
                "noise variance must be non-negative, got {noise_variance}"
            )));
        }
        Ok(Self {
            lengthscales,
            output_variance,
            noise_variance,
        })
    }

    pub fn isotropic(dim: usize, lengthscale: f64, output_variance: f64, noise_variance: f64) -> Result<Self> {
        Self::new(vec![lengthscale; dim], output_variance, noise_variance)
    }

    pub fn dim(&self) -> usize {
        self.lengthscales.len()
    }

    pub fn lengthscales(&self) -> &[f64] {
        &self.lengthscales
    }

    pub fn output_variance(&self) -> f64 {
        self.output_variance
    }

    pub fn noise_variance(&self) -> f64 {
        self.noise_variance
    }

    #[cfg(test)]
    pub(crate) fn with_noise_variance(mut self, noise_variance: f64) -> Self {
        self.noise_variance = noise_variance;
        self
    }

    /// Covariance between two single points.
    pub fn eval(&self, x: &[f64], z: &[f64]) -> f64 {
        self.output_variance * (-0.5 * self.scaled_sq_dist(x, z)).exp()
    }

    fn scaled_sq_dist(&self, x: &[f64], z: &[f64]) -> f64 {
        x.iter()
            .zip(z)
            .zip(&self.lengthscales)
            .map(|((a, b), l)| {
                let r = (a - b) / l;
                r * r
            })
            .sum()
    }
}

pub(crate) fn check_columns(rows: &DMatrix<f64>, dim: usize, what: &str) -> Result<()> {
    if rows.ncols() != dim {
        return Err(Error::Contract(format!(
            "{what} has {} columns but the kernel has {dim} lengthscales",
            rows.ncols()
        )));
    }
    Ok(())
}

/// Cross-covariance matrix between the rows of `x_rows` and `z_rows`.
pub fn kernel_matrix(x_rows: &DMatrix<f64>, z_rows: &DMatrix<f64>, params: &KernelParams) -> Result<DMatrix<f64>> {
    check_columns(x_rows, params.dim(), "left input")?;
    check_columns(z_rows, params.dim(), "right input")?;
    let mut out = DMatrix::zeros(x_rows.nrows(), z_rows.nrows());
    let xs: Vec<Vec<f64>> = x_rows.row_iter().map(|r| r.iter().copied().collect()).collect();
    let zs: Vec<Vec<f64>> = z_rows.row_iter().map(|r| r.iter().copied().collect()).collect();
    for (p, x) in xs.iter().enumerate() {
        for (q, z) in zs.iter().enumerate() {
            out[(p, q)] = params.eval(x, z);
        }
    }
    Ok(out)
}

/// Symmetric training covariance; fills the lower triangle and mirrors it.
pub(crate) fn gram_matrix(inputs: &DMatrix<f64>, params: &KernelParams) -> Result<DMatrix<f64>> {
    check_columns(inputs, params.dim(), "training input")?;
    let n = inputs.nrows();
    let rows: Vec<Vec<f64>> = inputs.row_iter().map(|r| r.iter().copied().collect()).collect();
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        out[(i, i)] = params.output_variance;
        for j in 0..i {
            let k = params.eval(&rows[i], &rows[j]);
            out[(i, j)] = k;
            out[(j, i)] = k;
        }
    }
    Ok(out)
}
