//! Log marginal likelihood of a zero-mean GP and its analytic gradient.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::kernel::{check_columns, gram_matrix, KernelParams};
use crate::error::{Error, Result};

pub const DEFAULT_JITTER_SCHEDULE: [f64; 4] = [1e-10, 1e-8, 1e-6, 1e-4];

/// A successful factorization together with the jitter that made it succeed.
pub(crate) struct Factored {
    pub chol: Cholesky<f64, Dyn>,
    pub jitter: f64,
}

/// Cholesky with escalating diagonal jitter. The first attempt uses none.
pub(crate) fn factorize(matrix: &DMatrix<f64>, schedule: &[f64]) -> Result<Factored> {
    let mut tried = Vec::with_capacity(schedule.len() + 1);
    for &jitter in std::iter::once(&0.0).chain(schedule) {
        tried.push(jitter);
        let mut m = matrix.clone();
        if jitter > 0.0 {
            for i in 0..m.nrows() {
                m[(i, i)] += jitter;
            }
        }
        if let Some(chol) = Cholesky::new(m) {
            return Ok(Factored { chol, jitter });
        }
    }
    Err(Error::Factorization { jitter_history: tried })
}

pub(crate) fn validate_noise(noise: Option<&[f64]>, n: usize) -> Result<()> {
    if let Some(v) = noise {
        if v.len() != n {
            return Err(Error::Contract(format!(
                "per-point noise has {} entries for {n} training points",
                v.len()
            )));
        }
        if let Some(bad) = v.iter().find(|s| !(**s >= 0.0 && s.is_finite())) {
            return Err(Error::Contract(format!(
                "per-point noise must be non-negative, got {bad}"
            )));
        }
    }
    Ok(())
}

/// Adds either the per-point noise vector or the homoscedastic noise term to
/// the diagonal of `k`.
pub(crate) fn add_noise(k: &mut DMatrix<f64>, params: &KernelParams, per_point_noise: Option<&[f64]>) {
    for i in 0..k.nrows() {
        k[(i, i)] += match per_point_noise {
            Some(v) => v[i],
            None => params.noise_variance(),
        };
    }
}

/// Value and gradient of the log marginal likelihood.
///
/// The gradient is taken with respect to
/// `[ln l_1, .., ln l_D, ln sf2, ln sn2]`; the final noise entry is omitted
/// when `per_point_noise` is supplied since those variances are fixed.
pub fn log_marginal_likelihood(
    params: &KernelParams,
    inputs: &DMatrix<f64>,
    targets: &DVector<f64>,
    per_point_noise: Option<&[f64]>,
) -> Result<(f64, Vec<f64>)> {
    lml_with_schedule(params, inputs, targets, per_point_noise, true, &DEFAULT_JITTER_SCHEDULE)
}

pub(crate) fn lml_with_schedule(
    params: &KernelParams,
    inputs: &DMatrix<f64>,
    targets: &DVector<f64>,
    per_point_noise: Option<&[f64]>,
    noise_gradient: bool,
    schedule: &[f64],
) -> Result<(f64, Vec<f64>)> {
    let n = inputs.nrows();
    if n == 0 {
        return Err(Error::Contract(
            "log marginal likelihood needs at least one point".into(),
        ));
    }
    if targets.len() != n {
        return Err(Error::Contract(format!("{} targets for {n} inputs", targets.len())));
    }
    check_columns(inputs, params.dim(), "training input")?;
    validate_noise(per_point_noise, n)?;

    let k = gram_matrix(inputs, params)?;
    let mut k_noisy = k.clone();
    add_noise(&mut k_noisy, params, per_point_noise);
    let Factored { chol, .. } = factorize(&k_noisy, schedule)?;

    let alpha = chol.solve(targets);
    let l = chol.l_dirty();
    let log_det: f64 = 2.0 * (0..n).map(|i| l[(i, i)].ln()).sum::<f64>();
    let value = -0.5 * targets.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * PI).ln();

    // d/dθ = ½ tr((ααᵀ − K̃⁻¹) ∂K̃/∂θ)
    let mut inner = chol.inverse();
    inner.neg_mut();
    inner.ger(1.0, &alpha, &alpha, 1.0);

    let dim = params.dim();
    let mut gradient = vec![0.0; dim + 1];
    for j in 0..n {
        for i in 0..n {
            let wk = inner[(i, j)] * k[(i, j)];
            gradient[dim] += wk;
            if i == j {
                continue;
            }
            for (d, l) in params.lengthscales().iter().enumerate() {
                let diff = (inputs[(i, d)] - inputs[(j, d)]) / l;
                gradient[d] += wk * diff * diff;
            }
        }
    }
    for g in gradient.iter_mut() {
        *g *= 0.5;
    }
    if per_point_noise.is_none() && noise_gradient {
        let trace: f64 = (0..n).map(|i| inner[(i, i)]).sum();
        gradient.push(0.5 * params.noise_variance() * trace);
    }
    Ok((value, gradient))
}
