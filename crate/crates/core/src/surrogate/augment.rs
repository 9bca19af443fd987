//! Discrepancy modelling and the blended augmented observations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gp::{fit_gp, FitOptions, TrainedGp};

/// Fits a GP to `y_hf - mu_m(x_hf)`, the residual of the level-`m` posterior
/// mean at the high-fidelity design. Inputs are normalized.
pub fn fit_discrepancy(
    stage1_gp: &TrainedGp,
    hf_inputs: &DMatrix<f64>,
    hf_outputs: &DVector<f64>,
    options: &FitOptions,
) -> Result<TrainedGp> {
    if hf_inputs.nrows() != hf_outputs.len() {
        return Err(Error::Contract(format!(
            "{} HF outputs for {} inputs",
            hf_outputs.len(),
            hf_inputs.nrows()
        )));
    }
    let lf_at_hf = stage1_gp.predict(hf_inputs)?.means;
    let residuals = hf_outputs - lf_at_hf;
    let options = FitOptions {
        learn_noise: true,
        ..options.clone()
    };
    fit_gp(hf_inputs, &residuals, &options, None)
}

/// Blends a discrepancy-corrected LF value with the HF posterior.
///
/// Returns `(W (y + mu_delta) + (1 - W) mu_hf,
/// W^2 (sigma_m^2 + var_delta) + (1 - W)^2 var_hf)`.
pub fn augment_point(
    y: f64,
    mu_delta: f64,
    var_delta: f64,
    mu_hf: f64,
    var_hf: f64,
    sigma_m_sq: f64,
    weight: f64,
) -> (f64, f64) {
    let value = weight * (y + mu_delta) + (1.0 - weight) * mu_hf;
    let variance = weight * weight * (sigma_m_sq + var_delta) + (1.0 - weight).powi(2) * var_hf;
    (value, variance)
}
