//! Distance-based trust weights between a lower-fidelity point and the
//! high-fidelity design.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How strongly a lower-fidelity point is trusted relative to the
/// high-fidelity posterior at the same location.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrustWeight {
    pub point_index: usize,
    /// Distance to the nearest HF point in the normalized unit hypercube.
    pub d_min: f64,
    pub radius: f64,
    /// Indices of the HF points that contribute to the weight.
    pub neighborhood: Vec<usize>,
    /// `W`: 1 trusts the corrected LF value, 0 trusts the HF posterior.
    pub weight: f64,
    pub alpha: f64,
}

/// Decay exponent from the ratio `C_M / C_m`: `log10(ratio) / 2`.
pub fn alpha_exponent(cost_ratio: f64) -> Result<f64> {
    if !(cost_ratio > 1.0 && cost_ratio.is_finite()) {
        return Err(Error::Configuration(format!(
            "cost ratio to the highest fidelity must exceed 1, got {cost_ratio}"
        )));
    }
    Ok(cost_ratio.log10() / 2.0)
}

pub fn trust_radius(d_min: f64) -> f64 {
    d_min.sqrt()
}

/// Trust weight of `point` given the HF design `hf_points` (both normalized).
///
/// The neighborhood is every HF point within `sqrt(d_min)` plus the nearest
/// one, which falls outside that radius once `d_min > 1`. Individual
/// weights `1 - d^alpha` are clamped to `[0, 1]` before averaging.
pub fn local_weight(point: &[f64], hf_points: &DMatrix<f64>, alpha: f64) -> Result<TrustWeight> {
    if hf_points.nrows() == 0 {
        return Err(Error::Contract("trust weighting needs at least one HF point".into()));
    }
    if hf_points.ncols() != point.len() {
        return Err(Error::Contract(format!(
            "point has {} coordinates, HF design has {}",
            point.len(),
            hf_points.ncols()
        )));
    }
    if !(alpha >= 0.0) {
        return Err(Error::Contract(format!("alpha must be non-negative, got {alpha}")));
    }

    let distances: Vec<f64> = hf_points
        .row_iter()
        .map(|row| row.iter().zip(point).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
        .collect();
    let (nearest, d_min) = distances
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("non-empty");
    let radius = trust_radius(d_min);
    let neighborhood: Vec<usize> = (0..distances.len())
        .filter(|&j| j == nearest || distances[j] <= radius)
        .collect();
    let mean_w = neighborhood
        .iter()
        .map(|&j| (1.0 - distances[j].powf(alpha)).clamp(0.0, 1.0))
        .sum::<f64>()
        / neighborhood.len() as f64;

    Ok(TrustWeight {
        point_index: 0,
        d_min,
        radius,
        neighborhood,
        weight: (1.0 - mean_w).clamp(0.0, 1.0),
        alpha,
    })
}
