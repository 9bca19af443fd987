//! Accuracy and calibration metrics, plus baseline normalization.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Predictive variances are floored here before evaluating densities.
pub const VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub problem: String,
    pub method: String,
    pub seed: u64,
    pub n_test: usize,
    pub rmse: f64,
    pub mean_pdf: f64,
}

fn check_lengths(a: usize, b: usize) -> Result<()> {
    if a != b || a == 0 {
        return Err(Error::Contract(format!("metric inputs have lengths {a} and {b}")));
    }
    Ok(())
}

pub fn rmse(pred_means: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred_means.len(), truth.len())?;
    let sse: f64 = pred_means.iter().zip(truth).map(|(m, t)| (m - t).powi(2)).sum();
    Ok((sse / truth.len() as f64).sqrt())
}

/// Gaussian density of `x` under `N(mean, variance)`.
pub fn normal_pdf(x: f64, mean: f64, variance: f64) -> f64 {
    (-(x - mean).powi(2) / (2.0 * variance)).exp() / (2.0 * PI * variance).sqrt()
}

/// Mean predictive density of the true values.
pub fn mean_pdf(pred_means: &[f64], pred_vars: &[f64], truth: &[f64]) -> Result<f64> {
    check_lengths(pred_means.len(), truth.len())?;
    check_lengths(pred_vars.len(), truth.len())?;
    let total: f64 = pred_means
        .iter()
        .zip(pred_vars)
        .zip(truth)
        .map(|((m, v), t)| normal_pdf(*t, *m, v.max(VARIANCE_FLOOR)))
        .sum();
    Ok(total / truth.len() as f64)
}

/// `value / baseline`. For RMSE below 1 is better, for mean PDF above 1.
pub fn normalize(value: f64, baseline: f64) -> Result<f64> {
    if !(baseline > 0.0) {
        return Err(Error::Reporting(format!("baseline must be positive, got {baseline}")));
    }
    Ok(value / baseline)
}

/// Location and spread of a sample of per-seed metric values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Dispersion {
    pub mean: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
}

impl Dispersion {
    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }

    /// `None` for an empty sample. Quantiles interpolate linearly.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let quantile = |q: f64| {
            let pos = q * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Self {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            median: quantile(0.5),
            q1: quantile(0.25),
            q3: quantile(0.75),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn rmse_cases() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_relative_eq!(
            rmse(&[1.5, 2.5, -0.5], &[1.0, 2.0, -1.0]).unwrap(),
            0.5,
            epsilon = 1e-15
        );
        assert_relative_eq!(rmse(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 3.535534, epsilon = 1e-6);
        assert_relative_eq!(
            rmse(&[3.0, 4.0], &[0.0, 0.0]).unwrap(),
            (12.5f64).sqrt(),
            epsilon = 1e-15
        );
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn mean_pdf_closed_forms() {
        let t = [0.3, -1.2, 4.0];
        let v = mean_pdf(&t, &[1.0; 3], &t).unwrap();
        assert!((v - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-9);
        assert!((v - 0.398942).abs() < 1e-6);
        let v = mean_pdf(&t, &[1.0 / (2.0 * PI); 3], &t).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
        let s2: f64 = 0.49;
        let shifted: Vec<f64> = t.iter().map(|x| x + s2.sqrt()).collect();
        let v = mean_pdf(&shifted, &[s2; 3], &t).unwrap();
        assert!((v - (-0.5f64).exp() / (2.0 * PI * s2).sqrt()).abs() < 1e-9);
    }

    #[test]
    fn zero_variance_is_floored() {
        let v = mean_pdf(&[1.0], &[0.0], &[1.0]).unwrap();
        assert_relative_eq!(v, 1.0 / (2.0 * PI * VARIANCE_FLOOR).sqrt());
    }

    #[test]
    fn normalize_cases() {
        assert_eq!(normalize(2.5, 2.5).unwrap(), 1.0);
        assert_relative_eq!(normalize(0.63 * 7.0, 7.0).unwrap(), 0.63, epsilon = 1e-15);
        assert_relative_eq!(normalize(3.60 * 0.2, 0.2).unwrap(), 3.60, epsilon = 1e-15);
        assert!(matches!(normalize(1.0, 0.0), Err(Error::Reporting(_))));
        assert!(normalize(1.0, -1.0).is_err());
    }

    #[test]
    fn dispersion_of_sample() {
        let d = Dispersion::of(&[4.0, 1.0, 3.0, 2.0, 5.0]).unwrap();
        assert_eq!(d.mean, 3.0);
        assert_eq!(d.median, 3.0);
        assert_eq!(d.q1, 2.0);
        assert_eq!(d.q3, 4.0);
        assert_eq!(d.iqr(), 2.0);
        assert!(Dispersion::of(&[]).is_none());
    }

    proptest! {
        #[test]
        fn density_peaks_at_squared_error(err in 0.01f64..10.0, rel in 0.05f64..0.95) {
            let best = normal_pdf(err, 0.0, err * err);
            prop_assert!(normal_pdf(err, 0.0, err * err * (1.0 - rel)) < best);
            prop_assert!(normal_pdf(err, 0.0, err * err * (1.0 + rel)) < best);
        }

        #[test]
        fn metrics_ignore_point_order(
            rows in prop::collection::vec((-5.0f64..5.0, 0.01f64..3.0, -5.0f64..5.0), 1..40),
            rot in 0usize..40,
        ) {
            let (m, v, t): (Vec<f64>, Vec<f64>, Vec<f64>) = {
                let mut a = (vec![], vec![], vec![]);
                for (x, y, z) in &rows { a.0.push(*x); a.1.push(*y); a.2.push(*z); }
                a
            };
            let k = rot % rows.len();
            let rotate = |s: &[f64]| { let mut r = s.to_vec(); r.rotate_left(k); r };
            let (mr, vr, tr) = (rotate(&m), rotate(&v), rotate(&t));
            prop_assert!((rmse(&m, &t).unwrap() - rmse(&mr, &tr).unwrap()).abs() < 1e-12);
            prop_assert!((mean_pdf(&m, &v, &t).unwrap() - mean_pdf(&mr, &vr, &tr).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn normalization_is_scale_free(v in 0.0f64..100.0, b in 0.01f64..100.0, a in 0.01f64..100.0) {
            let x = normalize(a * v, a * b).unwrap();
            prop_assert!((x - normalize(v, b).unwrap()).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }
}
