//! The three-stage multi-fidelity surrogate.
//!
//! 1. An independent GP per fidelity level, each learning its own noise.
//! 2. For every level below the highest: a discrepancy GP on the residuals
//!    at the HF design, then each lower-level observation is corrected and
//!    blended with the HF posterior by its trust weight. Levels are processed
//!    independently against the highest level, never through each other.
//! 3. A GP on the HF data plus all augmented observations, with per-point
//!    noise fixed at the propagated variances.
//!
//! Units: Stage-2 quantities are in original output units; each Stage-1
//! noise estimate is mapped back through its GP's output transform, and the
//! propagated variances are mapped into the Stage-3 standardized space when
//! handed to the fusion fit.

mod augment;
mod io;
mod trust;

pub use augment::{augment_point, fit_discrepancy};
pub use io::{FORMAT_NAME, FORMAT_VERSION};
pub use trust::{alpha_exponent, local_weight, trust_radius, TrustWeight};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gp::{fit_gp, FitOptions, OutputTransform, Prediction, TrainedGp};
use crate::seed::derive_seed;

/// Observations from one fidelity level, in original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityDataset {
    pub level: usize,
    pub inputs: DMatrix<f64>,
    pub outputs: DVector<f64>,
    /// Cost of one evaluation in equivalent-HF units.
    pub cost: f64,
}

impl FidelityDataset {
    pub fn new(level: usize, inputs: DMatrix<f64>, outputs: DVector<f64>, cost: f64) -> Result<Self> {
        if inputs.nrows() != outputs.len() {
            return Err(Error::Contract(format!(
                "level {level}: {} outputs for {} inputs",
                outputs.len(),
                inputs.nrows()
            )));
        }
        if !(cost > 0.0 && cost.is_finite()) {
            return Err(Error::Configuration(format!(
                "level {level}: cost must be positive, got {cost}"
            )));
        }
        Ok(Self {
            level,
            inputs,
            outputs,
            cost,
        })
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }
}

/// Min-max map from the declared domain onto the unit hypercube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputNormalizer {
    bounds: Vec<(f64, f64)>,
}

impl InputNormalizer {
    pub fn new(bounds: &[(f64, f64)]) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::Contract("at least one input dimension is required".into()));
        }
        if let Some((lo, hi)) = bounds
            .iter()
            .find(|(lo, hi)| !(lo <= hi) || !lo.is_finite() || !hi.is_finite())
        {
            return Err(Error::Contract(format!("invalid bounds ({lo}, {hi})")));
        }
        Ok(Self {
            bounds: bounds.to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    fn span(&self, d: usize) -> f64 {
        let (lo, hi) = self.bounds[d];
        // degenerate dimension: shift only
        if hi > lo {
            hi - lo
        } else {
            1.0
        }
    }

    pub fn normalize(&self, rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if rows.ncols() != self.dim() {
            return Err(Error::Contract(format!(
                "inputs have {} columns, domain has {}",
                rows.ncols(),
                self.dim()
            )));
        }
        Ok(DMatrix::from_fn(rows.nrows(), rows.ncols(), |i, d| {
            (rows[(i, d)] - self.bounds[d].0) / self.span(d)
        }))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentedObservation {
    /// Normalized input.
    pub input: Vec<f64>,
    /// Blended value in original output units.
    pub value: f64,
    /// Propagated variance in original output units squared.
    pub variance: f64,
    pub source_level: usize,
    pub trust: TrustWeight,
    /// `y + mu_delta`, the corrected lower-fidelity value.
    pub corrected_value: f64,
    /// HF posterior mean at this input.
    pub hf_mean: f64,
}

/// Stage-1 model of one level and its estimated noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelModel {
    pub level: usize,
    pub cost: f64,
    pub gp: TrainedGp,
    /// Learned noise variance in original output units squared.
    pub noise_variance: f64,
}

/// Stage-2 products for one lower level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelAugmentation {
    pub level: usize,
    pub alpha: f64,
    pub discrepancy_gp: TrainedGp,
    pub observations: Vec<AugmentedObservation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MastSurrogate {
    normalizer: InputNormalizer,
    stage1: Vec<LevelModel>,
    augmentations: Vec<LevelAugmentation>,
    fusion_gp: TrainedGp,
    /// Per-point noise of the fusion training set, original units.
    fusion_noise: Vec<f64>,
}

fn validate_datasets<'a>(datasets: &'a [FidelityDataset], bounds: &[(f64, f64)]) -> Result<Vec<&'a FidelityDataset>> {
    let dim = bounds.len();
    if datasets.len() < 2 {
        return Err(Error::Configuration(format!(
            "at least two fidelity levels are required, got {}",
            datasets.len()
        )));
    }
    let mut sorted: Vec<&FidelityDataset> = datasets.iter().collect();
    sorted.sort_by_key(|d| d.level);
    for pair in sorted.windows(2) {
        if pair[0].level == pair[1].level {
            return Err(Error::Configuration(format!(
                "duplicate fidelity level {}",
                pair[0].level
            )));
        }
        if !(pair[0].cost < pair[1].cost) {
            return Err(Error::Configuration(format!(
                "costs must strictly increase with level: level {} costs {}, level {} costs {}",
                pair[0].level, pair[0].cost, pair[1].level, pair[1].cost
            )));
        }
    }
    for d in &sorted {
        if d.inputs.ncols() != dim && !d.is_empty() {
            return Err(Error::Contract(format!(
                "level {} inputs have {} columns, domain has {dim}",
                d.level,
                d.inputs.ncols()
            )));
        }
        if d.inputs.iter().chain(d.outputs.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Contract(format!("level {} contains non-finite values", d.level)));
        }
        for i in 0..d.len() {
            for (c, (lo, hi)) in bounds.iter().enumerate() {
                let v = d.inputs[(i, c)];
                let slack = 1e-9 * (hi - lo).abs().max(1.0);
                if v < lo - slack || v > hi + slack {
                    return Err(Error::Contract(format!(
                        "level {} input {i} coordinate {c} = {v} lies outside [{lo}, {hi}]",
                        d.level
                    )));
                }
            }
        }
    }
    let hf = sorted.last().expect("at least two levels");
    if hf.len() < 2 {
        return Err(Error::Configuration(format!(
            "the highest fidelity needs at least 2 points, got {}",
            hf.len()
        )));
    }
    Ok(sorted)
}

fn fit_stage1(data: &FidelityDataset, inputs: &DMatrix<f64>, options: &FitOptions, seed: u64) -> Result<LevelModel> {
    let options = FitOptions {
        // a single point cannot inform a noise estimate
        learn_noise: data.len() >= 2,
        seed: derive_seed(&[seed, 1, data.level as u64]),
        ..options.clone()
    };
    let gp = fit_gp(inputs, &data.outputs, &options, None)?;
    Ok(LevelModel {
        level: data.level,
        cost: data.cost,
        noise_variance: gp.noise_variance_original(),
        gp,
    })
}

/// Stage 2 for one lower level. Depends only on that level's data and model
/// and on the highest level's data and model.
fn augment_level(
    lower: &LevelModel,
    lower_inputs: &DMatrix<f64>,
    lower_outputs: &DVector<f64>,
    hf: &LevelModel,
    hf_inputs: &DMatrix<f64>,
    hf_outputs: &DVector<f64>,
    options: &FitOptions,
    seed: u64,
) -> Result<LevelAugmentation> {
    let disc_options = options.clone().with_seed(derive_seed(&[seed, 2, lower.level as u64]));
    let discrepancy_gp = fit_discrepancy(&lower.gp, hf_inputs, hf_outputs, &disc_options)?;
    let alpha = alpha_exponent(hf.cost / lower.cost)?;
    let delta = discrepancy_gp.predict(lower_inputs)?;
    let hf_post = hf.gp.predict(lower_inputs)?;

    let observations = (0..lower_inputs.nrows())
        .map(|i| {
            let input: Vec<f64> = lower_inputs.row(i).iter().copied().collect();
            let mut trust = local_weight(&input, hf_inputs, alpha)?;
            trust.point_index = i;
            let (value, variance) = augment_point(
                lower_outputs[i],
                delta.means[i],
                delta.variances[i],
                hf_post.means[i],
                hf_post.variances[i],
                lower.noise_variance,
                trust.weight,
            );
            Ok(AugmentedObservation {
                input,
                value,
                variance,
                source_level: lower.level,
                trust,
                corrected_value: lower_outputs[i] + delta.means[i],
                hf_mean: hf_post.means[i],
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(LevelAugmentation {
        level: lower.level,
        alpha,
        discrepancy_gp,
        observations,
    })
}

/// Builds the surrogate from per-level datasets over a common domain.
///
/// Levels may arrive in any order; the highest `level` is the target
/// fidelity. Lower levels with no observations are skipped, which reduces
/// the fusion GP to a fixed-noise GP on the HF data alone.
pub fn build_mast(
    datasets: &[FidelityDataset],
    bounds: &[(f64, f64)],
    options: &FitOptions,
    seed: u64,
) -> Result<MastSurrogate> {
    options.validate()?;
    let normalizer = InputNormalizer::new(bounds)?;
    let sorted = validate_datasets(datasets, normalizer.bounds())?;
    let (hf_data, lower_data) = sorted.split_last().expect("validated");
    let lower_data: Vec<&FidelityDataset> = lower_data.iter().copied().filter(|d| !d.is_empty()).collect();

    let hf_inputs = normalizer.normalize(&hf_data.inputs)?;
    let hf_model = fit_stage1(hf_data, &hf_inputs, options, seed)?;

    let mut stage1 = Vec::with_capacity(lower_data.len() + 1);
    let mut augmentations = Vec::with_capacity(lower_data.len());
    for data in &lower_data {
        let inputs = normalizer.normalize(&data.inputs)?;
        let model = fit_stage1(data, &inputs, options, seed)?;
        augmentations.push(augment_level(
            &model,
            &inputs,
            &data.outputs,
            &hf_model,
            &hf_inputs,
            &hf_data.outputs,
            options,
            seed,
        )?);
        stage1.push(model);
    }

    let n_total = hf_data.len() + augmentations.iter().map(|a| a.observations.len()).sum::<usize>();
    let dim = normalizer.dim();
    let mut inputs = DMatrix::zeros(n_total, dim);
    let mut targets = Vec::with_capacity(n_total);
    let mut fusion_noise = Vec::with_capacity(n_total);
    for i in 0..hf_data.len() {
        inputs.row_mut(i).copy_from(&hf_inputs.row(i));
        targets.push(hf_data.outputs[i]);
        fusion_noise.push(hf_model.noise_variance);
    }
    let mut row = hf_data.len();
    for obs in augmentations.iter().flat_map(|a| &a.observations) {
        for d in 0..dim {
            inputs[(row, d)] = obs.input[d];
        }
        targets.push(obs.value);
        fusion_noise.push(obs.variance);
        row += 1;
    }

    let transform = OutputTransform::from_targets(&targets);
    let standardized_noise: Vec<f64> = fusion_noise
        .iter()
        .map(|v| transform.standardize_variance(*v))
        .collect();
    let fusion_options = FitOptions {
        learn_noise: false,
        seed: derive_seed(&[seed, 3]),
        ..options.clone()
    };
    let fusion_gp = fit_gp(
        &inputs,
        &DVector::from_vec(targets),
        &fusion_options,
        Some(&standardized_noise),
    )?;

    stage1.push(hf_model);
    Ok(MastSurrogate {
        normalizer,
        stage1,
        augmentations,
        fusion_gp,
        fusion_noise,
    })
}

impl MastSurrogate {
    /// Posterior mean and variance at queries given in original units.
    pub fn predict(&self, queries: &DMatrix<f64>) -> Result<Prediction> {
        self.fusion_gp.predict(&self.normalizer.normalize(queries)?)
    }

    pub fn normalizer(&self) -> &InputNormalizer {
        &self.normalizer
    }

    /// Stage-1 models in ascending level order; the last is the highest level.
    pub fn stage1(&self) -> &[LevelModel] {
        &self.stage1
    }

    pub fn hf_model(&self) -> &LevelModel {
        self.stage1.last().expect("built with an HF level")
    }

    pub fn augmentations(&self) -> &[LevelAugmentation] {
        &self.augmentations
    }

    pub fn augmented(&self) -> impl Iterator<Item = &AugmentedObservation> {
        self.augmentations.iter().flat_map(|a| &a.observations)
    }

    pub fn fusion_gp(&self) -> &TrainedGp {
        &self.fusion_gp
    }

    /// Fixed per-point noise of the fusion training set in original units:
    /// HF points first, then augmented points by ascending level.
    pub fn fusion_noise(&self) -> &[f64] {
        &self.fusion_noise
    }
}
