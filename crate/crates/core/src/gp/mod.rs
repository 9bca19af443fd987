//! Exact Gaussian process regression with an RBF-ARD kernel.
//!
//! Targets are standardized per fit and the prior mean is zero in that
//! space. Hyperparameters are fitted by multi-start maximization of the log
//! marginal likelihood over log-space boxes. Noise is either learned
//! (homoscedastic), held at a fixed scalar, or supplied as a fixed per-point
//! vector that is never touched by the optimizer.

mod kernel;
mod lbfgs;
mod likelihood;

pub use kernel::{kernel_matrix, KernelParams};
pub use likelihood::{log_marginal_likelihood, DEFAULT_JITTER_SCHEDULE};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::rng_from_seed;
use kernel::{check_columns, gram_matrix};
use lbfgs::BoxLbfgs;
use likelihood::{add_noise, factorize, lml_with_schedule, validate_noise, Factored};

/// Affine map between original and standardized output units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutputTransform {
    pub offset: f64,
    pub scale: f64,
}

impl OutputTransform {
    pub const SCALE_FLOOR: f64 = 1e-12;

    pub fn identity() -> Self {
        Self {
            offset: 0.0,
            scale: 1.0,
        }
    }

    /// Mean and population standard deviation of `targets`, scale floored.
    pub fn from_targets(targets: &[f64]) -> Self {
        if targets.is_empty() {
            return Self::identity();
        }
        let n = targets.len() as f64;
        let offset = targets.iter().sum::<f64>() / n;
        let var = targets.iter().map(|y| (y - offset).powi(2)).sum::<f64>() / n;
        Self {
            offset,
            scale: var.sqrt().max(Self::SCALE_FLOOR),
        }
    }

    pub fn standardize(&self, y: f64) -> f64 {
        (y - self.offset) / self.scale
    }

    pub fn restore(&self, z: f64) -> f64 {
        z * self.scale + self.offset
    }

    /// Original-units variance into standardized units.
    pub fn standardize_variance(&self, v: f64) -> f64 {
        v / (self.scale * self.scale)
    }

    pub fn restore_variance(&self, v: f64) -> f64 {
        v * self.scale * self.scale
    }
}

/// Box constraints on the natural-log hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogBounds {
    pub lengthscale: (f64, f64),
    pub output_variance: (f64, f64),
    pub noise_variance: (f64, f64),
}

impl Default for LogBounds {
    fn default() -> Self {
        Self {
            lengthscale: (1e-3f64.ln(), 10f64.ln()),
            output_variance: (1e-4f64.ln(), 1e2f64.ln()),
            noise_variance: (1e-8f64.ln(), 0.0),
        }
    }
}

impl LogBounds {
    fn validate(&self) -> Result<()> {
        for (name, (lo, hi)) in [
            ("lengthscale", self.lengthscale),
            ("output variance", self.output_variance),
            ("noise variance", self.noise_variance),
        ] {
            if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
                return Err(Error::Configuration(format!(
                    "{name} bounds must satisfy lower < upper, got ({lo}, {hi})"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub restarts: usize,
    pub max_iterations: usize,
    pub bounds: LogBounds,
    pub jitter_schedule: Vec<f64>,
    pub learn_noise: bool,
    /// Noise variance used when `learn_noise` is false and no per-point
    /// vector is supplied (standardized units).
    pub fixed_noise_variance: f64,
    /// Seeds the random restarts.
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 5,
            max_iterations: 200,
            bounds: LogBounds::default(),
            jitter_schedule: DEFAULT_JITTER_SCHEDULE.to_vec(),
            learn_noise: true,
            fixed_noise_variance: 1e-8,
            seed: 0,
        }
    }
}

impl FitOptions {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.max_iterations == 0 {
            return Err(Error::Configuration(
                "restarts and max_iterations must be positive".into(),
            ));
        }
        self.bounds.validate()?;
        if self.jitter_schedule.iter().any(|j| !(*j >= 0.0)) || self.jitter_schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Configuration(
                "jitter schedule must be an increasing sequence of non-negative values".into(),
            ));
        }
        if !(self.fixed_noise_variance >= 0.0) {
            return Err(Error::Configuration("fixed noise variance must be non-negative".into()));
        }
        Ok(())
    }
}

/// Posterior mean and latent-function variance at a set of query points.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub means: DVector<f64>,
    pub variances: DVector<f64>,
}

/// A conditioned GP. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedGp {
    params: KernelParams,
    train_inputs: DMatrix<f64>,
    train_targets: DVector<f64>,
    per_point_noise: Option<Vec<f64>>,
    factor: DMatrix<f64>,
    dual_weights: DVector<f64>,
    output_transform: OutputTransform,
    jitter: f64,
    log_marginal_likelihood: f64,
}

impl TrainedGp {
    /// Conditions a GP on already-standardized targets with fixed params.
    pub fn condition(
        params: KernelParams,
        inputs: DMatrix<f64>,
        standardized_targets: DVector<f64>,
        per_point_noise: Option<Vec<f64>>,
        output_transform: OutputTransform,
        jitter_schedule: &[f64],
    ) -> Result<Self> {
        let n = inputs.nrows();
        if n == 0 {
            return Err(Error::Contract("cannot condition on zero points".into()));
        }
        if standardized_targets.len() != n {
            return Err(Error::Contract(format!(
                "{} targets for {n} inputs",
                standardized_targets.len()
            )));
        }
        check_columns(&inputs, params.dim(), "training input")?;
        validate_noise(per_point_noise.as_deref(), n)?;

        let mut k = gram_matrix(&inputs, &params)?;
        add_noise(&mut k, &params, per_point_noise.as_deref());
        let Factored { chol, jitter } = factorize(&k, jitter_schedule)?;
        let dual_weights = chol.solve(&standardized_targets);
        let factor = chol.l();
        let log_det: f64 = 2.0 * (0..n).map(|i| factor[(i, i)].ln()).sum::<f64>();
        let log_marginal_likelihood = -0.5 * standardized_targets.dot(&dual_weights)
            - 0.5 * log_det
            - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
        Ok(Self {
            params,
            train_inputs: inputs,
            train_targets: standardized_targets,
            per_point_noise,
            factor,
            dual_weights,
            output_transform,
            jitter,
            log_marginal_likelihood,
        })
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    pub fn train_inputs(&self) -> &DMatrix<f64> {
        &self.train_inputs
    }

    pub fn train_targets(&self) -> &DVector<f64> {
        &self.train_targets
    }

    pub fn per_point_noise(&self) -> Option<&[f64]> {
        self.per_point_noise.as_deref()
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    pub fn dual_weights(&self) -> &DVector<f64> {
        &self.dual_weights
    }

    pub fn output_transform(&self) -> OutputTransform {
        self.output_transform
    }

    /// Diagonal jitter that was needed to factorize the training covariance.
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    pub fn log_marginal_likelihood(&self) -> f64 {
        self.log_marginal_likelihood
    }

    pub fn len(&self) -> usize {
        self.train_inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    /// Learned (or fixed) homoscedastic noise variance in original units.
    pub fn noise_variance_original(&self) -> f64 {
        self.output_transform.restore_variance(self.params.noise_variance())
    }

    /// Posterior in standardized units.
    pub fn predict_standardized(&self, queries: &DMatrix<f64>) -> Result<Prediction> {
        check_columns(queries, self.dim(), "query")?;
        let cross = kernel_matrix(queries, &self.train_inputs, &self.params)?;
        let means = &cross * &self.dual_weights;
        let solved = self
            .factor
            .solve_lower_triangular(&cross.transpose())
            .ok_or_else(|| Error::Contract("training factor is singular".into()))?;
        let sf2 = self.params.output_variance();
        let variances = DVector::from_iterator(
            queries.nrows(),
            solved.column_iter().map(|c| (sf2 - c.norm_squared()).max(0.0)),
        );
        Ok(Prediction { means, variances })
    }

    /// Posterior mean and latent variance in original output units.
    pub fn predict(&self, queries: &DMatrix<f64>) -> Result<Prediction> {
        let mut p = self.predict_standardized(queries)?;
        let t = self.output_transform;
        p.means.apply(|m| *m = t.restore(*m));
        p.variances.apply(|v| *v = t.restore_variance(*v));
        Ok(p)
    }
}

struct Layout {
    dim: usize,
    learn_noise: bool,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl Layout {
    fn new(dim: usize, options: &FitOptions, learn_noise: bool) -> Self {
        let b = &options.bounds;
        let mut lower = vec![b.lengthscale.0; dim];
        let mut upper = vec![b.lengthscale.1; dim];
        lower.push(b.output_variance.0);
        upper.push(b.output_variance.1);
        if learn_noise {
            lower.push(b.noise_variance.0);
            upper.push(b.noise_variance.1);
        }
        Self {
            dim,
            learn_noise,
            lower,
            upper,
        }
    }

    fn params(&self, theta: &[f64], fixed_noise: f64) -> Result<KernelParams> {
        let noise = if self.learn_noise {
            theta[self.dim + 1].exp()
        } else {
            fixed_noise
        };
        KernelParams::new(
            theta[..self.dim].iter().map(|v| v.exp()).collect(),
            theta[self.dim].exp(),
            noise,
        )
    }

    fn heuristic_start(&self) -> Vec<f64> {
        let mut t = vec![0.5f64.ln(); self.dim];
        t.push(0.0);
        if self.learn_noise {
            t.push(1e-2f64.ln());
        }
        t.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (lo, hi))| v.clamp(*lo, *hi))
            .collect()
    }

    fn random_start(&self, rng: &mut impl Rng) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| rng.random_range(*lo..*hi))
            .collect()
    }
}

/// Fits kernel hyperparameters by Type-II maximum likelihood.
///
/// `inputs` must already be normalized to the unit hypercube. When
/// `per_point_noise` is given (standardized units, as produced by
/// [`OutputTransform::standardize_variance`] on
/// `OutputTransform::from_targets(targets)`), `options.learn_noise` must be
/// false and the vector is held fixed throughout.
pub fn fit_gp(
    inputs: &DMatrix<f64>,
    targets: &DVector<f64>,
    options: &FitOptions,
    per_point_noise: Option<&[f64]>,
) -> Result<TrainedGp> {
    options.validate()?;
    let n = inputs.nrows();
    let dim = inputs.ncols();
    if n == 0 || dim == 0 {
        return Err(Error::Contract("fit needs at least one point and one dimension".into()));
    }
    if targets.len() != n {
        return Err(Error::Contract(format!("{} targets for {n} inputs", targets.len())));
    }
    if options.learn_noise && n < 2 {
        return Err(Error::Contract("learning noise needs at least two points".into()));
    }
    if per_point_noise.is_some() && options.learn_noise {
        return Err(Error::Configuration(
            "per-point noise is fixed; learn_noise must be false".into(),
        ));
    }
    validate_noise(per_point_noise, n)?;

    let transform = OutputTransform::from_targets(targets.as_slice());
    let y = targets.map(|v| transform.standardize(v));
    let fixed_noise = if per_point_noise.is_some() {
        0.0
    } else {
        options.fixed_noise_variance
    };
    let layout = Layout::new(dim, options, options.learn_noise);
    let optimizer = BoxLbfgs {
        max_iterations: options.max_iterations,
        ..Default::default()
    };

    let mut rng = rng_from_seed(options.seed);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for restart in 0..options.restarts {
        let start = if restart == 0 {
            layout.heuristic_start()
        } else {
            layout.random_start(&mut rng)
        };
        let objective = |theta: &[f64]| {
            let params = layout.params(theta, fixed_noise).ok()?;
            let (v, g) = lml_with_schedule(
                &params,
                inputs,
                &y,
                per_point_noise,
                layout.learn_noise,
                &options.jitter_schedule,
            )
            .ok()?;
            Some((-v, g.into_iter().map(|x| -x).collect()))
        };
        if let Some(m) = optimizer.minimize(objective, &start, &layout.lower, &layout.upper) {
            let lml = -m.value;
            if best.as_ref().is_none_or(|(b, _)| lml > *b) {
                best = Some((lml, m.x));
            }
        }
    }

    let Some((_, theta)) = best else {
        return Err(Error::Fitting {
            restarts: options.restarts,
            jitter_history: std::iter::once(0.0)
                .chain(options.jitter_schedule.iter().copied())
                .collect(),
        });
    };
    TrainedGp::condition(
        layout.params(&theta, fixed_noise)?,
        inputs.clone(),
        y,
        per_point_noise.map(<[f64]>::to_vec),
        transform,
        &options.jitter_schedule,
    )
}
