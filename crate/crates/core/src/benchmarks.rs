//! Analytic benchmark functions with controllable fidelity degradation.
//!
//! Each problem pairs a high-fidelity function with a discrepancy term
//! `delta(x)`; a fidelity level with degradation `d` evaluates
//! `hf(x) + d * delta(x)`.

use std::f64::consts::{E, PI};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::design::lhs;
use crate::error::{Error, Result};
use crate::seed::seed_from_label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscrepancyKind {
    Spatial,
    Oscillatory,
    LinearScaling,
    NoiseOnly,
    ParameterPerturbation,
    CoefficientSimplification,
}

impl DiscrepancyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DiscrepancyKind::Spatial => "spatial",
            DiscrepancyKind::Oscillatory => "oscillatory",
            DiscrepancyKind::LinearScaling => "linear-scaling",
            DiscrepancyKind::NoiseOnly => "noise-only",
            DiscrepancyKind::ParameterPerturbation => "parameter-perturbation",
            DiscrepancyKind::CoefficientSimplification => "coefficient-simplification",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestFunction {
    Branin,
    Rosenbrock,
    Rastrigin,
    Ackley,
    Levy,
    Hartmann3,
    Hartmann6,
    Park1,
    Park2,
    Borehole,
}

impl TestFunction {
    pub const ALL: [TestFunction; 10] = [
        TestFunction::Branin,
        TestFunction::Rosenbrock,
        TestFunction::Rastrigin,
        TestFunction::Ackley,
        TestFunction::Levy,
        TestFunction::Hartmann3,
        TestFunction::Hartmann6,
        TestFunction::Park1,
        TestFunction::Park2,
        TestFunction::Borehole,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestFunction::Branin => "branin",
            TestFunction::Rosenbrock => "rosenbrock",
            TestFunction::Rastrigin => "rastrigin",
            TestFunction::Ackley => "ackley",
            TestFunction::Levy => "levy",
            TestFunction::Hartmann3 => "hartmann3",
            TestFunction::Hartmann6 => "hartmann6",
            TestFunction::Park1 => "park1",
            TestFunction::Park2 => "park2",
            TestFunction::Borehole => "borehole",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == name.to_ascii_lowercase())
    }

    /// `Some(default)` for the families defined in any dimension.
    pub fn variable_dimension(self) -> Option<usize> {
        match self {
            TestFunction::Rosenbrock => Some(10),
            TestFunction::Rastrigin => Some(5),
            TestFunction::Ackley => Some(4),
            TestFunction::Levy => Some(7),
            _ => None,
        }
    }

    fn fixed_dimension(self) -> usize {
        match self {
            TestFunction::Branin => 2,
            TestFunction::Hartmann3 => 3,
            TestFunction::Hartmann6 => 6,
            TestFunction::Park1 | TestFunction::Park2 => 4,
            TestFunction::Borehole => 8,
            f => f.variable_dimension().unwrap_or(2),
        }
    }

    fn discrepancy_kind(self) -> DiscrepancyKind {
        match self {
            TestFunction::Branin | TestFunction::Hartmann3 | TestFunction::Hartmann6 => {
                DiscrepancyKind::ParameterPerturbation
            }
            TestFunction::Rosenbrock | TestFunction::Rastrigin | TestFunction::Levy => DiscrepancyKind::Oscillatory,
            TestFunction::Ackley => DiscrepancyKind::NoiseOnly,
            TestFunction::Park1 => DiscrepancyKind::Spatial,
            TestFunction::Park2 => DiscrepancyKind::LinearScaling,
            TestFunction::Borehole => DiscrepancyKind::CoefficientSimplification,
        }
    }

    fn bounds(self, dim: usize) -> Vec<(f64, f64)> {
        match self {
            TestFunction::Branin => vec![(-5.0, 10.0), (0.0, 15.0)],
            TestFunction::Rosenbrock => vec![(-5.0, 10.0); dim],
            TestFunction::Rastrigin => vec![(-5.12, 5.12); dim],
            TestFunction::Ackley => vec![(-5.0, 5.0); dim],
            TestFunction::Levy => vec![(-10.0, 10.0); dim],
            TestFunction::Hartmann3 | TestFunction::Hartmann6 | TestFunction::Park1 | TestFunction::Park2 => {
                vec![(0.0, 1.0); dim]
            }
            TestFunction::Borehole => BOREHOLE_BOUNDS.to_vec(),
        }
    }

    fn hf(self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Branin => branin(x, BRANIN_B),
            TestFunction::Rosenbrock => rosenbrock(x),
            TestFunction::Rastrigin => rastrigin(x),
            TestFunction::Ackley => ackley(x),
            TestFunction::Levy => levy(x),
            TestFunction::Hartmann3 => hartmann(x, &HARTMANN_ALPHA, &HARTMANN3_A, &HARTMANN3_P),
            TestFunction::Hartmann6 => hartmann(x, &HARTMANN_ALPHA, &HARTMANN6_A, &HARTMANN6_P),
            TestFunction::Park1 => park1(x),
            TestFunction::Park2 => park2(x),
            TestFunction::Borehole => borehole(x, 2.0 * PI, 1.0),
        }
    }

    fn delta(self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Branin => branin(x, BRANIN_B - 0.1) - branin(x, BRANIN_B),
            TestFunction::Rosenbrock | TestFunction::Rastrigin | TestFunction::Levy => {
                0.1 * (10.0 * x[0] + 5.0 * x[1]).sin()
            }
            TestFunction::Ackley => 0.0,
            TestFunction::Hartmann3 => {
                hartmann(x, &perturbed_alpha(), &HARTMANN3_A, &HARTMANN3_P)
                    - hartmann(x, &HARTMANN_ALPHA, &HARTMANN3_A, &HARTMANN3_P)
            }
            TestFunction::Hartmann6 => {
                hartmann(x, &perturbed_alpha(), &HARTMANN6_A, &HARTMANN6_P)
                    - hartmann(x, &HARTMANN_ALPHA, &HARTMANN6_A, &HARTMANN6_P)
            }
            TestFunction::Park1 => x[0].sin() / 10.0 * park1(x) - 2.0 * x[0] + x[1] * x[1] + x[2] * x[2] + 0.5,
            TestFunction::Park2 => (PARK2_GAMMA - 1.0) * park2(x) + PARK2_BETA,
            TestFunction::Borehole => borehole(x, 5.0, 1.5) - borehole(x, 2.0 * PI, 1.0),
        }
    }
}

const BRANIN_B: f64 = 5.1 / (4.0 * PI * PI);

fn branin(x: &[f64], b: f64) -> f64 {
    let (a, c, r, s, t) = (1.0, 5.0 / PI, 6.0, 10.0, 1.0 / (8.0 * PI));
    a * (x[1] - b * x[0] * x[0] + c * x[0] - r).powi(2) + s * (1.0 - t) * x[0].cos() + s
}

fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum()
}

fn rastrigin(x: &[f64]) -> f64 {
    let a = 10.0;
    a * x.len() as f64 + x.iter().map(|v| v * v - a * (2.0 * PI * v).cos()).sum::<f64>()
}

fn ackley(x: &[f64]) -> f64 {
    let (a, b, c) = (20.0, 0.2, 2.0 * PI);
    let n = x.len() as f64;
    let sq = x.iter().map(|v| v * v).sum::<f64>() / n;
    let cs = x.iter().map(|v| (c * v).cos()).sum::<f64>() / n;
    -a * (-b * sq.sqrt()).exp() - cs.exp() + a + E
}

fn levy(x: &[f64]) -> f64 {
    let w: Vec<f64> = x.iter().map(|v| 1.0 + (v - 1.0) / 4.0).collect();
    let n = w.len();
    let head = (PI * w[0]).sin().powi(2);
    let body: f64 = w[..n - 1]
        .iter()
        .map(|wi| (wi - 1.0).powi(2) * (1.0 + 10.0 * (PI * wi + 1.0).sin().powi(2)))
        .sum();
    let wn = w[n - 1];
    let tail = (wn - 1.0).powi(2) * (1.0 + (2.0 * PI * wn).sin().powi(2));
    head + body + tail
}

pub const HARTMANN_ALPHA: [f64; 4] = [1.0, 1.2, 3.0, 3.2];
pub const HARTMANN_DELTA_ALPHA: [f64; 4] = [0.01, -0.01, -0.1, 0.1];

pub const HARTMANN3_A: [[f64; 3]; 4] = [
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
    [3.0, 10.0, 30.0],
    [0.1, 10.0, 35.0],
];

pub const HARTMANN3_P: [[f64; 3]; 4] = [
    [0.3689, 0.1170, 0.2673],
    [0.4699, 0.4387, 0.7470],
    [0.1091, 0.8732, 0.5547],
    [0.0381, 0.5743, 0.8828],
];

pub const HARTMANN6_A: [[f64; 6]; 4] = [
    [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
    [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
    [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
    [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
];

pub const HARTMANN6_P: [[f64; 6]; 4] = [
    [0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886],
    [0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991],
    [0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650],
    [0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381],
];

fn perturbed_alpha() -> [f64; 4] {
    std::array::from_fn(|i| HARTMANN_ALPHA[i] + HARTMANN_DELTA_ALPHA[i])
}

/// Positive-sum Hartmann form (no leading minus).
fn hartmann<const D: usize>(x: &[f64], alpha: &[f64; 4], a: &[[f64; D]; 4], p: &[[f64; D]; 4]) -> f64 {
    (0..4)
        .map(|i| {
            let inner: f64 = (0..D).map(|j| a[i][j] * (x[j] - p[i][j]).powi(2)).sum();
            alpha[i] * (-inner).exp()
        })
        .sum()
}

fn park1(x: &[f64]) -> f64 {
    let (x1, x2, x3, x4) = (x[0], x[1], x[2], x[3]);
    x1 / 2.0 * ((1.0 + (x2 + x3 * x3) * x4 / (x1 * x1)).sqrt() - 1.0) + (x1 + 3.0 * x4) * (1.0 + x3.sin()).exp()
}

const PARK2_GAMMA: f64 = 1.2;
const PARK2_BETA: f64 = -1.0;

fn park2(x: &[f64]) -> f64 {
    2.0 / 3.0 * (x[0] + x[1]).exp() - x[3] * x[2].sin() + x[2]
}

/// `(r_w, r, T_u, H_u, T_l, H_l, L, K_w)`
pub const BOREHOLE_BOUNDS: [(f64, f64); 8] = [
    (0.05, 0.15),
    (100.0, 50_000.0),
    (63_070.0, 115_600.0),
    (990.0, 1_110.0),
    (63.1, 116.0),
    (700.0, 820.0),
    (1_120.0, 1_680.0),
    (9_855.0, 12_045.0),
];

fn borehole(x: &[f64], coefficient: f64, denominator_constant: f64) -> f64 {
    let (rw, r, tu, hu, tl, hl, l, kw) = (x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7]);
    let log_ratio = (r / rw).ln();
    coefficient * tu * (hu - hl)
        / (log_ratio * (denominator_constant + 2.0 * l * tu / (log_ratio * rw * rw * kw) + tu / tl))
}

/// One fidelity level of a benchmark problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelitySpec {
    pub level: usize,
    pub degradation_d: f64,
    pub cost: f64,
    pub noise_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkProblem {
    name: String,
    function: TestFunction,
    bounds: Vec<(f64, f64)>,
    discrepancy_kind: DiscrepancyKind,
    /// Default observation noise of the highest level (output units).
    hf_noise_std: f64,
    /// Default observation noise of every lower level (output units).
    lf_noise_std: f64,
}

impl BenchmarkProblem {
    pub fn new(function: TestFunction) -> Self {
        Self::with_dimension(function, function.fixed_dimension()).expect("default dimension is valid")
    }

    /// Builds a problem, choosing `dim` for the n-dimensional families.
    pub fn with_dimension(function: TestFunction, dim: usize) -> Result<Self> {
        match function.variable_dimension() {
            Some(_) if dim < 2 => {
                return Err(Error::Configuration(format!(
                    "{} needs at least 2 dimensions",
                    function.name()
                )))
            }
            None if dim != function.fixed_dimension() => {
                return Err(Error::Configuration(format!(
                    "{} is only defined in {} dimensions",
                    function.name(),
                    function.fixed_dimension()
                )))
            }
            _ => {}
        }
        let mut problem = Self {
            name: function.name().to_string(),
            function,
            bounds: function.bounds(dim),
            discrepancy_kind: function.discrepancy_kind(),
            hf_noise_std: 0.0,
            lf_noise_std: 0.0,
        };
        if problem.discrepancy_kind == DiscrepancyKind::NoiseOnly {
            problem.lf_noise_std = 0.05 * problem.hf_output_std(10_000);
        }
        Ok(problem)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn function(&self) -> TestFunction {
        self.function
    }

    pub fn dimension(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn discrepancy_kind(&self) -> DiscrepancyKind {
        self.discrepancy_kind
    }

    pub fn default_noise_std(&self, is_highest: bool) -> f64 {
        if is_highest {
            self.hf_noise_std
        } else {
            self.lf_noise_std
        }
    }

    /// Default budget `5 * D` in equivalent high-fidelity evaluations.
    pub fn base_budget(&self) -> f64 {
        5.0 * self.dimension() as f64
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dimension() && x.iter().zip(&self.bounds).all(|(v, (lo, hi))| v >= lo && v <= hi)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dimension() {
            return Err(Error::Contract(format!(
                "{} expects {} inputs, got {}",
                self.name,
                self.dimension(),
                x.len()
            )));
        }
        Ok(())
    }

    pub fn eval_hf(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.function.hf(x))
    }

    pub fn eval_delta(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.function.delta(x))
    }

    pub fn eval_fidelity(&self, x: &[f64], spec: &FidelitySpec) -> Result<f64> {
        self.check_dim(x)?;
        let hf = self.function.hf(x);
        if spec.degradation_d == 0.0 {
            return Ok(hf);
        }
        Ok(hf + spec.degradation_d * self.function.delta(x))
    }

    /// Noisy observation `eval_fidelity(x) + N(0, noise_std^2)`.
    pub fn sample_observation<R: Rng + ?Sized>(&self, x: &[f64], spec: &FidelitySpec, rng: &mut R) -> Result<f64> {
        let clean = self.eval_fidelity(x, spec)?;
        if spec.noise_std == 0.0 {
            return Ok(clean);
        }
        let normal = Normal::new(0.0, spec.noise_std)
            .map_err(|e| Error::Contract(format!("invalid noise std {}: {e}", spec.noise_std)))?;
        Ok(clean + normal.sample(rng))
    }

    /// Standard deviation of the HF output over a seeded LHS sample.
    pub fn hf_output_std(&self, n: usize) -> f64 {
        let x = lhs(n, &self.bounds, seed_from_label(&self.name));
        let ys: Vec<f64> = x
            .row_iter()
            .map(|r| self.function.hf(r.iter().copied().collect::<Vec<_>>().as_slice()))
            .collect();
        let mean = ys.iter().sum::<f64>() / ys.len() as f64;
        (ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / ys.len() as f64).sqrt()
    }

    /// Default fidelity ladder, highest level first: two levels use
    /// `d = (0, 1)` and costs `(1.0, 0.1)`; three levels use `d = (0, 0.5, 1)`
    /// and costs `(1.0, 0.2, 0.1)`.
    pub fn default_fidelities(&self, levels: usize) -> Result<Vec<FidelitySpec>> {
        let ladder: &[(f64, f64)] = match levels {
            2 => &[(0.0, 1.0), (1.0, 0.1)],
            3 => &[(0.0, 1.0), (0.5, 0.2), (1.0, 0.1)],
            n => {
                return Err(Error::Configuration(format!(
                    "no default fidelity ladder for {n} levels"
                )))
            }
        };
        Ok(ladder
            .iter()
            .enumerate()
            .map(|(i, &(d, cost))| FidelitySpec {
                level: levels - i,
                degradation_d: d,
                cost,
                noise_std: self.default_noise_std(i == 0),
            })
            .collect())
    }
}

/// All ten problems at their default dimensions.
pub fn catalog() -> Vec<BenchmarkProblem> {
    TestFunction::ALL.into_iter().map(BenchmarkProblem::new).collect()
}

/// Registry lookup by case-insensitive name.
pub fn problem_by_name(name: &str) -> Result<BenchmarkProblem> {
    TestFunction::from_name(name)
        .map(BenchmarkProblem::new)
        .ok_or_else(|| Error::UnknownProblem(name.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn hf(f: TestFunction, x: &[f64]) -> f64 {
        BenchmarkProblem::new(f).eval_hf(x).unwrap()
    }

    #[test]
    fn catalog_has_ten_problems_with_expected_dimensions() {
        let dims: Vec<usize> = catalog().iter().map(|p| p.dimension()).collect();
        assert_eq!(dims, vec![2, 10, 5, 4, 7, 3, 6, 4, 4, 8]);
    }

    #[test]
    fn borehole_radius_bounds() {
        assert_eq!(problem_by_name("borehole").unwrap().bounds()[0], (0.05, 0.15));
    }

    #[test]
    fn ackley_is_noise_only() {
        let p = problem_by_name("ackley").unwrap();
        assert_eq!(p.discrepancy_kind(), DiscrepancyKind::NoiseOnly);
        let mut rng = crate::seed::rng_from_seed(0);
        for _ in 0..100 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
            assert_eq!(p.eval_delta(&x).unwrap(), 0.0);
        }
        assert!(p.default_noise_std(false) > 0.0);
        assert_eq!(p.default_noise_std(true), 0.0);
        assert_relative_eq!(p.default_noise_std(false), 0.05 * p.hf_output_std(10_000));
    }

    #[test]
    fn delta_vanishes_only_for_noise_only_problems() {
        let mut rng = crate::seed::rng_from_seed(1);
        for p in catalog() {
            let nonzero = (0..50).any(|_| {
                let x: Vec<f64> = p.bounds().iter().map(|(lo, hi)| rng.random_range(*lo..*hi)).collect();
                p.eval_delta(&x).unwrap() != 0.0
            });
            assert_eq!(
                nonzero,
                p.discrepancy_kind() != DiscrepancyKind::NoiseOnly,
                "{}",
                p.name()
            );
        }
    }

    #[test]
    fn branin_global_minima() {
        for x in [[-PI, 12.275], [PI, 2.275], [9.42478, 2.475]] {
            assert_relative_eq!(hf(TestFunction::Branin, &x), 0.397887, epsilon = 1e-4);
        }
    }

    #[test]
    fn zero_minima_of_n_dimensional_families() {
        assert!(hf(TestFunction::Ackley, &[0.0; 4]).abs() < 1e-9);
        assert!(hf(TestFunction::Rastrigin, &[0.0; 5]).abs() < 1e-12);
        assert!(hf(TestFunction::Rosenbrock, &[1.0; 10]).abs() < 1e-12);
        assert!(hf(TestFunction::Levy, &[1.0; 7]).abs() < 1e-12);
    }

    #[test]
    fn hartmann_tables_match_published_values() {
        assert_eq!(HARTMANN6_A[0][0], 10.0);
        assert_eq!(HARTMANN6_A[1][0], 0.05);
        assert_eq!(HARTMANN6_A[3][5], 14.0);
        assert_eq!(HARTMANN6_P[0][3], 0.0124);
        assert_eq!(HARTMANN6_P[3][5], 0.0381);
        assert_eq!(HARTMANN3_A[1][2], 35.0);
        assert_eq!(HARTMANN3_P[2][1], 0.8732);
        assert_eq!(HARTMANN_ALPHA, [1.0, 1.2, 3.0, 3.2]);
        assert_eq!(HARTMANN_DELTA_ALPHA, [0.01, -0.01, -0.1, 0.1]);
    }

    #[test]
    fn hartmann_discrepancy_is_alpha_perturbation() {
        let p = BenchmarkProblem::new(TestFunction::Hartmann3);
        let x = [0.2, 0.5, 0.8];
        let expected: f64 = (0..4)
            .map(|i| {
                let inner: f64 = (0..3)
                    .map(|j| HARTMANN3_A[i][j] * (x[j] - HARTMANN3_P[i][j]).powi(2))
                    .sum();
                HARTMANN_DELTA_ALPHA[i] * (-inner).exp()
            })
            .sum();
        assert_relative_eq!(p.eval_delta(&x).unwrap(), expected, epsilon = 1e-14);
    }

    #[test]
    fn park2_low_fidelity_is_linear_in_hf() {
        let p = BenchmarkProblem::new(TestFunction::Park2);
        let spec = FidelitySpec {
            level: 1,
            degradation_d: 1.0,
            cost: 0.1,
            noise_std: 0.0,
        };
        let mut rng = crate::seed::rng_from_seed(2);
        for _ in 0..50 {
            let x: Vec<f64> = (0..4).map(|_| rng.random::<f64>()).collect();
            let f = p.eval_hf(&x).unwrap();
            assert_relative_eq!(p.eval_fidelity(&x, &spec).unwrap(), 1.2 * f - 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn rastrigin_discrepancy_at_zero_phase() {
        let p = BenchmarkProblem::new(TestFunction::Rastrigin);
        let spec = FidelitySpec {
            level: 1,
            degradation_d: 1.0,
            cost: 0.1,
            noise_std: 0.0,
        };
        let x = [0.0, 0.0, 1.3, -2.0, 0.7];
        assert_eq!(p.eval_fidelity(&x, &spec).unwrap(), p.eval_hf(&x).unwrap());
    }

    #[test]
    fn zero_degradation_is_exactly_hf() {
        let mut rng = crate::seed::rng_from_seed(3);
        for p in catalog() {
            let spec = FidelitySpec {
                level: 2,
                degradation_d: 0.0,
                cost: 1.0,
                noise_std: 0.0,
            };
            let x: Vec<f64> = p.bounds().iter().map(|(lo, hi)| rng.random_range(*lo..*hi)).collect();
            assert_eq!(p.eval_fidelity(&x, &spec).unwrap(), p.eval_hf(&x).unwrap());
        }
    }

    #[test]
    fn fidelity_is_affine_in_degradation() {
        let mut rng = crate::seed::rng_from_seed(4);
        for p in catalog() {
            for _ in 0..20 {
                let x: Vec<f64> = p.bounds().iter().map(|(lo, hi)| rng.random_range(*lo..*hi)).collect();
                let (d1, d2) = (rng.random_range(0.0..2.0), rng.random_range(0.0..2.0));
                let s = |d| FidelitySpec {
                    level: 1,
                    degradation_d: d,
                    cost: 0.1,
                    noise_std: 0.0,
                };
                let lhs = p.eval_fidelity(&x, &s(d1)).unwrap() - p.eval_fidelity(&x, &s(d2)).unwrap();
                let rhs = (d1 - d2) * p.eval_delta(&x).unwrap();
                let scale = p.eval_hf(&x).unwrap().abs().max(1.0);
                assert!((lhs - rhs).abs() <= 1e-10 * scale, "{}: {lhs} vs {rhs}", p.name());
            }
        }
    }

    #[test]
    fn borehole_midpoint_is_physical() {
        let p = BenchmarkProblem::new(TestFunction::Borehole);
        let mid: Vec<f64> = p.bounds().iter().map(|(lo, hi)| 0.5 * (lo + hi)).collect();
        let v = p.eval_hf(&mid).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }

    #[test]
    fn noiseless_sampling_is_deterministic() {
        let p = BenchmarkProblem::new(TestFunction::Branin);
        let spec = FidelitySpec {
            level: 1,
            degradation_d: 1.0,
            cost: 0.1,
            noise_std: 0.0,
        };
        let mut rng = crate::seed::rng_from_seed(5);
        let x = [1.0, 2.0];
        assert_eq!(
            p.sample_observation(&x, &spec, &mut rng).unwrap(),
            p.eval_fidelity(&x, &spec).unwrap()
        );
    }

    #[test]
    fn seeded_noise_sequence_is_reproducible() {
        let p = BenchmarkProblem::new(TestFunction::Branin);
        let spec = FidelitySpec {
            level: 1,
            degradation_d: 1.0,
            cost: 0.1,
            noise_std: 0.3,
        };
        let draw = |seed| {
            let mut rng = crate::seed::rng_from_seed(seed);
            (0..10)
                .map(|_| p.sample_observation(&[1.0, 2.0], &spec, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(9), draw(9));
        assert_ne!(draw(9), draw(10));
    }

    #[test]
    fn sample_std_matches_noise_level() {
        let p = BenchmarkProblem::new(TestFunction::Park2);
        let spec = FidelitySpec {
            level: 1,
            degradation_d: 1.0,
            cost: 0.1,
            noise_std: 0.5,
        };
        let x = [0.3, 0.4, 0.5, 0.6];
        let mut rng = crate::seed::rng_from_seed(6);
        let draws: Vec<f64> = (0..100_000)
            .map(|_| p.sample_observation(&x, &spec, &mut rng).unwrap())
            .collect();
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let sd = (draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64).sqrt();
        assert!((0.49..=0.51).contains(&sd), "{sd}");
    }

    #[test]
    fn registry_and_dimension_checks() {
        assert!(matches!(problem_by_name("nope"), Err(Error::UnknownProblem(_))));
        assert_eq!(problem_by_name("Hartmann6").unwrap().dimension(), 6);
        assert!(BenchmarkProblem::with_dimension(TestFunction::Branin, 3).is_err());
        assert_eq!(
            BenchmarkProblem::with_dimension(TestFunction::Levy, 3)
                .unwrap()
                .dimension(),
            3
        );
        let p = problem_by_name("branin").unwrap();
        assert!(p.eval_hf(&[1.0]).is_err());
        assert!(!p.contains(&[-6.0, 1.0]));
        assert!(p.eval_hf(&[-6.0, 1.0]).is_ok());
    }

    #[test]
    fn default_ladders() {
        let p = problem_by_name("branin").unwrap();
        let three = p.default_fidelities(3).unwrap();
        assert_eq!(three.iter().map(|s| s.level).collect::<Vec<_>>(), vec![3, 2, 1]);
        assert_eq!(
            three.iter().map(|s| s.degradation_d).collect::<Vec<_>>(),
            vec![0.0, 0.5, 1.0]
        );
        assert_eq!(three.iter().map(|s| s.cost).collect::<Vec<_>>(), vec![1.0, 0.2, 0.1]);
        assert!(p.default_fidelities(4).is_err());
    }
}
