//! Experiment and sweep configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::benchmarks::{problem_by_name, BenchmarkProblem, FidelitySpec};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mast,
    HfOnly,
    LfOnly,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Mast, Method::HfOnly, Method::LfOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Mast => "mast",
            Method::HfOnly => "hf_only",
            Method::LfOnly => "lf_only",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.as_str() == s)
    }
}

/// Total budget in equivalent-HF evaluations, either absolute or as a
/// multiple of the base budget `5 D`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum BudgetRule {
    Total(f64),
    Scale(f64),
}

impl Default for BudgetRule {
    fn default() -> Self {
        BudgetRule::Scale(1.0)
    }
}

impl BudgetRule {
    pub fn resolve(self, problem: &BenchmarkProblem) -> f64 {
        match self {
            BudgetRule::Total(b) => b,
            BudgetRule::Scale(s) => s * problem.base_budget(),
        }
    }
}

/// A fidelity level as written in a config file. Missing noise falls back to
/// the problem default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FidelityConfig {
    pub level: usize,
    pub degradation_d: f64,
    pub cost: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_std: Option<f64>,
}

impl From<FidelitySpec> for FidelityConfig {
    fn from(s: FidelitySpec) -> Self {
        Self {
            level: s.level,
            degradation_d: s.degradation_d,
            cost: s.cost,
            noise_std: Some(s.noise_std),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: String,
    /// Defaults to the problem's standard ladder with one level per fraction.
    #[serde(default)]
    pub fidelity_specs: Vec<FidelityConfig>,
    #[serde(default)]
    pub budget_rule: BudgetRule,
    /// One fraction per entry of `fidelity_specs`, in the same order.
    #[serde(default)]
    pub fractions: Vec<f64>,
    #[serde(default = "default_repetitions")]
    pub repetitions: usize,
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_repetitions() -> usize {
    25
}

fn default_n_test() -> usize {
    1000
}

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("results")
}

/// Default split for a ladder of the given length, highest level first.
pub fn default_fractions(levels: usize) -> Option<Vec<f64>> {
    match levels {
        2 => Some(vec![0.7, 0.3]),
        3 => Some(vec![0.5, 0.3, 0.2]),
        _ => None,
    }
}

/// A config with every default filled in and checked.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedConfig {
    pub problem: BenchmarkProblem,
    pub specs: Vec<FidelitySpec>,
    pub fractions: Vec<f64>,
    pub budget: f64,
    pub repetitions: usize,
    pub n_test: usize,
    pub base_seed: u64,
    pub methods: Vec<Method>,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn new(problem: &str) -> Self {
        Self {
            problem: problem.to_string(),
            fidelity_specs: Vec::new(),
            budget_rule: BudgetRule::default(),
            fractions: Vec::new(),
            repetitions: default_repetitions(),
            n_test: default_n_test(),
            base_seed: 0,
            methods: default_methods(),
            output_dir: default_output_dir(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Configuration(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn resolve(&self) -> Result<ResolvedConfig> {
        let problem = problem_by_name(&self.problem)?;

        let levels = match (self.fidelity_specs.len(), self.fractions.len()) {
            (0, 0) => 2,
            (0, n) => n,
            (n, _) => n,
        };
        let specs: Vec<FidelitySpec> = if self.fidelity_specs.is_empty() {
            problem.default_fidelities(levels)?
        } else {
            let top = self.fidelity_specs.iter().map(|s| s.level).max().unwrap_or(0);
            self.fidelity_specs
                .iter()
                .map(|s| FidelitySpec {
                    level: s.level,
                    degradation_d: s.degradation_d,
                    cost: s.cost,
                    noise_std: s.noise_std.unwrap_or_else(|| problem.default_noise_std(s.level == top)),
                })
                .collect()
        };
        let fractions = if self.fractions.is_empty() {
            default_fractions(levels).ok_or_else(|| {
                Error::Configuration(format!("no default fractions for {levels} levels; set `fractions`"))
            })?
        } else {
            self.fractions.clone()
        };

        validate_specs(&specs)?;
        if fractions.len() != specs.len() {
            return Err(Error::Configuration(format!(
                "{} fractions for {} fidelity levels",
                fractions.len(),
                specs.len()
            )));
        }
        if self.repetitions == 0 || self.n_test == 0 {
            return Err(Error::Configuration("repetitions and n_test must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Configuration("at least one method is required".into()));
        }
        let mut methods = self.methods.clone();
        methods.sort();
        methods.dedup();

        let budget = self.budget_rule.resolve(&problem);
        if !(budget > 0.0 && budget.is_finite()) {
            return Err(Error::Configuration(format!("budget must be positive, got {budget}")));
        }
        crate::design::allocate_budget(
            budget,
            &fractions,
            &specs.iter().map(|s| s.cost).collect::<Vec<_>>(),
            None,
        )
        .map_err(|e| match e {
            Error::Allocation(m) => Error::Configuration(m),
            other => other,
        })?;

        Ok(ResolvedConfig {
            problem,
            specs,
            fractions,
            budget,
            repetitions: self.repetitions,
            n_test: self.n_test,
            base_seed: self.base_seed,
            methods,
            output_dir: self.output_dir.clone(),
        })
    }
}

fn validate_specs(specs: &[FidelitySpec]) -> Result<()> {
    if specs.len() < 2 {
        return Err(Error::Configuration("at least two fidelity levels are required".into()));
    }
    let mut sorted: Vec<&FidelitySpec> = specs.iter().collect();
    sorted.sort_by_key(|s| s.level);
    if sorted[0].level == 0 {
        return Err(Error::Configuration("fidelity levels start at 1".into()));
    }
    for w in sorted.windows(2) {
        if w[0].level == w[1].level {
            return Err(Error::Configuration(format!("duplicate fidelity level {}", w[0].level)));
        }
        if !(w[0].cost < w[1].cost) {
            return Err(Error::Configuration("costs must strictly increase with level".into()));
        }
    }
    for s in specs {
        if !(s.cost > 0.0 && s.cost.is_finite()) || !(s.degradation_d >= 0.0) || !(s.noise_std >= 0.0) {
            return Err(Error::Configuration(format!(
                "invalid fidelity level {}: {s:?}",
                s.level
            )));
        }
    }
    let top = sorted.last().expect("non-empty");
    if top.degradation_d != 0.0 {
        return Err(Error::Configuration(format!(
            "the highest level must have degradation_d = 0, got {}",
            top.degradation_d
        )));
    }
    Ok(())
}

impl ResolvedConfig {
    pub fn highest(&self) -> &FidelitySpec {
        self.specs.iter().max_by_key(|s| s.level).expect("validated")
    }

    pub fn lowest(&self) -> &FidelitySpec {
        self.specs.iter().min_by_key(|s| s.level).expect("validated")
    }

    pub fn costs(&self) -> Vec<f64> {
        self.specs.iter().map(|s| s.cost).collect()
    }

    /// Hex SHA-256 over everything that influences the records. The output
    /// directory is excluded so identical experiments in different places
    /// carry the same digest.
    pub fn digest(&self) -> String {
        #[derive(Serialize)]
        struct Canonical<'a> {
            problem: &'a str,
            dimension: usize,
            specs: &'a [FidelitySpec],
            fractions: &'a [f64],
            budget: f64,
            repetitions: usize,
            n_test: usize,
            base_seed: u64,
            methods: &'a [Method],
        }
        let text = serde_json::to_string(&Canonical {
            problem: self.problem.name(),
            dimension: self.problem.dimension(),
            specs: &self.specs,
            fractions: &self.fractions,
            budget: self.budget,
            repetitions: self.repetitions,
            n_test: self.n_test,
            base_seed: self.base_seed,
            methods: &self.methods,
        })
        .expect("plain data serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    Allocation,
    BudgetScale,
    Discrepancy,
}

impl SweepKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepKind::Allocation => "allocation",
            SweepKind::BudgetScale => "budget_scale",
            SweepKind::Discrepancy => "discrepancy",
        }
    }

    /// Accepts the CLI spelling `budget` as well as `budget_scale`.
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "allocation" => Some(SweepKind::Allocation),
            "budget" | "budget_scale" | "budget-scale" => Some(SweepKind::BudgetScale),
            "discrepancy" => Some(SweepKind::Discrepancy),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kind: SweepKind,
    pub grid: Vec<f64>,
}

impl SweepSpec {
    pub fn new(kind: SweepKind, grid: Vec<f64>) -> Result<Self> {
        let spec = Self { kind, grid };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Configuration("sweep grid is empty".into()));
        }
        let ok = |g: f64| match self.kind {
            SweepKind::Allocation => g > 0.0 && g <= 1.0,
            SweepKind::BudgetScale => g > 0.0 && g.is_finite(),
            SweepKind::Discrepancy => g >= 0.0 && g.is_finite(),
        };
        if let Some(bad) = self.grid.iter().find(|g| !ok(**g)) {
            return Err(Error::Configuration(format!(
                "grid value {bad} is out of range for a {} sweep",
                self.kind.as_str()
            )));
        }
        Ok(())
    }

    /// Parses a comma-separated list such as `0.1,0.5,0.9`.
    pub fn parse_grid(text: &str) -> Result<Vec<f64>> {
        text.split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Configuration(format!("invalid grid value {t:?}")))
            })
            .collect()
    }

    /// The config for one grid point.
    pub fn apply(&self, base: &ResolvedConfig, value: f64) -> Result<ResolvedConfig> {
        let mut cfg = base.clone();
        match self.kind {
            SweepKind::Allocation => {
                let hf_idx = index_of_level(&cfg, cfg.highest().level);
                let rest: f64 = cfg
                    .fractions
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != hf_idx)
                    .map(|(_, f)| f)
                    .sum();
                let lower = cfg.specs.len() - 1;
                for (i, f) in cfg.fractions.iter_mut().enumerate() {
                    *f = if i == hf_idx {
                        value
                    } else if rest > 0.0 {
                        // keep the relative split among the lower levels
                        *f / rest * (1.0 - value)
                    } else {
                        (1.0 - value) / lower as f64
                    };
                }
            }
            SweepKind::BudgetScale => {
                cfg.budget = value * cfg.problem.base_budget();
            }
            SweepKind::Discrepancy => {
                let idx = index_of_level(&cfg, cfg.lowest().level);
                cfg.specs[idx].degradation_d = value;
            }
        }
        crate::design::allocate_budget(cfg.budget, &cfg.fractions, &cfg.costs(), None)?;
        Ok(cfg)
    }
}

fn index_of_level(cfg: &ResolvedConfig, level: usize) -> usize {
    cfg.specs.iter().position(|s| s.level == level).expect("level present")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_defaults() {
        let cfg = ExperimentConfig::from_toml("problem = \"branin\"").unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.repetitions, 25);
        assert_eq!(r.n_test, 1000);
        assert_eq!(r.budget, 10.0);
        assert_eq!(r.fractions, vec![0.7, 0.3]);
        assert_eq!(r.specs.len(), 2);
        assert_eq!(r.highest().cost, 1.0);
        assert_eq!(r.lowest().degradation_d, 1.0);
        assert_eq!(r.methods, Method::ALL.to_vec());
    }

    #[test]
    fn three_fraction_config_uses_three_level_ladder() {
        let cfg = ExperimentConfig::from_toml("problem = \"branin\"\nfractions = [0.5, 0.3, 0.2]").unwrap();
        let r = cfg.resolve().unwrap();
        let d: Vec<f64> = r.specs.iter().map(|s| s.degradation_d).collect();
        assert_eq!(d, vec![0.0, 0.5, 1.0]);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = ExperimentConfig::from_toml("problem = \"branin\"\nrepetition = 3").unwrap_err();
        assert!(matches!(err, Error::Configuration(_)));
        let err = ExperimentConfig::from_toml(
            "problem = \"branin\"\n[[fidelity_specs]]\nlevel = 1\ndegradation_d = 0.0\ncost = 1.0\ncolor = 1",
        )
        .unwrap_err();
        assert!(matches!(err, Error::Configuration(_)));
    }

    #[test]
    fn explicit_specs_and_budget_rules() {
        let text = r#"
problem = "borehole"
budget_rule = { total = 40.0 }
fractions = [0.7, 0.3]
methods = ["mast", "hf_only"]

[[fidelity_specs]]
level = 2
degradation_d = 0.0
cost = 1.0

[[fidelity_specs]]
level = 1
degradation_d = 1.0
cost = 0.1
noise_std = 0.5
"#;
        let r = ExperimentConfig::from_toml(text).unwrap().resolve().unwrap();
        assert_eq!(r.budget, 40.0);
        assert_eq!(r.specs[1].noise_std, 0.5);
        assert_eq!(r.specs[0].noise_std, 0.0);
        assert_eq!(r.methods, vec![Method::Mast, Method::HfOnly]);

        let scaled = ExperimentConfig::from_toml("problem = \"borehole\"\nbudget_rule = { scale = 2.0 }").unwrap();
        assert_eq!(scaled.resolve().unwrap().budget, 80.0);
    }

    #[test]
    fn invalid_configs_are_configuration_errors() {
        let cases = [
            "problem = \"nope\"",
            "problem = \"branin\"\nrepetitions = 0",
            "problem = \"branin\"\nfractions = [0.6, 0.3]",
            "problem = \"branin\"\nfractions = [1.0]",
            "problem = \"branin\"\nmethods = []",
            "problem = \"branin\"\nbudget_rule = { total = -1.0 }",
        ];
        for c in cases {
            let r = ExperimentConfig::from_toml(c).and_then(|c| c.resolve());
            assert!(
                matches!(r, Err(Error::Configuration(_)) | Err(Error::UnknownProblem(_))),
                "{c}: {r:?}"
            );
        }
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = ExperimentConfig::new("park1");
        cfg.fractions = vec![0.6, 0.4];
        cfg.budget_rule = BudgetRule::Total(20.0);
        let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn digest_ignores_output_dir_only() {
        let mut a = ExperimentConfig::new("branin");
        let r1 = a.resolve().unwrap();
        a.output_dir = PathBuf::from("/elsewhere");
        assert_eq!(r1.digest(), a.resolve().unwrap().digest());
        a.base_seed = 1;
        assert_ne!(r1.digest(), a.resolve().unwrap().digest());
    }

    #[test]
    fn sweep_application() {
        let base = ExperimentConfig::from_toml("problem = \"branin\"\nfractions = [0.5, 0.3, 0.2]")
            .unwrap()
            .resolve()
            .unwrap();
        let alloc = SweepSpec::new(SweepKind::Allocation, vec![0.1]).unwrap();
        let c = alloc.apply(&base, 0.1).unwrap();
        assert!((c.fractions[0] - 0.1).abs() < 1e-15);
        assert!((c.fractions[1] - 0.54).abs() < 1e-12);
        assert!((c.fractions[2] - 0.36).abs() < 1e-12);

        let budget = SweepSpec::new(SweepKind::BudgetScale, vec![0.25, 3.0]).unwrap();
        assert_eq!(budget.apply(&base, 3.0).unwrap().budget, 30.0);

        let disc = SweepSpec::new(SweepKind::Discrepancy, vec![0.0]).unwrap();
        let c = disc.apply(&base, 0.0).unwrap();
        assert_eq!(c.lowest().degradation_d, 0.0);
        assert_eq!(c.specs[1].degradation_d, 0.5);
    }

    #[test]
    fn sweep_grids_are_checked() {
        assert!(SweepSpec::new(SweepKind::Allocation, vec![]).is_err());
        assert!(SweepSpec::new(SweepKind::Allocation, vec![0.0]).is_err());
        assert!(SweepSpec::new(SweepKind::Allocation, vec![1.0]).is_ok());
        assert!(SweepSpec::new(SweepKind::BudgetScale, vec![0.0]).is_err());
        assert!(SweepSpec::new(SweepKind::Discrepancy, vec![0.0, 2.0]).is_ok());
        assert!(SweepSpec::new(SweepKind::Discrepancy, vec![-0.1]).is_err());
        assert_eq!(SweepSpec::parse_grid("0.1, 0.5,0.9").unwrap(), vec![0.1, 0.5, 0.9]);
        assert!(SweepSpec::parse_grid("0.1,x").is_err());
        assert_eq!(SweepKind::parse("budget"), Some(SweepKind::BudgetScale));
    }
}
