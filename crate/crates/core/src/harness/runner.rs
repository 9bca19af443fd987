//! Seeded experiment execution and per-block record files.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, Method, ResolvedConfig, SweepKind, SweepSpec};
use crate::benchmarks::FidelitySpec;
use crate::design::{allocate_budget, lhs};
use crate::error::{Error, Result};
use crate::gp::{fit_gp, FitOptions, Prediction};
use crate::metrics::{mean_pdf, rmse, MetricsRecord, VARIANCE_FLOOR};
use crate::seed::{derive_seed, rng_from_seed, seed_from_label};
use crate::surrogate::{build_mast, FidelityDataset, InputNormalizer};

pub const SCHEMA_VERSION: u32 = 1;
pub(crate) const RECORDS_MARKER: &str = "# mast-records";

/// Stream tag separating observation noise from design sampling.
const NOISE_STREAM: u64 = 0x6e6f697365;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Failed,
}

/// One method evaluated on one repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub problem: String,
    pub method: Method,
    pub repetition: usize,
    pub seed: u64,
    pub status: Status,
    pub n_test: usize,
    pub rmse: Option<f64>,
    pub mean_pdf: Option<f64>,
    pub budget: f64,
    /// Total cost of the observations this method used.
    pub consumed: f64,
    /// Observations per level, aligned with the config's fidelity list.
    pub counts: Vec<usize>,
    pub message: String,
}

impl ExperimentRecord {
    pub fn metrics(&self) -> Option<MetricsRecord> {
        Some(MetricsRecord {
            problem: self.problem.clone(),
            method: self.method.as_str().to_string(),
            seed: self.seed,
            n_test: self.n_test,
            rmse: self.rmse?,
            mean_pdf: self.mean_pdf?,
        })
    }
}

/// Identifies an experiment block within an output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockMetadata {
    pub schema: u32,
    pub block: String,
    pub problem: String,
    pub config_digest: String,
    pub test_digest: String,
    pub budget: f64,
    /// `level:noise_std` for each fidelity, in config order.
    pub noise_std: String,
    pub variance_floor: f64,
    pub sweep_kind: Option<SweepKind>,
    pub grid_value: Option<f64>,
}

impl BlockMetadata {
    pub(crate) fn to_line(&self) -> String {
        format!(
            "{RECORDS_MARKER}; schema={}; block={}; problem={}; config_digest={}; test_digest={}; budget={}; noise_std={}; variance_floor={}; sweep_kind={}; grid_value={}",
            self.schema,
            self.block,
            self.problem,
            self.config_digest,
            self.test_digest,
            self.budget,
            self.noise_std,
            self.variance_floor,
            self.sweep_kind.map(SweepKind::as_str).unwrap_or(""),
            self.grid_value.map(|g| g.to_string()).unwrap_or_default(),
        )
    }

    pub(crate) fn parse_line(line: &str) -> Result<Self> {
        let rest = line
            .strip_prefix(RECORDS_MARKER)
            .ok_or_else(|| Error::Reporting("not a record file".into()))?;
        let mut fields = std::collections::BTreeMap::new();
        for part in rest.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (k, v) = part
                .split_once('=')
                .ok_or_else(|| Error::Reporting(format!("malformed metadata field {part:?}")))?;
            fields.insert(k, v);
        }
        let get = |k: &str| {
            fields
                .get(k)
                .copied()
                .ok_or_else(|| Error::Reporting(format!("metadata is missing {k}")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::Reporting(format!("metadata field {k} is not a number")))
        };
        let schema: u32 = get("schema")?
            .parse()
            .map_err(|_| Error::Reporting("bad schema field".into()))?;
        if schema != SCHEMA_VERSION {
            return Err(Error::Reporting(format!("unsupported record schema {schema}")));
        }
        let sweep_kind = match get("sweep_kind")? {
            "" => None,
            s => Some(SweepKind::parse(s).ok_or_else(|| Error::Reporting(format!("unknown sweep kind {s}")))?),
        };
        let grid_value = match get("grid_value")? {
            "" => None,
            _ => Some(num("grid_value")?),
        };
        Ok(Self {
            schema,
            block: get("block")?.to_string(),
            problem: get("problem")?.to_string(),
            config_digest: get("config_digest")?.to_string(),
            test_digest: get("test_digest")?.to_string(),
            budget: num("budget")?,
            noise_std: get("noise_std")?.to_string(),
            variance_floor: num("variance_floor")?,
            sweep_kind,
            grid_value,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub metadata: BlockMetadata,
    pub records: Vec<ExperimentRecord>,
    pub path: PathBuf,
}

impl ExperimentOutcome {
    pub fn failures(&self) -> usize {
        self.records.iter().filter(|r| r.status == Status::Failed).count()
    }
}

/// A resolved config together with its fixed test set.
pub struct Experiment {
    config: ResolvedConfig,
    test_inputs: DMatrix<f64>,
    truth: Vec<f64>,
    test_digest: String,
}

fn row(m: &DMatrix<f64>, i: usize) -> Vec<f64> {
    m.row(i).iter().copied().collect()
}

impl Experiment {
    pub fn prepare(config: ResolvedConfig) -> Result<Self> {
        let problem = &config.problem;
        let test_inputs = lhs(config.n_test, problem.bounds(), seed_from_label(problem.name()));
        let truth = (0..test_inputs.nrows())
            .map(|i| problem.eval_hf(&row(&test_inputs, i)))
            .collect::<Result<Vec<_>>>()?;
        let mut hasher = Sha256::new();
        for v in test_inputs.transpose().iter() {
            hasher.update(v.to_le_bytes());
        }
        let test_digest = hex::encode(hasher.finalize());
        Ok(Self {
            config,
            test_inputs,
            truth,
            test_digest,
        })
    }

    pub fn config(&self) -> &ResolvedConfig {
        &self.config
    }

    pub fn test_inputs(&self) -> &DMatrix<f64> {
        &self.test_inputs
    }

    pub fn test_digest(&self) -> &str {
        &self.test_digest
    }

    pub fn repetition_seed(&self, rep: usize) -> u64 {
        derive_seed(&[self.config.base_seed, rep as u64])
    }

    /// The LHS design of `n` points for `level` in repetition `rep`.
    pub fn level_design(&self, level: usize, rep: usize, n: usize) -> DMatrix<f64> {
        let seed = derive_seed(&[self.config.base_seed, level as u64, rep as u64]);
        lhs(n, self.config.problem.bounds(), seed)
    }

    fn observe(&self, spec: &FidelitySpec, rep: usize, n: usize) -> Result<FidelityDataset> {
        let problem = &self.config.problem;
        let inputs = if n == 0 {
            DMatrix::zeros(0, problem.dimension())
        } else {
            self.level_design(spec.level, rep, n)
        };
        let mut rng = rng_from_seed(derive_seed(&[
            self.config.base_seed,
            spec.level as u64,
            rep as u64,
            NOISE_STREAM,
        ]));
        let outputs = (0..n)
            .map(|i| problem.sample_observation(&row(&inputs, i), spec, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        FidelityDataset::new(spec.level, inputs, DVector::from_vec(outputs), spec.cost)
    }

    fn score(&self, pred: &Prediction) -> Result<(f64, f64)> {
        Ok((
            rmse(pred.means.as_slice(), &self.truth)?,
            mean_pdf(pred.means.as_slice(), pred.variances.as_slice(), &self.truth)?,
        ))
    }

    /// The observations `method` trains on in repetition `rep`, one dataset
    /// per configured level (unused levels are empty).
    pub fn training_data(&self, method: Method, rep: usize) -> Result<Vec<FidelityDataset>> {
        let cfg = &self.config;
        let counts = match method {
            Method::Mast => allocate_budget(cfg.budget, &cfg.fractions, &cfg.costs(), None)?.counts,
            Method::HfOnly | Method::LfOnly => {
                let target = if method == Method::HfOnly {
                    cfg.highest()
                } else {
                    cfg.lowest()
                };
                let n = allocate_budget(cfg.budget, &[1.0], &[target.cost], None)?.counts[0];
                cfg.specs
                    .iter()
                    .map(|s| if s.level == target.level { n } else { 0 })
                    .collect()
            }
        };
        cfg.specs
            .iter()
            .zip(&counts)
            .map(|(spec, n)| self.observe(spec, rep, *n))
            .collect()
    }

    fn fit_and_score(&self, method: Method, data: &[FidelityDataset], seed: u64) -> Result<(f64, f64)> {
        let bounds = self.config.problem.bounds();
        let pred = match method {
            Method::Mast => build_mast(data, bounds, &FitOptions::default(), seed)?.predict(&self.test_inputs)?,
            Method::HfOnly | Method::LfOnly => {
                let d = data
                    .iter()
                    .find(|d| !d.is_empty())
                    .ok_or_else(|| Error::Allocation("the budget buys no observations".into()))?;
                let normalizer = InputNormalizer::new(bounds)?;
                let options = FitOptions::default().with_seed(derive_seed(&[seed, 1, d.level as u64]));
                let gp = fit_gp(&normalizer.normalize(&d.inputs)?, &d.outputs, &options, None)?;
                gp.predict(&normalizer.normalize(&self.test_inputs)?)?
            }
        };
        self.score(&pred)
    }

    fn run_method(&self, method: Method, rep: usize, seed: u64) -> Result<(Vec<usize>, f64, (f64, f64))> {
        let data = self.training_data(method, rep)?;
        let counts: Vec<usize> = data.iter().map(FidelityDataset::len).collect();
        let consumed = data.iter().map(|d| d.len() as f64 * d.cost).sum();
        Ok((counts, consumed, self.fit_and_score(method, &data, seed)?))
    }

    /// Every configured method on one repetition. Failures become records.
    pub fn run_repetition(&self, rep: usize) -> Vec<ExperimentRecord> {
        let cfg = &self.config;
        let seed = self.repetition_seed(rep);
        cfg.methods
            .iter()
            .map(|&method| {
                let outcome = self.run_method(method, rep, seed);
                let base = ExperimentRecord {
                    problem: cfg.problem.name().to_string(),
                    method,
                    repetition: rep,
                    seed,
                    status: Status::Ok,
                    n_test: cfg.n_test,
                    rmse: None,
                    mean_pdf: None,
                    budget: cfg.budget,
                    consumed: 0.0,
                    counts: vec![0; cfg.specs.len()],
                    message: String::new(),
                };
                match outcome {
                    Ok((counts, consumed, (r, p))) => ExperimentRecord {
                        rmse: Some(r),
                        mean_pdf: Some(p),
                        consumed,
                        counts,
                        ..base
                    },
                    Err(e) => ExperimentRecord {
                        status: Status::Failed,
                        message: e.to_string(),
                        ..base
                    },
                }
            })
            .collect()
    }

    pub fn metadata(&self, block: &str, sweep: Option<(SweepKind, f64)>) -> BlockMetadata {
        let cfg = &self.config;
        BlockMetadata {
            schema: SCHEMA_VERSION,
            block: block.to_string(),
            problem: cfg.problem.name().to_string(),
            config_digest: cfg.digest(),
            test_digest: self.test_digest.clone(),
            budget: cfg.budget,
            noise_std: cfg
                .specs
                .iter()
                .map(|s| format!("{}:{}", s.level, s.noise_std))
                .collect::<Vec<_>>()
                .join("|"),
            variance_floor: VARIANCE_FLOOR,
            sweep_kind: sweep.map(|s| s.0),
            grid_value: sweep.map(|s| s.1),
        }
    }

    /// All repetitions, in parallel, in repetition order.
    pub fn run_all(&self) -> Vec<ExperimentRecord> {
        (0..self.config.repetitions)
            .into_par_iter()
            .map(|rep| self.run_repetition(rep))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct CsvRow {
    problem: String,
    method: String,
    repetition: usize,
    seed: u64,
    status: String,
    n_test: usize,
    rmse: Option<f64>,
    mean_pdf: Option<f64>,
    budget: f64,
    consumed: f64,
    counts: String,
    message: String,
}

fn status_str(s: Status) -> &'static str {
    match s {
        Status::Ok => "ok",
        Status::Failed => "failed",
    }
}

/// Serializes a block to its file contents.
pub fn render_records(metadata: &BlockMetadata, records: &[ExperimentRecord]) -> Result<Vec<u8>> {
    let mut out = metadata.to_line().into_bytes();
    out.push(b'\n');
    let mut writer = csv::Writer::from_writer(out);
    for r in records {
        writer
            .serialize(CsvRow {
                problem: r.problem.clone(),
                method: r.method.as_str().to_string(),
                repetition: r.repetition,
                seed: r.seed,
                status: status_str(r.status).to_string(),
                n_test: r.n_test,
                rmse: r.rmse,
                mean_pdf: r.mean_pdf,
                budget: r.budget,
                consumed: r.consumed,
                counts: r.counts.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(";"),
                message: r.message.clone(),
            })
            .map_err(|e| Error::Serialization(e.to_string()))?;
    }
    writer.into_inner().map_err(|e| Error::Serialization(e.to_string()))
}

/// Reads a record file written by [`render_records`].
pub fn read_records(path: &Path) -> Result<(BlockMetadata, Vec<ExperimentRecord>)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let (first, body) = text.split_once('\n').unwrap_or((text.as_str(), ""));
    let metadata = BlockMetadata::parse_line(first)?;
    let bad = |e: &dyn std::fmt::Display| Error::Reporting(format!("{}: {e}", path.display()));
    let mut records = Vec::new();
    for row in csv::Reader::from_reader(body.as_bytes()).deserialize::<CsvRow>() {
        let row = row.map_err(|e| bad(&e))?;
        let method = Method::parse(&row.method).ok_or_else(|| bad(&format!("unknown method {}", row.method)))?;
        let status = match row.status.as_str() {
            "ok" => Status::Ok,
            "failed" => Status::Failed,
            s => return Err(bad(&format!("unknown status {s}"))),
        };
        let counts = if row.counts.is_empty() {
            Vec::new()
        } else {
            row.counts
                .split(';')
                .map(|c| c.parse().map_err(|_| bad(&format!("bad count {c}"))))
                .collect::<Result<Vec<usize>>>()?
        };
        records.push(ExperimentRecord {
            problem: row.problem,
            method,
            repetition: row.repetition,
            seed: row.seed,
            status,
            n_test: row.n_test,
            rmse: row.rmse,
            mean_pdf: row.mean_pdf,
            budget: row.budget,
            consumed: row.consumed,
            counts,
            message: row.message,
        });
    }
    Ok((metadata, records))
}

/// A rayon pool sized by `MAST_THREADS` (unset or 0 means automatic).
pub fn thread_pool() -> Result<rayon::ThreadPool> {
    let threads = match std::env::var("MAST_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse::<usize>()
            .map_err(|_| Error::Configuration(format!("MAST_THREADS must be a non-negative integer, got {v:?}")))?,
        _ => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Configuration(e.to_string()))
}

fn write_block(dir: &Path, metadata: BlockMetadata, records: Vec<ExperimentRecord>) -> Result<ExperimentOutcome> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(format!("{}-{}.csv", metadata.problem, metadata.block));
    fs::write(&path, render_records(&metadata, &records)?).map_err(|e| Error::io(&path, e))?;
    Ok(ExperimentOutcome {
        metadata,
        records,
        path,
    })
}

/// Runs one resolved configuration and writes its record file.
pub fn run_resolved(config: ResolvedConfig, block: &str, sweep: Option<(SweepKind, f64)>) -> Result<ExperimentOutcome> {
    let dir = config.output_dir.clone();
    let experiment = Experiment::prepare(config)?;
    let records = thread_pool()?.install(|| experiment.run_all());
    write_block(&dir, experiment.metadata(block, sweep), records)
}

/// Runs every repetition of every method and writes `<problem>-run.csv`
/// under the output directory.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    run_resolved(config.resolve()?, "run", None)
}

/// One experiment block per grid value, each in its own file.
pub fn run_sweep(config: &ExperimentConfig, sweep: &SweepSpec) -> Result<Vec<(f64, ExperimentOutcome)>> {
    sweep.validate()?;
    let base = config.resolve()?;
    let configs = sweep
        .grid
        .iter()
        .map(|g| sweep.apply(&base, *g))
        .collect::<Result<Vec<_>>>()?;
    let pool = thread_pool()?;
    let blocks: Vec<(f64, BlockMetadata, Vec<ExperimentRecord>)> = pool.install(|| {
        configs
            .into_par_iter()
            .zip(sweep.grid.par_iter())
            .enumerate()
            .map(|(i, (cfg, g))| {
                let experiment = Experiment::prepare(cfg)?;
                let block = format!("{}-{i:02}", sweep.kind.as_str());
                let meta = experiment.metadata(&block, Some((sweep.kind, *g)));
                Ok((*g, meta, experiment.run_all()))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    blocks
        .into_iter()
        .map(|(g, meta, records)| Ok((g, write_block(&base.output_dir, meta, records)?)))
        .collect()
}
