//! Aggregation of record files into summary tables and sweep curves.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{Method, SweepKind};
use super::runner::{read_records, BlockMetadata, ExperimentRecord, Status, RECORDS_MARKER};
use crate::error::{Error, Result};
use crate::metrics::{normalize, Dispersion};

pub const SUMMARY_CSV: &str = "summary.csv";
pub const SUMMARY_JSON: &str = "summary.json";

/// Aggregate of one method within one experiment block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub block: String,
    pub problem: String,
    pub sweep_kind: Option<SweepKind>,
    pub grid_value: Option<f64>,
    pub method: Method,
    pub n_ok: usize,
    pub n_failed: usize,
    pub rmse: Option<Dispersion>,
    pub mean_pdf: Option<Dispersion>,
    /// Mean RMSE divided by the hf_only mean RMSE of the same block.
    pub normalized_rmse: Option<f64>,
    pub normalized_mean_pdf: Option<f64>,
    /// Per-seed ratios against hf_only on the same repetition.
    pub per_seed_normalized_rmse: Option<Dispersion>,
    pub per_seed_normalized_mean_pdf: Option<Dispersion>,
    /// Set when the block has no usable hf_only baseline.
    pub missing_baseline: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub grid_value: f64,
    pub method: Method,
    pub normalized_rmse: Option<f64>,
    pub normalized_mean_pdf: Option<f64>,
    pub per_seed_normalized_rmse: Option<Dispersion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub rows: Vec<SummaryRow>,
    /// Sweep curves keyed by `<problem>-<kind>`.
    pub curves: BTreeMap<String, Vec<CurvePoint>>,
    pub warnings: Vec<String>,
}

fn ok_values(records: &[&ExperimentRecord], get: impl Fn(&ExperimentRecord) -> Option<f64>) -> Vec<f64> {
    records
        .iter()
        .filter(|r| r.status == Status::Ok)
        .filter_map(|r| get(r))
        .collect()
}

fn paired_ratios(
    records: &[&ExperimentRecord],
    baseline: &[&ExperimentRecord],
    get: impl Fn(&ExperimentRecord) -> Option<f64>,
) -> Vec<f64> {
    let base: BTreeMap<usize, f64> = baseline
        .iter()
        .filter(|r| r.status == Status::Ok)
        .filter_map(|r| Some((r.repetition, get(r)?)))
        .collect();
    records
        .iter()
        .filter(|r| r.status == Status::Ok)
        .filter_map(|r| normalize(get(r)?, *base.get(&r.repetition)?).ok())
        .collect()
}

/// Aggregates one block's records, one row per method present.
pub fn summarize(metadata: &BlockMetadata, records: &[ExperimentRecord]) -> Vec<SummaryRow> {
    let mut by_method: BTreeMap<Method, Vec<&ExperimentRecord>> = BTreeMap::new();
    for r in records {
        by_method.entry(r.method).or_default().push(r);
    }
    let baseline = by_method.get(&Method::HfOnly).cloned().unwrap_or_default();
    let base_rmse = Dispersion::of(&ok_values(&baseline, |r| r.rmse));
    let base_pdf = Dispersion::of(&ok_values(&baseline, |r| r.mean_pdf));
    // a baseline compared only with itself carries no information
    let compare = by_method.keys().any(|m| *m != Method::HfOnly);

    by_method
        .iter()
        .map(|(method, rs)| {
            let rmse = Dispersion::of(&ok_values(rs, |r| r.rmse));
            let mean_pdf = Dispersion::of(&ok_values(rs, |r| r.mean_pdf));
            let ratio = |v: Option<Dispersion>, b: Option<Dispersion>| {
                compare.then(|| normalize(v?.mean, b?.mean).ok()).flatten()
            };
            let normalized_rmse = ratio(rmse, base_rmse);
            let normalized_mean_pdf = ratio(mean_pdf, base_pdf);
            SummaryRow {
                block: metadata.block.clone(),
                problem: metadata.problem.clone(),
                sweep_kind: metadata.sweep_kind,
                grid_value: metadata.grid_value,
                method: *method,
                n_ok: rs.iter().filter(|r| r.status == Status::Ok).count(),
                n_failed: rs.iter().filter(|r| r.status == Status::Failed).count(),
                rmse,
                mean_pdf,
                normalized_rmse,
                normalized_mean_pdf,
                per_seed_normalized_rmse: compare
                    .then(|| Dispersion::of(&paired_ratios(rs, &baseline, |r| r.rmse)))
                    .flatten(),
                per_seed_normalized_mean_pdf: compare
                    .then(|| Dispersion::of(&paired_ratios(rs, &baseline, |r| r.mean_pdf)))
                    .flatten(),
                missing_baseline: base_rmse.is_none(),
            }
        })
        .collect()
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn summary_csv(rows: &[SummaryRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let header = [
        "block",
        "problem",
        "sweep_kind",
        "grid_value",
        "method",
        "n_ok",
        "n_failed",
        "rmse_mean",
        "rmse_median",
        "rmse_q1",
        "rmse_q3",
        "mean_pdf_mean",
        "mean_pdf_median",
        "mean_pdf_q1",
        "mean_pdf_q3",
        "normalized_rmse",
        "normalized_mean_pdf",
        "per_seed_normalized_rmse_mean",
        "per_seed_normalized_mean_pdf_mean",
        "warning",
    ];
    let err = |e: csv::Error| Error::Reporting(e.to_string());
    w.write_record(header).map_err(err)?;
    for r in rows {
        let d = |x: Option<Dispersion>| {
            [
                fmt(x.map(|d| d.mean)),
                fmt(x.map(|d| d.median)),
                fmt(x.map(|d| d.q1)),
                fmt(x.map(|d| d.q3)),
            ]
        };
        let mut fields = vec![
            r.block.clone(),
            r.problem.clone(),
            r.sweep_kind.map(|k| k.as_str().to_string()).unwrap_or_default(),
            fmt(r.grid_value),
            r.method.as_str().to_string(),
            r.n_ok.to_string(),
            r.n_failed.to_string(),
        ];
        fields.extend(d(r.rmse));
        fields.extend(d(r.mean_pdf));
        fields.push(fmt(r.normalized_rmse));
        fields.push(fmt(r.normalized_mean_pdf));
        fields.push(fmt(r.per_seed_normalized_rmse.map(|d| d.mean)));
        fields.push(fmt(r.per_seed_normalized_mean_pdf.map(|d| d.mean)));
        fields.push(if r.missing_baseline {
            "missing_hf_only".into()
        } else {
            String::new()
        });
        w.write_record(&fields).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Reporting(e.to_string()))
}

fn curve_csv(points: &[CurvePoint]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Reporting(e.to_string());
    w.write_record([
        "grid_value",
        "method",
        "normalized_rmse",
        "normalized_mean_pdf",
        "per_seed_rmse_median",
        "per_seed_rmse_q1",
        "per_seed_rmse_q3",
    ])
    .map_err(err)?;
    for p in points {
        let d = p.per_seed_normalized_rmse;
        w.write_record([
            p.grid_value.to_string(),
            p.method.as_str().to_string(),
            fmt(p.normalized_rmse),
            fmt(p.normalized_mean_pdf),
            fmt(d.map(|d| d.median)),
            fmt(d.map(|d| d.q1)),
            fmt(d.map(|d| d.q3)),
        ])
        .map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Reporting(e.to_string()))
}

fn is_record_file(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "csv")
        && fs::read_to_string(path).is_ok_and(|t| t.starts_with(RECORDS_MARKER))
}

/// Builds the report for every record file in `dir` without writing anything.
pub fn collect(dir: &Path) -> Result<Report> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| is_record_file(p))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Reporting(format!("no record files in {}", dir.display())));
    }

    let mut rows = Vec::new();
    for path in &paths {
        let (meta, records) = read_records(path)?;
        rows.extend(summarize(&meta, &records));
    }

    let mut warnings = Vec::new();
    let mut flagged: Vec<&str> = rows
        .iter()
        .filter(|r| r.missing_baseline)
        .map(|r| r.block.as_str())
        .collect();
    flagged.dedup();
    for block in flagged {
        warnings.push(format!(
            "block {block}: no usable hf_only records, normalized columns omitted"
        ));
    }
    for r in rows.iter().filter(|r| r.n_failed > 0) {
        warnings.push(format!(
            "block {} method {}: {} failed repetitions excluded",
            r.block,
            r.method.as_str(),
            r.n_failed
        ));
    }

    let mut curves: BTreeMap<String, Vec<CurvePoint>> = BTreeMap::new();
    for r in &rows {
        if let (Some(kind), Some(g)) = (r.sweep_kind, r.grid_value) {
            curves
                .entry(format!("{}-{}", r.problem, kind.as_str()))
                .or_default()
                .push(CurvePoint {
                    grid_value: g,
                    method: r.method,
                    normalized_rmse: r.normalized_rmse,
                    normalized_mean_pdf: r.normalized_mean_pdf,
                    per_seed_normalized_rmse: r.per_seed_normalized_rmse,
                });
        }
    }
    for points in curves.values_mut() {
        points.sort_by(|a, b| a.grid_value.total_cmp(&b.grid_value).then(a.method.cmp(&b.method)));
    }

    Ok(Report { rows, curves, warnings })
}

/// Writes `summary.csv`, `summary.json` and one `curve-<problem>-<kind>.csv`
/// per sweep found in `dir`.
pub fn report(dir: &Path) -> Result<Report> {
    let report = collect(dir)?;
    let write = |name: &str, bytes: Vec<u8>| {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| Error::io(&path, e))
    };
    write(SUMMARY_CSV, summary_csv(&report.rows)?)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| Error::Serialization(e.to_string()))?;
    write(SUMMARY_JSON, json.into_bytes())?;
    for (key, points) in &report.curves {
        write(&format!("curve-{key}.csv"), curve_csv(points)?)?;
    }
    Ok(report)
}
