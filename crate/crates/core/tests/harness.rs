use std::fs;

use mast::harness::*;

fn small(problem: &str, dir: &std::path::Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(problem);
    cfg.repetitions = 3;
    cfg.n_test = 64;
    cfg.base_seed = 42;
    cfg.output_dir = dir.to_path_buf();
    cfg
}

fn record(method: Method, rep: usize, rmse: f64, pdf: f64) -> ExperimentRecord {
    ExperimentRecord {
        problem: "branin".into(),
        method,
        repetition: rep,
        seed: rep as u64,
        status: Status::Ok,
        n_test: 10,
        rmse: Some(rmse),
        mean_pdf: Some(pdf),
        budget: 10.0,
        consumed: 10.0,
        counts: vec![7, 30],
        message: String::new(),
    }
}

fn metadata(block: &str) -> BlockMetadata {
    BlockMetadata {
        schema: SCHEMA_VERSION,
        block: block.into(),
        problem: "branin".into(),
        config_digest: "c".into(),
        test_digest: "t".into(),
        budget: 10.0,
        noise_std: "2:0|1:0".into(),
        variance_floor: 1e-12,
        sweep_kind: None,
        grid_value: None,
    }
}

#[test]
fn default_branin_block_has_one_record_per_method_and_repetition() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::new("branin");
    cfg.n_test = 50;
    cfg.output_dir = dir.path().to_path_buf();
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.records.len(), 75);
    assert_eq!(out.failures(), 0);
    assert!(out.path.exists());
    for r in &out.records {
        assert!(r.consumed <= r.budget + 1e-9, "{r:?}");
    }
    let lf_only: Vec<_> = out.records.iter().filter(|r| r.method == Method::LfOnly).collect();
    assert!(lf_only.iter().all(|r| r.counts == vec![0, 100]));
    let hf_only: Vec<_> = out.records.iter().filter(|r| r.method == Method::HfOnly).collect();
    assert!(hf_only.iter().all(|r| r.counts == vec![10, 0]));
    let mast: Vec<_> = out.records.iter().filter(|r| r.method == Method::Mast).collect();
    assert!(mast.iter().all(|r| r.counts == vec![7, 30]));
}

#[test]
fn full_hf_allocation_gives_mast_the_baseline_design() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small("branin", dir.path());
    cfg.fractions = vec![1.0, 0.0];
    let exp = Experiment::prepare(cfg.resolve().unwrap()).unwrap();
    for rep in 0..3 {
        let mast = exp.training_data(Method::Mast, rep).unwrap();
        let hf = exp.training_data(Method::HfOnly, rep).unwrap();
        assert_eq!(mast, hf);
        assert_eq!(mast[0].len(), 10);
        assert!(mast[1].is_empty());
    }
    for r in exp.run_repetition(0) {
        assert_eq!(r.status, Status::Ok, "{}", r.message);
    }
}

#[test]
fn repetitions_do_not_depend_on_execution_order() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small("park1", dir.path());
    cfg.methods = vec![Method::Mast, Method::HfOnly];
    let exp = Experiment::prepare(cfg.resolve().unwrap()).unwrap();
    let forward: Vec<_> = (0..3).flat_map(|r| exp.run_repetition(r)).collect();
    let mut backward: Vec<_> = (0..3).rev().map(|r| exp.run_repetition(r)).collect();
    backward.reverse();
    assert_eq!(forward, backward.into_iter().flatten().collect::<Vec<_>>());
}

#[test]
fn sweep_blocks_share_one_test_set_and_respect_budgets() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small("branin", dir.path());
    cfg.repetitions = 2;
    cfg.methods = vec![Method::Mast, Method::HfOnly];
    let spec = SweepSpec::new(SweepKind::BudgetScale, vec![0.5, 2.0]).unwrap();
    let blocks = run_sweep(&cfg, &spec).unwrap();
    assert_eq!(blocks.len(), 2);
    assert_eq!(blocks[0].1.metadata.test_digest, blocks[1].1.metadata.test_digest);
    assert_ne!(blocks[0].1.metadata.config_digest, blocks[1].1.metadata.config_digest);
    assert_eq!(blocks[0].1.metadata.budget, 5.0);
    assert_eq!(blocks[1].1.metadata.budget, 20.0);
    for (_, b) in &blocks {
        for r in &b.records {
            assert!(r.consumed <= r.budget + 1e-9);
        }
    }

    let report = report(dir.path()).unwrap();
    let curve = &report.curves["branin-budget_scale"];
    assert_eq!(
        curve.iter().map(|p| p.grid_value).collect::<Vec<_>>(),
        vec![0.5, 0.5, 2.0, 2.0]
    );
    assert!(dir.path().join("curve-branin-budget_scale.csv").exists());
    assert!(dir.path().join(SUMMARY_CSV).exists());
    assert!(dir.path().join(SUMMARY_JSON).exists());
}

#[test]
fn record_files_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut failed = record(Method::Mast, 1, 0.0, 0.0);
    failed.status = Status::Failed;
    failed.rmse = None;
    failed.mean_pdf = None;
    failed.message = "factorization failed, \"quoted\", with commas".into();
    let records = vec![record(Method::HfOnly, 0, 1.5, 0.25), failed];
    let meta = metadata("run");
    let path = dir.path().join("x.csv");
    fs::write(&path, render_records(&meta, &records).unwrap()).unwrap();
    let (m, r) = read_records(&path).unwrap();
    assert_eq!(m, meta);
    assert_eq!(r, records);
}

#[test]
fn report_normalizes_against_hf_only() {
    let meta = metadata("run");
    let same = vec![
        record(Method::HfOnly, 0, 2.0, 0.5),
        record(Method::Mast, 0, 2.0, 0.5),
        record(Method::HfOnly, 1, 4.0, 0.25),
        record(Method::Mast, 1, 4.0, 0.25),
    ];
    for row in summarize(&meta, &same) {
        assert_eq!(row.normalized_rmse, Some(1.0));
        assert_eq!(row.normalized_mean_pdf, Some(1.0));
        assert_eq!(row.per_seed_normalized_rmse.unwrap().mean, 1.0);
        assert!(!row.missing_baseline);
    }

    let better = vec![
        record(Method::HfOnly, 0, 2.0, 0.5),
        record(Method::Mast, 0, 1.0, 1.0),
        record(Method::HfOnly, 1, 4.0, 0.5),
        record(Method::Mast, 1, 1.0, 2.0),
    ];
    let rows = summarize(&meta, &better);
    let mast = rows.iter().find(|r| r.method == Method::Mast).unwrap();
    // averaged first, then normalized
    assert_eq!(mast.normalized_rmse, Some(1.0 / 3.0));
    assert_eq!(mast.normalized_mean_pdf, Some(3.0));
    // normalized per seed, then averaged
    assert_eq!(mast.per_seed_normalized_rmse.unwrap().mean, 0.375);
    assert_eq!(mast.per_seed_normalized_mean_pdf.unwrap().mean, 3.0);
}

#[test]
fn report_without_baseline_flags_and_omits_normalization() {
    let meta = metadata("run");
    let only_hf = vec![record(Method::HfOnly, 0, 2.0, 0.5)];
    let rows = summarize(&meta, &only_hf);
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].normalized_rmse, None);
    assert_eq!(rows[0].rmse.unwrap().mean, 2.0);

    let dir = tempfile::tempdir().unwrap();
    let no_hf = vec![record(Method::Mast, 0, 2.0, 0.5), record(Method::LfOnly, 0, 3.0, 0.1)];
    fs::write(dir.path().join("b.csv"), render_records(&meta, &no_hf).unwrap()).unwrap();
    let rep = report(dir.path()).unwrap();
    assert!(rep
        .rows
        .iter()
        .all(|r| r.missing_baseline && r.normalized_rmse.is_none()));
    assert!(rep.warnings.iter().any(|w| w.contains("hf_only")));
    let csv = fs::read_to_string(dir.path().join(SUMMARY_CSV)).unwrap();
    assert!(csv.contains("missing_hf_only"));
}

#[test]
fn failed_repetitions_are_excluded_and_counted() {
    let meta = metadata("run");
    let mut bad = record(Method::Mast, 1, 0.0, 0.0);
    bad.status = Status::Failed;
    bad.rmse = None;
    bad.mean_pdf = None;
    let records = vec![
        record(Method::HfOnly, 0, 2.0, 0.5),
        record(Method::HfOnly, 1, 2.0, 0.5),
        record(Method::Mast, 0, 1.0, 1.0),
        bad,
    ];
    let rows = summarize(&meta, &records);
    let mast = rows.iter().find(|r| r.method == Method::Mast).unwrap();
    assert_eq!((mast.n_ok, mast.n_failed), (1, 1));
    assert_eq!(mast.rmse.unwrap().mean, 1.0);
    assert_eq!(mast.normalized_rmse, Some(0.5));
}

#[test]
fn report_on_empty_directory_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("notes.csv"), "a,b\n1,2\n").unwrap();
    assert!(matches!(report(dir.path()), Err(mast::Error::Reporting(_))));
}

#[test]
fn three_level_configs_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small("hartmann3", dir.path());
    cfg.repetitions = 2;
    cfg.fractions = vec![0.5, 0.3, 0.2];
    cfg.methods = vec![Method::Mast, Method::HfOnly, Method::LfOnly];
    let out = run_experiment(&cfg).unwrap();
    assert_eq!(out.failures(), 0, "{:?}", out.records);
    let mast = out.records.iter().find(|r| r.method == Method::Mast).unwrap();
    // B = 15 with costs (1, 0.2, 0.1)
    assert_eq!(mast.counts, vec![7, 22, 30]);
}
