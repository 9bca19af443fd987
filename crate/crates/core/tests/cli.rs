use std::fs;
use std::process::Command;

fn mast() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mast"))
}

#[test]
fn list_problems_prints_the_catalog() {
    let out = mast().arg("list-problems").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 10);
    assert!(text.contains("borehole") && text.contains("D=8"));
}

#[test]
fn run_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    let results = dir.path().join("results");
    fs::write(
        &config,
        format!(
            "problem = \"park2\"\nrepetitions = 2\nn_test = 32\nmethods = [\"mast\", \"hf_only\"]\noutput_dir = {:?}\n",
            results.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = mast().args(["run", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(results.join("park2-run.csv").exists());

    let out = mast().args(["report", "--dir"]).arg(&results).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(results.join("summary.csv").exists());
    assert!(String::from_utf8(out.stdout).unwrap().contains("hf_only"));
}

#[test]
fn sweep_writes_one_block_per_grid_value() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    fs::write(
        &config,
        format!(
            "problem = \"branin\"\nrepetitions = 1\nn_test = 16\nmethods = [\"mast\", \"hf_only\"]\noutput_dir = {:?}\n",
            dir.path().to_str().unwrap()
        ),
    )
    .unwrap();
    let out = mast()
        .args(["sweep", "--config"])
        .arg(&config)
        .args(["--kind", "discrepancy", "--grid", "0,1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("branin-discrepancy-00.csv").exists());
    assert!(dir.path().join("branin-discrepancy-01.csv").exists());
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    fs::write(&config, "problem = \"branin\"\nunknown_key = 1\n").unwrap();
    let out = mast().args(["run", "--config"]).arg(&config).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("unknown_key"));

    let out = mast()
        .args(["run", "--config"])
        .arg(dir.path().join("missing.toml"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    fs::write(&config, "problem = \"branin\"\n").unwrap();
    let out = mast()
        .args(["sweep", "--config"])
        .arg(&config)
        .args(["--kind", "colour", "--grid", "1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = mast()
        .args(["sweep", "--config"])
        .arg(&config)
        .args(["--kind", "allocation", "--grid", "0,0.5"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));

    let out = mast().args(["report", "--dir"]).arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn invalid_thread_cap_is_a_configuration_error() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.toml");
    fs::write(&config, "problem = \"branin\"\nrepetitions = 1\nn_test = 4\n").unwrap();
    let out = mast()
        .env("MAST_THREADS", "many")
        .args(["run", "--config"])
        .arg(&config)
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
