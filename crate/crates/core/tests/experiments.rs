use std::path::Path;

use signorini_lab::config::{Batch, ExperimentConfig};
use signorini_lab::experiments::{self, Command};
use signorini_lab::report::{Report, Status};
use signorini_lab::Error;

fn coarse(name: &str) -> ExperimentConfig {
    ExperimentConfig {
        resolution: Some(129),
        ..ExperimentConfig::named(name)
    }
}

#[test]
fn unknown_experiment_is_a_config_error() {
    let e = experiments::run("spiral", &coarse("spiral"), None).unwrap_err();
    assert!(matches!(e, Error::Config(_)), "{e}");
}

#[test]
fn invalid_config_fails_before_solving() {
    let cfg = ExperimentConfig {
        omega: Some(2.5),
        ..coarse("rellich-check")
    };
    assert!(matches!(experiments::run("rellich-check", &cfg, None), Err(Error::Config(_))));
}

#[test]
fn report_and_files_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = experiments::run("rellich-check", &coarse("rellich-check"), Some(dir.path())).unwrap();
    let text = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    let back: Report = serde_json::from_str(&text).unwrap();
    assert_eq!(back, out.report);
    for f in &back.files {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert!(dir.path().join("timings.json").exists());
    assert!(back.checks.iter().any(|c| c.criterion == Some(6)));
    assert!(back.checks.iter().any(|c| c.criterion == Some(14)));
}

#[test]
fn non_convergence_is_reported_with_status() {
    let cfg = ExperimentConfig {
        resolution: Some(65),
        max_iter: Some(5),
        ..Default::default()
    };
    let out = experiments::run_command(Command::Solve, &cfg, None).unwrap();
    assert_eq!(out.report.status, Status::NonConvergence);
    assert_eq!(out.report.status.exit_code(), 3);
    assert!(out.report.solves.values().all(|s| !s.converged));
}

#[test]
fn single_commands_run_on_a_small_grid() {
    let cfg = ExperimentConfig {
        resolution: Some(129),
        ..Default::default()
    };
    for cmd in [Command::Solve, Command::Frequency, Command::Blowup, Command::Capacity] {
        let dir = tempfile::tempdir().unwrap();
        let out = experiments::run_command(cmd, &cfg, Some(dir.path())).unwrap();
        assert!(out.report.all_passed(), "{:?}: {:?}", cmd, out.report.checks);
        assert!(!out.report.files.is_empty(), "{cmd:?}");
    }
}

#[test]
fn batch_runs_each_entry_in_its_own_directory() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("batch.toml");
    std::fs::write(
        &file,
        "resolution = 129\nsvg = false\n\n[[run]]\nexperiment = \"rellich-check\"\n\n[[run]]\nexperiment = \"isolated-contact\"\noutput = \"iso\"\n",
    )
    .unwrap();
    let batch = Batch::load(&file).unwrap();
    let out = dir.path().join("out");
    let results = experiments::run_batch(&batch, Some(&out));
    assert_eq!(results.len(), 2);
    for (sub, r) in &results {
        let r = r.as_ref().unwrap();
        assert!(out.join(sub).join("report.json").exists());
        assert!(!r.report.files.iter().any(|f| f.ends_with(".svg")));
    }
    assert!(Path::new(&out.join("iso")).is_dir());
}
