use std::path::Path;
use std::process::{Command, Output};

fn signorini(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_signorini"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

#[test]
fn list_names_every_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let o = signorini(&["list"], dir.path());
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 10);
    assert!(text.contains("jump-obstacle"));
}

#[test]
fn experiment_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = signorini(
        &["experiment", "halfline-optimal", "--resolution", "129", "--out", "run"],
        dir.path(),
    );
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert_eq!(code(&o), 0, "{stdout}");
    assert!(stdout.contains("PASS"));
    for f in ["report.json", "timings.json", "u.csv", "convergence.csv", "u.svg"] {
        assert!(dir.path().join("run").join(f).exists(), "{f}");
    }
}

#[test]
fn quiet_prints_only_the_status() {
    let dir = tempfile::tempdir().unwrap();
    let o = signorini(&["solve", "--resolution", "65", "--quiet"], dir.path());
    assert_eq!(code(&o), 0);
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert_eq!(stdout.trim(), "solve: Pass");
    assert!(dir.path().join("signorini-out/solve/u.csv").exists());
}

#[test]
fn failed_check_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("loose.toml"), "tol = 1e-2\n").unwrap();
    let o = signorini(
        &["experiment", "rellich-check", "--resolution", "129", "--config", "loose.toml", "--out", "o"],
        dir.path(),
    );
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL"));
    assert!(dir.path().join("o/report.json").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("typo.toml"), "resolutoin = 129\n").unwrap();
    let o = signorini(&["solve", "--config", "typo.toml"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("resolutoin"));

    let o = signorini(&["solve", "--resolution", "128"], dir.path());
    assert_eq!(code(&o), 2);

    let o = signorini(&["solve", "--config", "missing.toml"], dir.path());
    assert_eq!(code(&o), 2);
}

#[test]
fn non_convergence_exits_with_three_and_still_reports() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("short.toml"), "max_iter = 4\nresolution = 65\n").unwrap();
    let o = signorini(&["solve", "--config", "short.toml", "--out", "o"], dir.path());
    assert_eq!(code(&o), 3);
    let report = std::fs::read_to_string(dir.path().join("o/report.json")).unwrap();
    assert!(report.contains("\"converged\": false"));
    assert!(report.contains("non-convergence"));
}

#[test]
fn batch_runs_into_subdirectories() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("shared.toml"), "resolution = 129\nsvg = false\n").unwrap();
    std::fs::write(
        dir.path().join("batch.toml"),
        "include = \"shared.toml\"\n\n[[run]]\nexperiment = \"jump-obstacle\"\n\n[[run]]\nexperiment = \"isolated-contact\"\n",
    )
    .unwrap();
    let o = signorini(&["batch", "batch.toml", "--out", "b", "--quiet"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for sub in ["jump-obstacle", "isolated-contact"] {
        assert!(dir.path().join("b").join(sub).join("report.json").exists(), "{sub}");
    }
}

#[test]
fn repeat_runs_write_identical_csvs() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = signorini(&["frequency", "--resolution", "129", "--out", out, "--quiet"], dir.path());
        assert_eq!(code(&o), 0);
    }
    for f in ["frequency_origin.csv", "osc_origin.csv", "report.json"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}
