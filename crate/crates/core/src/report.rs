//! Experiment reports: solver summaries, result tables and named pass/fail
//! checks, serialized with a stable key order. Wall-times are kept apart in
//! [`Timings`] so that `report.json` is identical across runs.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::domain::ScalarField;
use crate::error::Result;
use crate::solver::SolveReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    /// Acceptance criterion number this row decides, if any.
    pub criterion: Option<u8>,
    pub passed: bool,
    pub value: f64,
    pub threshold: String,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    CheckFailed,
    NonConvergence,
}

impl Status {
    /// 0 all-pass, 1 check failed, 3 non-convergence.
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::CheckFailed => 1,
            Status::NonConvergence => 3,
        }
    }

    pub fn worst(self, other: Status) -> Status {
        let rank = |s: Status| match s {
            Status::Pass => 0,
            Status::CheckFailed => 1,
            Status::NonConvergence => 2,
        };
        if rank(other) > rank(self) {
            other
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub status: Status,
    pub solves: BTreeMap<String, SolveReport>,
    pub results: BTreeMap<String, serde_json::Value>,
    pub checks: Vec<Check>,
    /// Files written next to the report, relative to its directory.
    pub files: Vec<String>,
}

impl Report {
    pub fn new(experiment: &str, config: ExperimentConfig) -> Self {
        Self {
            experiment: experiment.to_string(),
            config,
            status: Status::Pass,
            solves: BTreeMap::new(),
            results: BTreeMap::new(),
            checks: Vec::new(),
            files: Vec::new(),
        }
    }

    pub fn add_solve(&mut self, name: &str, report: SolveReport) {
        self.solves.insert(name.to_string(), report);
        self.refresh_status();
    }

    pub fn add_result(&mut self, name: &str, value: impl Serialize) -> Result<()> {
        self.results
            .insert(name.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn check(
        &mut self,
        name: &str,
        criterion: Option<u8>,
        passed: bool,
        value: f64,
        threshold: impl Into<String>,
        detail: impl Into<String>,
    ) {
        self.checks.push(Check {
            name: name.to_string(),
            criterion,
            passed,
            value,
            threshold: threshold.into(),
            detail: detail.into(),
        });
        self.refresh_status();
    }

    pub fn add_file(&mut self, name: &str) {
        self.files.push(name.to_string());
    }

    fn refresh_status(&mut self) {
        let mut s = Status::Pass;
        if self.checks.iter().any(|c| !c.passed) {
            s = s.worst(Status::CheckFailed);
        }
        if self.solves.values().any(|r| !r.converged) {
            s = s.worst(Status::NonConvergence);
        }
        self.status = s;
    }

    pub fn all_passed(&self) -> bool {
        self.status == Status::Pass
    }

    pub fn checks_for(&self, criterion: u8) -> impl Iterator<Item = &Check> {
        self.checks
            .iter()
            .filter(move |c| c.criterion == Some(criterion))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join("report.json"), text + "\n")?;
        Ok(())
    }
}

/// Named wall-clock durations in seconds.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Timings(pub BTreeMap<String, f64>);

impl Timings {
    pub fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.0
            .insert(name.to_string(), start.elapsed().as_secs_f64());
        out
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(dir.join("timings.json"), text + "\n")?;
        Ok(())
    }
}

/// `x,y,u` for every interior and Dirichlet node, row by row.
pub fn write_field_csv(field: &ScalarField, path: &Path) -> Result<()> {
    let g = field.grid();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "y", "u"])?;
    for k in (0..g.len()).filter(|&k| g.is_active(k)) {
        let (x, y) = g.coords(k);
        w.write_record([x.to_string(), y.to_string(), field.at(k).to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Generic table with a header row.
pub fn write_table_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn solve(converged: bool) -> SolveReport {
        SolveReport {
            iterations: 3,
            final_update: 0.0,
            energy: 1.0,
            converged,
            complementarity_defect: 0.0,
            admissibility_gap: None,
        }
    }

    #[test]
    fn status_tracks_checks_and_solves() {
        let mut r = Report::new("x", ExperimentConfig::default());
        assert_eq!(r.status, Status::Pass);
        r.check("a", Some(1), true, 0.0, "", "");
        assert!(r.all_passed());
        r.check("b", None, false, 1.0, "< 0.5", "");
        assert_eq!(r.status, Status::CheckFailed);
        r.add_solve("u", solve(false));
        assert_eq!(r.status.exit_code(), 3);
        assert_eq!(r.checks_for(1).count(), 1);
    }

    #[test]
    fn report_round_trips_and_is_stable() {
        let dir = tempfile::tempdir().unwrap();
        let mut r = Report::new("x", ExperimentConfig::named("x"));
        r.add_solve("u", solve(true));
        r.add_result("zeta", 1.5).unwrap();
        r.add_result("alpha", vec![1.0, 2.0]).unwrap();
        r.write(dir.path()).unwrap();
        let a = std::fs::read(dir.path().join("report.json")).unwrap();
        r.write(dir.path()).unwrap();
        let b = std::fs::read(dir.path().join("report.json")).unwrap();
        assert_eq!(a, b);
        let back: Report = serde_json::from_slice(&a).unwrap();
        assert_eq!(back, r);
        let text = String::from_utf8(a).unwrap();
        assert!(text.find("\"alpha\"").unwrap() < text.find("\"zeta\"").unwrap());
    }
}
