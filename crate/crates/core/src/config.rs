//! Experiment configuration: a TOML key/value file with an optional
//! `include` of shared defaults. Unknown keys are rejected.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{Grid, GridSpec, ObstacleRegion};
use crate::error::{config, Result};
use crate::exact::{polar, ClosedForm, Sign};
use crate::solver::SolverParams;

/// Nesting limit for `include` chains.
const MAX_INCLUDE_DEPTH: usize = 8;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Option<String>,
    /// Nodes per axis of the main grid.
    pub resolution: Option<usize>,
    /// Refinement ladder for convergence checks.
    pub resolutions: Option<Vec<usize>>,
    /// Obstacle region descriptor, e.g. `halfline` or `cantor(5)`.
    pub region: Option<String>,
    /// Boundary data descriptor, e.g. `h-alpha(0.5)`; see [`BoundaryData`].
    pub boundary: Option<String>,
    pub omega: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub radii_count: Option<usize>,
    pub r_min: Option<f64>,
    pub r_max: Option<f64>,
    /// Sub-grid resolution for capacity solves.
    pub sub_resolution: Option<usize>,
    pub svg: Option<bool>,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn named(name: &str) -> Self {
        Self {
            experiment: Some(name.to_string()),
            ..Self::default()
        }
    }

    /// Read `path`, resolving `include` relative to the including file.
    pub fn load(path: &Path) -> Result<Self> {
        let table = load_table(path, 0)?;
        Self::from_table(table)
    }

    /// Parse TOML text; `include` paths resolve against `base`.
    pub fn from_toml_str(text: &str, base: &Path) -> Result<Self> {
        let table = parse_table(text, base, 0)?;
        Self::from_table(table)
    }

    fn from_table(table: toml::Table) -> Result<Self> {
        let cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(&mut self, other: &ExperimentConfig) {
        macro_rules! take {
            ($($f:ident),*) => {$(
                if other.$f.is_some() {
                    self.$f = other.$f.clone();
                }
            )*};
        }
        take!(
            experiment,
            resolution,
            resolutions,
            region,
            boundary,
            omega,
            tol,
            max_iter,
            radii_count,
            r_min,
            r_max,
            sub_resolution,
            svg,
            output
        );
    }

    pub fn validate(&self) -> Result<()> {
        for n in self.resolution.iter().chain(self.resolutions.iter().flatten()) {
            GridSpec::new(*n)?;
        }
        if let Some(n) = self.sub_resolution {
            GridSpec::new(n)?;
        }
        if let Some(r) = &self.region {
            ObstacleRegion::parse(r)?;
        }
        if let Some(b) = &self.boundary {
            BoundaryData::parse(b)?;
        }
        let params = SolverParams {
            omega: self.omega.unwrap_or(SolverParams::DEFAULT_OMEGA),
            tol: self.tol.unwrap_or(SolverParams::DEFAULT_TOL),
            max_iter: self.max_iter.unwrap_or(1),
        };
        params.validate()?;
        if let Some(c) = self.radii_count {
            if c < 3 {
                return Err(config("radii_count must be at least 3"));
            }
        }
        if let (Some(a), Some(b)) = (self.r_min, self.r_max) {
            if !(a > 0.0 && a < b) {
                return Err(config(format!("need 0 < r_min < r_max, got {a}, {b}")));
            }
        }
        Ok(())
    }

    pub fn resolution_or(&self, default: usize) -> usize {
        self.resolution.unwrap_or(default)
    }

    pub fn grid(&self, default_resolution: usize) -> Result<std::sync::Arc<Grid>> {
        Grid::build(GridSpec::new(self.resolution_or(default_resolution))?)
    }

    pub fn region_or(&self, default: ObstacleRegion) -> Result<ObstacleRegion> {
        self.region
            .as_deref()
            .map_or(Ok(default), ObstacleRegion::parse)
    }

    pub fn boundary_or(&self, default: BoundaryData) -> Result<BoundaryData> {
        self.boundary
            .as_deref()
            .map_or(Ok(default), BoundaryData::parse)
    }

    pub fn solver_params(&self, grid: &Grid) -> SolverParams {
        let base = SolverParams::for_grid(grid);
        SolverParams {
            omega: self.omega.unwrap_or(base.omega),
            tol: self.tol.unwrap_or(base.tol),
            max_iter: self.max_iter.unwrap_or(base.max_iter),
        }
    }

    pub fn svg_enabled(&self) -> bool {
        self.svg.unwrap_or(true)
    }
}

/// A batch file: shared keys at the top level (plus an optional `include`)
/// and one `[[run]]` table per experiment. Each run writes into its own
/// subdirectory, named by its `output` key or else by its experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub runs: Vec<(String, ExperimentConfig)>,
}

impl Batch {
    pub fn load(path: &Path) -> Result<Self> {
        let mut table = load_table(path, 0)?;
        let runs = match table.remove("run") {
            Some(toml::Value::Array(a)) => a,
            Some(_) => return Err(config("'run' must be an array of tables ([[run]])")),
            None => return Err(config("batch file has no [[run]] entries")),
        };
        let shared = ExperimentConfig::from_table(table)?;
        let mut out = Vec::new();
        for (k, v) in runs.into_iter().enumerate() {
            let toml::Value::Table(t) = v else {
                return Err(config(format!("run {k} is not a table")));
            };
            let own = ExperimentConfig::from_table(t)?;
            let mut cfg = shared.clone();
            cfg.overlay(&own);
            let name = cfg
                .experiment
                .clone()
                .ok_or_else(|| config(format!("run {k} names no experiment")))?;
            let dir = cfg
                .output
                .as_ref()
                .map_or(name.clone(), |p| p.display().to_string());
            if out.iter().any(|(d, _)| *d == dir) {
                return Err(config(format!("two runs write to '{dir}'; set distinct output keys")));
            }
            out.push((dir, cfg));
        }
        Ok(Self { runs: out })
    }
}

fn load_table(path: &Path, depth: usize) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config(format!("cannot read config {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_table(&text, base, depth)
}

fn parse_table(text: &str, base: &Path, depth: usize) -> Result<toml::Table> {
    if depth > MAX_INCLUDE_DEPTH {
        return Err(config("include chain too deep (cycle?)"));
    }
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| config(e.message().to_string()))?;
    let Some(include) = table.remove("include") else {
        return Ok(table);
    };
    let rel = include
        .as_str()
        .ok_or_else(|| config("include must be a path string"))?;
    let mut merged = load_table(&base.join(rel), depth + 1)?;
    for (k, v) in table {
        merged.insert(k, v);
    }
    Ok(merged)
}

/// Dirichlet data on `∂B₁`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BoundaryData {
    /// A closed form evaluated at the boundary nodes.
    Form(ClosedForm),
    /// `cos θ − c`.
    CosTheta(f64),
    Constant(f64),
    /// `Re(z²) + 0.3 Re(z⁴)`: nonnegative on the negative axis, zero only at
    /// the origin.
    Isolated,
    /// `1 + c h_{1/2}`.
    Jump(f64),
}

impl BoundaryData {
    pub fn evaluate(&self, x: f64, y: f64) -> f64 {
        match *self {
            BoundaryData::Form(f) => f.evaluate(x, y),
            BoundaryData::CosTheta(c) => {
                if x == 0.0 && y == 0.0 {
                    1.0 - c
                } else {
                    y.abs().atan2(x).cos() - c
                }
            }
            BoundaryData::Constant(c) => c,
            BoundaryData::Isolated => {
                let (r, t) = polar(x, y);
                r * r * (2.0 * t).cos() + 0.3 * r.powi(4) * (4.0 * t).cos()
            }
            BoundaryData::Jump(c) => 1.0 + c * ClosedForm::HAlpha(0.5).evaluate(x, y),
        }
    }

    pub fn eval_fn(self) -> impl Fn(f64, f64) -> f64 + Send + Sync + Copy {
        move |x, y| self.evaluate(x, y)
    }

    /// Descriptors: `h-alpha(a)`, `homogeneous(k)`, `minus-homogeneous(k)`,
    /// `barrier(eps)`, `mixed-exact`, `cos-theta(c)`, `constant(c)`,
    /// `isolated`, `jump(c)`.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim().to_ascii_lowercase();
        let (name, arg) = match t.split_once('(') {
            Some((name, rest)) => {
                let inner = rest
                    .strip_suffix(')')
                    .ok_or_else(|| config(format!("unbalanced parentheses in '{text}'")))?;
                let v: f64 = parse_number(inner.trim())
                    .ok_or_else(|| config(format!("bad number '{inner}' in '{text}'")))?;
                (name.trim().to_string(), Some(v))
            }
            None => (t.clone(), None),
        };
        let need = |a: Option<f64>| a.ok_or_else(|| config(format!("'{name}' needs an argument")));
        Ok(match name.as_str() {
            "h-alpha" => BoundaryData::Form(ClosedForm::h_alpha(need(arg)?)?),
            "homogeneous" => BoundaryData::Form(ClosedForm::homogeneous(need(arg)?, Sign::Plus)?),
            "minus-homogeneous" => {
                BoundaryData::Form(ClosedForm::homogeneous(need(arg)?, Sign::Minus)?)
            }
            "barrier" => BoundaryData::Form(ClosedForm::barrier(need(arg)?)?),
            "mixed-exact" => BoundaryData::Form(ClosedForm::MixedExact),
            "cos-theta" => BoundaryData::CosTheta(need(arg)?),
            "constant" => BoundaryData::Constant(need(arg)?),
            "isolated" => BoundaryData::Isolated,
            "jump" => BoundaryData::Jump(need(arg)?),
            _ => return Err(config(format!("unknown boundary descriptor '{text}'"))),
        })
    }
}

/// Accepts plain decimals and `pi`-fractions such as `pi/4`.
fn parse_number(s: &str) -> Option<f64> {
    if let Ok(v) = s.parse::<f64>() {
        return Some(v);
    }
    let (num, den) = s.split_once('/').unwrap_or((s, "1"));
    let num = num.trim();
    let base = if num == "pi" {
        PI
    } else {
        num.strip_suffix("pi")?.trim().trim_end_matches('*').parse::<f64>().ok()? * PI
    };
    Some(base / den.trim().parse::<f64>().ok()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn parses_minimal_config() {
        let c = ExperimentConfig::from_toml_str(
            "experiment = \"halfline-optimal\"\nresolution = 129\n",
            Path::new("."),
        )
        .unwrap();
        assert_eq!(c.experiment.as_deref(), Some("halfline-optimal"));
        assert_eq!(c.resolution, Some(129));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let e = ExperimentConfig::from_toml_str("resolutoin = 129\n", Path::new(".")).unwrap_err();
        assert!(matches!(e, Error::Config(_)), "{e}");
        assert!(e.to_string().contains("resolutoin"));
    }

    #[test]
    fn invalid_values_are_rejected() {
        for text in [
            "resolution = 128",
            "resolution = 17",
            "omega = 2.0",
            "region = \"spiral\"",
            "boundary = \"h-alpha(0.2)\"",
            "r_min = 0.5\nr_max = 0.1",
        ] {
            assert!(
                ExperimentConfig::from_toml_str(text, Path::new(".")).is_err(),
                "{text}"
            );
        }
    }

    #[test]
    fn include_supplies_defaults() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("base.toml"), "resolution = 65\nomega = 1.7\n").unwrap();
        let main = dir.path().join("main.toml");
        std::fs::write(&main, "include = \"base.toml\"\nomega = 1.9\n").unwrap();
        let c = ExperimentConfig::load(&main).unwrap();
        assert_eq!(c.resolution, Some(65));
        assert_eq!(c.omega, Some(1.9));
    }

    #[test]
    fn include_cycles_are_caught() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a.toml");
        std::fs::write(&a, "include = \"a.toml\"\n").unwrap();
        assert!(ExperimentConfig::load(&a).is_err());
    }

    #[test]
    fn boundary_descriptors() {
        assert_eq!(
            BoundaryData::parse("h-alpha(0.5)").unwrap(),
            BoundaryData::Form(ClosedForm::HAlpha(0.5))
        );
        assert_eq!(BoundaryData::parse("cos-theta(0.3)").unwrap(), BoundaryData::CosTheta(0.3));
        assert!(BoundaryData::parse("minus-homogeneous(1.5)").is_err());
        assert!(BoundaryData::parse("jump").is_err());
        assert!(BoundaryData::parse("wobble(1)").is_err());
        let b = BoundaryData::CosTheta(0.3);
        assert!((b.evaluate(-1.0, 0.0) + 1.3).abs() < 1e-15);
        assert!((BoundaryData::Isolated.evaluate(-0.5, 0.0) - (0.25 + 0.3 * 0.0625)).abs() < 1e-15);
    }

    #[test]
    fn pi_fractions() {
        assert_eq!(parse_number("pi/4"), Some(PI / 4.0));
        assert_eq!(parse_number("0.5"), Some(0.5));
        assert_eq!(parse_number("3pi/4"), Some(3.0 * PI / 4.0));
        assert_eq!(parse_number("x"), None);
    }

    #[test]
    fn batch_merges_shared_keys() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("batch.toml");
        std::fs::write(
            &p,
            "resolution = 129\n[[run]]\nexperiment = \"cone-sweep\"\n\n[[run]]\nexperiment = \"rellich-check\"\nresolution = 65\n",
        )
        .unwrap();
        let b = Batch::load(&p).unwrap();
        assert_eq!(b.runs.len(), 2);
        assert_eq!(b.runs[0].0, "cone-sweep");
        assert_eq!(b.runs[0].1.resolution, Some(129));
        assert_eq!(b.runs[1].1.resolution, Some(65));

        std::fs::write(&p, "[[run]]\nexperiment = \"a\"\n[[run]]\nexperiment = \"a\"\n").unwrap();
        assert!(Batch::load(&p).is_err());
        std::fs::write(&p, "[[run]]\nresolution = 65\n").unwrap();
        assert!(Batch::load(&p).is_err());
    }

    #[test]
    fn overlay_keeps_unset_fields() {
        let mut a = ExperimentConfig {
            resolution: Some(129),
            omega: Some(1.7),
            ..Default::default()
        };
        a.overlay(&ExperimentConfig {
            resolution: Some(65),
            ..Default::default()
        });
        assert_eq!(a.resolution, Some(65));
        assert_eq!(a.omega, Some(1.7));
    }
}
