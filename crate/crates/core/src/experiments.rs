//! The named experiments. Each one solves its problems, records solver
//! summaries and result tables in a [`Report`], and adds named pass/fail
//! checks; checks that decide an acceptance criterion carry its number.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::blowup::{self, BlowupResult, Branch};
use crate::capacity::{self, CapacityParams, CapacityQuery, Condenser};
use crate::config::{BoundaryData, ExperimentConfig};
use crate::diagnostics::{self, FrequencyProfile, HolderFit, Point, ORIGIN};
use crate::domain::{Grid, GridSpec, Mask, ObstacleRegion, ScalarField};
use crate::error::{config, Error, Result};
use crate::exact::{cone_for_alpha, ClosedForm, Sign};
use crate::report::{self, Report, Timings};
use crate::solver::{
    comparison_check, extend_obstacle, obstacle_field, solve_mixed_bvp, solve_obstacle, Cutoff,
    MixedBvp, ObstacleProblem, SolveReport, SolverParams, NO_OBSTACLE,
};
use crate::svg::{self, Series};

pub const EXPERIMENTS: [&str; 10] = [
    "halfline-optimal",
    "cone-sweep",
    "cantor-cdc",
    "capacity-scaling",
    "frequency-monotonicity",
    "rellich-check",
    "mixed-bvp-barrier",
    "extension-equivalence",
    "jump-obstacle",
    "isolated-contact",
];

pub const DEFAULT_RESOLUTION: usize = 257;

/// Sub-grid resolution of the capacity-scaling reference value.
pub const CAPACITY_REFERENCE_RESOLUTION: usize = 513;

/// Number of log-spaced radii in fits.
const FIT_SAMPLES: usize = 16;

#[derive(Debug)]
pub struct RunOutput {
    pub report: Report,
    pub timings: Timings,
}

/// Run experiment `name`. With `out`, the report, timings, CSVs and (unless
/// disabled) SVGs are written into that directory.
pub fn run(name: &str, cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunOutput> {
    let f: fn(&mut Ctx) -> Result<()> = match name {
        "halfline-optimal" => halfline_optimal,
        "cone-sweep" => cone_sweep,
        "cantor-cdc" => cantor_cdc,
        "capacity-scaling" => capacity_scaling,
        "frequency-monotonicity" => frequency_monotonicity,
        "rellich-check" => rellich_check,
        "mixed-bvp-barrier" => mixed_bvp_barrier,
        "extension-equivalence" => extension_equivalence,
        "jump-obstacle" => jump_obstacle,
        "isolated-contact" => isolated_contact,
        _ => {
            return Err(config(format!(
                "unknown experiment '{name}'; expected one of {}",
                EXPERIMENTS.join(", ")
            )))
        }
    };
    execute(name, cfg, out, f)
}

/// Single-problem commands: solve the configured problem (region and
/// boundary data default to the half-line and `h_{1/2}`) and report one
/// diagnostic on it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Capacity,
    Frequency,
    Blowup,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Capacity => "capacity",
            Command::Frequency => "frequency",
            Command::Blowup => "blowup",
        }
    }
}

pub fn run_command(cmd: Command, cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunOutput> {
    execute(cmd.name(), cfg, out, |ctx| single_problem(ctx, cmd))
}

fn execute(
    name: &str,
    cfg: &ExperimentConfig,
    out: Option<&Path>,
    body: impl FnOnce(&mut Ctx) -> Result<()>,
) -> Result<RunOutput> {
    cfg.validate()?;
    let mut echo = cfg.clone();
    echo.experiment = Some(name.to_string());
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
    }
    let mut ctx = Ctx {
        cfg,
        out: out.map(Path::to_path_buf),
        report: Report::new(name, echo),
        timings: Timings::default(),
    };
    body(&mut ctx)?;
    if let Some(dir) = &ctx.out {
        ctx.report.write(dir)?;
        ctx.timings.write(dir)?;
    }
    Ok(RunOutput {
        report: ctx.report,
        timings: ctx.timings,
    })
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    out: Option<PathBuf>,
    report: Report,
    timings: Timings,
}

impl Ctx<'_> {
    fn grid(&self) -> Result<Arc<Grid>> {
        self.cfg.grid(DEFAULT_RESOLUTION)
    }

    fn params(&self, grid: &Grid) -> SolverParams {
        self.cfg.solver_params(grid)
    }

    /// Registers `name` in the report and returns its path when writing.
    fn file(&mut self, name: &str) -> Option<PathBuf> {
        let dir = self.out.clone()?;
        self.report.add_file(name);
        Some(dir.join(name))
    }

    fn svg_file(&mut self, name: &str) -> Option<PathBuf> {
        if self.cfg.svg_enabled() {
            self.file(name)
        } else {
            None
        }
    }

    /// Record a solve and its complementarity row.
    fn record_solve(&mut self, label: &str, report: SolveReport, grid: &Grid, params: SolverParams) {
        self.report.add_solve(label, report);
        if report.converged {
            let bound = 10.0 * params.tol / (grid.h() * grid.h());
            self.report.check(
                &format!("complementarity: {label}"),
                Some(14),
                report.complementarity_defect <= bound,
                report.complementarity_defect,
                format!("<= 10 tol / h^2 = {bound:.3e}"),
                format!("{} sweeps", report.iterations),
            );
        }
    }

    fn obstacle_solve(&mut self, label: &str, p: &Problem) -> Result<ScalarField> {
        let params = self.params(&p.grid);
        let (u, rep) = self
            .timings
            .time(label, || solve_obstacle(&p.problem, params))?;
        self.record_solve(label, rep, &p.grid, params);
        Ok(u)
    }

    fn frequency_outputs(&mut self, tag: &str, profile: &FrequencyProfile) -> Result<()> {
        if let Some(path) = self.file(&format!("frequency_{tag}.csv")) {
            profile.write_csv(&path)?;
        }
        if let Some(path) = self.svg_file(&format!("frequency_{tag}.svg")) {
            let n: Vec<(f64, f64)> = profile
                .radii
                .iter()
                .zip(&profile.n)
                .filter_map(|(&r, n)| n.map(|v| (r, v)))
                .collect();
            svg::line_plot(
                &format!("N(r), {tag}"),
                "r",
                &[Series {
                    label: "N(r)",
                    points: n,
                }],
                true,
                false,
                &path,
            )?;
        }
        if let Some(path) = self.svg_file(&format!("beta_{tag}.svg")) {
            let b = profile.radii.iter().copied().zip(profile.beta.iter().copied()).collect();
            svg::line_plot(
                &format!("beta(r), {tag}"),
                "r",
                &[Series {
                    label: "beta(r)",
                    points: b,
                }],
                true,
                false,
                &path,
            )?;
        }
        Ok(())
    }

    fn holder_outputs(&mut self, tag: &str, fit: &HolderFit) -> Result<()> {
        if let Some(path) = self.file(&format!("osc_{tag}.csv")) {
            fit.write_csv(&path)?;
        }
        if let Some(path) = self.svg_file(&format!("osc_{tag}.svg")) {
            let data = fit.radii.iter().copied().zip(fit.values.iter().copied()).collect();
            let line = fit
                .radii
                .iter()
                .map(|&r| (r, fit.constant * r.powf(fit.exponent)))
                .collect();
            svg::line_plot(
                &format!("osc(r), {tag}, exponent {:.4}", fit.exponent),
                "r",
                &[
                    Series {
                        label: "osc(r)",
                        points: data,
                    },
                    Series {
                        label: "fit",
                        points: line,
                    },
                ],
                true,
                true,
                &path,
            )?;
        }
        Ok(())
    }

    fn heatmap(&mut self, name: &str, u: &ScalarField, highlight: Option<&Mask>, title: &str) -> Result<()> {
        if let Some(path) = self.svg_file(name) {
            svg::heatmap(u, highlight, title, &path)?;
        }
        Ok(())
    }
}

/// Obstacle problem with the obstacle `ψ` on a region mask.
struct Problem {
    grid: Arc<Grid>,
    region: Mask,
    psi: ScalarField,
    problem: ObstacleProblem,
}

fn problem(
    grid: &Arc<Grid>,
    region: &ObstacleRegion,
    data: BoundaryData,
    psi: impl Fn(f64, f64) -> f64,
) -> Result<Problem> {
    let mask = region.realize(grid)?;
    let psi = obstacle_field(grid, &mask, psi);
    let boundary = ScalarField::from_fn(grid.clone(), data.eval_fn());
    let problem = ObstacleProblem::new(boundary, mask.clone(), psi.clone())?;
    Ok(Problem {
        grid: grid.clone(),
        region: mask,
        psi,
        problem,
    })
}

fn zero_obstacle(grid: &Arc<Grid>, region: &ObstacleRegion, data: BoundaryData) -> Result<Problem> {
    problem(grid, region, data, |_, _| 0.0)
}

fn h_half() -> BoundaryData {
    BoundaryData::Form(ClosedForm::HAlpha(0.5))
}

/// Max-norm of `u − f` over active nodes within `radius`.
fn max_error(u: &ScalarField, f: impl Fn(f64, f64) -> f64, radius: f64) -> f64 {
    let g = u.grid();
    (0..g.len())
        .filter(|&k| g.is_active(k))
        .filter_map(|k| {
            let (x, y) = g.coords(k);
            (x.hypot(y) <= radius).then(|| (u.at(k) - f(x, y)).abs())
        })
        .fold(0.0, f64::max)
}

fn holder_at_origin(u: &ScalarField) -> Result<HolderFit> {
    let h = u.grid().h();
    diagnostics::holder_fit(u, u.grid().origin(), 8.0 * h, 0.25, FIT_SAMPLES)
}

fn shifted(u: &ScalarField, by: f64) -> Result<ScalarField> {
    ScalarField::from_values(u.grid().clone(), u.values().iter().map(|v| v - by).collect())
}

/// Coarse partner of a resolution: every other node.
fn coarse_of(n: usize) -> Result<usize> {
    GridSpec::new((n - 1) / 2 + 1).map(|s| s.resolution())
}

fn sup_on_circle(u: &ScalarField, r: f64) -> Result<f64> {
    let m = diagnostics::QUADRATURE_SAMPLES;
    (0..m)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / m as f64;
            u.sample(r * t.cos(), r * t.sin())
                .map(f64::abs)
                .ok_or_else(|| Error::OutOfRange(format!("circle of radius {r} off the lattice")))
        })
        .try_fold(0.0, |acc, v| v.map(|v| f64::max(acc, v)))
}

fn fit_radii(grid: &Grid, lo: f64, hi: f64) -> Vec<f64> {
    diagnostics::fit_radii(grid.h(), lo, hi, FIT_SAMPLES)
}

fn profile_radii(ctx: &Ctx, u: &ScalarField) -> Vec<f64> {
    let h = u.grid().h();
    let lo = ctx.cfg.r_min.unwrap_or(8.0 * h);
    let hi = ctx.cfg.r_max.unwrap_or(0.5);
    let count = ctx.cfg.radii_count.unwrap_or(diagnostics::DEFAULT_PROFILE_RADII);
    diagnostics::log_radii(lo, hi, count)
}

fn blowup_summary(r: &BlowupResult) -> String {
    format!(
        "kappa_hat {:.4}, admissible {:?}, sign {:?}, branch {:?}",
        r.kappa_hat, r.kappa_admissible, r.sign, r.branch
    )
}

fn halfline_optimal(ctx: &mut Ctx) -> Result<()> {
    let ladder = match (&ctx.cfg.resolutions, ctx.cfg.resolution) {
        (Some(l), _) => l.clone(),
        (None, Some(n)) => vec![coarse_of(n)?, n],
        (None, None) => vec![129, DEFAULT_RESOLUTION],
    };
    if ladder.len() < 2 {
        return Err(config("halfline-optimal needs at least two resolutions"));
    }
    let form = ClosedForm::HAlpha(0.5);
    let mut errors = Vec::new();
    let mut fine = None;
    for &n in &ladder {
        let grid = Grid::build(GridSpec::new(n)?)?;
        let p = zero_obstacle(&grid, &ObstacleRegion::HalfLine, h_half())?;
        let u = ctx.obstacle_solve(&format!("halfline N={n}"), &p)?;
        let err = max_error(&u, form.eval_fn(), 1.0);
        errors.push((grid.h(), err));

        // Contact versus the half-line mask without its two outermost nodes.
        let contact = diagnostics::contact_set(&u, &p.psi, &p.region);
        let x_min = p
            .region
            .indices()
            .map(|k| grid.coords(k).0)
            .fold(f64::INFINITY, f64::min);
        let trimmed: Vec<usize> = p
            .region
            .indices()
            .filter(|&k| grid.coords(k).0 >= x_min + 2.0 * grid.h() - 1e-12)
            .collect();
        let missing = trimmed.iter().filter(|&&k| !contact.get(k)).count();
        ctx.report.check(
            &format!("contact set equals trimmed half-line, N={n}"),
            Some(1),
            missing == 0,
            missing as f64,
            "0 missing nodes",
            format!("contact {} of {} half-line nodes", contact.count(), p.region.count()),
        );
        fine = Some((p, u, contact));
    }
    let rows: Vec<Vec<f64>> = errors.iter().map(|&(h, e)| vec![h, e]).collect();
    if let Some(path) = ctx.file("convergence.csv") {
        report::write_table_csv(&path, &["h", "max_error"], &rows)?;
    }
    let (h0, e0) = errors[errors.len() - 2];
    let (h1, e1) = errors[errors.len() - 1];
    let order = (e0 / e1).ln() / (h0 / h1).ln();
    ctx.report.add_result("max_errors", &errors)?;
    ctx.report.check(
        "max-norm error order under refinement",
        Some(1),
        order >= 0.4 && e1 < e0,
        order,
        ">= 0.4",
        format!("errors {e0:.4e} -> {e1:.4e}"),
    );

    let (p, u, contact) = fine.expect("ladder is nonempty");
    let fit = holder_at_origin(&u)?;
    ctx.holder_outputs("origin", &fit)?;
    ctx.report.add_result("holder_fit", &fit)?;
    ctx.report.check(
        "Hoelder exponent at the origin",
        Some(2),
        (fit.exponent - 0.5).abs() <= 0.05,
        fit.exponent,
        "0.50 +- 0.05",
        format!("r in [{:.4}, {:.4}]", fit.r_range.0, fit.r_range.1),
    );

    let radii = profile_radii(ctx, &u);
    let profile = diagnostics::frequency_profile(&u, ORIGIN, &radii)?;
    ctx.frequency_outputs("halfline", &profile)?;
    let kappa_freq = blowup::kappa_from_frequency(&profile)?;
    ctx.report.add_result("kappa_from_frequency", kappa_freq)?;

    let (analysis, resc) = blowup::analyze(&u)?;
    ctx.report.add_result("blowup", &analysis)?;
    let res = &analysis.result;
    ctx.report.check(
        "blowup of the solved problem is 1/2",
        Some(10),
        res.kappa_admissible == Some(0.5) && res.profile_residual <= 5e-2,
        res.profile_residual,
        "kappa = 1/2 with residual <= 5e-2",
        blowup_summary(res),
    );
    ctx.report.check(
        "blowup sign follows the half-integer convention",
        None,
        res.sign_consistent,
        res.amplitude,
        "negative amplitude for kappa in 2N0 + 1/2",
        blowup_summary(res),
    );
    ctx.report.check(
        "rescaling normalization",
        None,
        (analysis.norm - 1.0).abs() <= 1e-2,
        analysis.norm,
        "1 +- 1e-2",
        format!("r = {:.4}", analysis.radius),
    );
    if let (Some(radius), Some(distance)) = (analysis.cauchy_radius, analysis.cauchy_distance) {
        ctx.report.check(
            "Cauchy check of rescalings",
            None,
            distance <= 5e-2,
            distance,
            "<= 5e-2 on B_1/2",
            format!("radii {:.4} and {:.4}", radius, radius / 2.0),
        );
    }
    if let Some(kappa) = res.kappa_admissible {
        ctx.report.check(
            "frequency agrees with blowup",
            None,
            (kappa_freq - kappa).abs() <= 0.1,
            kappa_freq,
            format!("{kappa} +- 0.1"),
            "",
        );
    }
    if let Some(path) = ctx.file("blowup_profile.csv") {
        blowup::write_profile_csv(&resc.field, res, &path)?;
    }

    // Exact admissible inputs on the same grid.
    let grid = p.grid.clone();
    for (kappa, sign) in [(0.5, Sign::Minus), (1.5, Sign::Plus), (2.0, Sign::Plus)] {
        let f = ScalarField::from_fn(grid.clone(), ClosedForm::homogeneous(kappa, sign)?.eval_fn());
        let r = blowup::rescale(&f, blowup::MAX_RESCALE_RADIUS)?;
        let c = blowup::classify(&r.field)?;
        ctx.report.check(
            &format!("classification of exact kappa = {kappa}"),
            Some(10),
            c.kappa_admissible == Some(kappa) && c.profile_residual <= 1e-3,
            c.profile_residual,
            format!("kappa = {kappa} with residual <= 1e-3"),
            format!("{}, gap {:.1}", blowup_summary(&c), c.admissibility_gap()),
        );
    }

    if let Some(path) = ctx.file("u.csv") {
        report::write_field_csv(&u, &path)?;
    }
    ctx.heatmap("u.svg", &u, Some(&contact), "u, half-line obstacle")?;
    Ok(())
}

fn cone_sweep(ctx: &mut Ctx) -> Result<()> {
    let grid = ctx.grid()?;
    let mut rows = Vec::new();
    for alpha in [0.5, 2.0 / 3.0, 0.75, 1.0] {
        let region = cone_for_alpha(alpha)?;
        let form = ClosedForm::h_alpha(alpha)?;
        let p = zero_obstacle(&grid, &region, BoundaryData::Form(form))?;
        let label = format!("cone alpha={alpha:.4}");
        let u = ctx.obstacle_solve(&label, &p)?;
        let fit = holder_at_origin(&u)?;
        ctx.holder_outputs(&format!("alpha_{alpha:.3}"), &fit)?;
        rows.push(vec![alpha, fit.exponent, fit.fit_residual, max_error(&u, form.eval_fn(), 1.0)]);
        ctx.report.check(
            &format!("Hoelder exponent for alpha = {alpha:.4}"),
            Some(3),
            (fit.exponent - alpha).abs() <= 0.05,
            fit.exponent,
            format!("{alpha:.4} +- 0.05"),
            format!("{} contact nodes", diagnostics::contact_set(&u, &p.psi, &p.region).count()),
        );
        if alpha == 2.0 / 3.0 {
            let contact = diagnostics::contact_set(&u, &p.psi, &p.region);
            ctx.heatmap("u_alpha_0.667.svg", &u, Some(&contact), "u, cone alpha = 2/3")?;
        }
    }
    if let Some(path) = ctx.file("cone_sweep.csv") {
        report::write_table_csv(&path, &["alpha", "exponent", "fit_residual", "max_error_vs_h_alpha"], &rows)?;
    }
    ctx.report.add_result("cone_sweep", &rows)?;
    Ok(())
}

fn cantor_cdc(ctx: &mut Ctx) -> Result<()> {
    let grid = ctx.grid()?;
    let h = grid.h();
    let params = CapacityParams {
        sub_resolution: ctx.cfg.sub_resolution.unwrap_or(capacity::DEFAULT_SUB_RESOLUTION),
        solver: None,
    };
    let r_floor = capacity::MIN_RADIUS_SPACINGS * h;
    let cases: [(&str, ObstacleRegion, Point, f64, f64); 2] = [
        ("halfline", ObstacleRegion::HalfLine, ORIGIN, 0.04_f64.max(r_floor), 0.4),
        (
            "cantor",
            ObstacleRegion::CantorLine {
                level: crate::domain::DEFAULT_CANTOR_LEVEL,
            },
            (-0.25, 0.0),
            r_floor,
            0.37,
        ),
    ];
    for (tag, region, x0, lo, cap_hi) in cases {
        let p = zero_obstacle(&grid, &region, h_half())?;
        let u = ctx.obstacle_solve(&format!("{tag} h_1/2 data"), &p)?;
        let contact = diagnostics::contact_set(&u, &p.psi, &p.region);
        let hi = (10.0 * lo).min(cap_hi);
        let radii = diagnostics::log_radii(lo, hi, 5);
        let cdc = ctx.timings.time(&format!("{tag} capacities"), || {
            capacity::cdc_profile(&grid, &contact, x0, &radii, params)
        })?;
        let mazya = capacity::mazya_from_profile(&u, &cdc);
        if let Some(path) = ctx.file(&format!("cdc_{tag}.csv")) {
            cdc.write_csv(&path)?;
        }
        if let Some(path) = ctx.file(&format!("mazya_{tag}.csv")) {
            mazya.write_csv(&path)?;
        }
        let reliable: Vec<f64> = cdc.rows.iter().filter(|r| r.reliable).map(|r| r.r).collect();
        let span = match (reliable.first(), reliable.last()) {
            (Some(a), Some(b)) => b / a,
            _ => 0.0,
        };
        let c0 = cdc.lower_bound().unwrap_or(0.0);
        ctx.report.add_result(&format!("cdc_{tag}"), &cdc)?;
        ctx.report.add_result(&format!("mazya_{tag}"), &mazya)?;
        ctx.report.check(
            &format!("capacity density bounded below, {tag}"),
            Some(9),
            c0 > 0.0 && span >= 10.0 - 1e-9,
            c0,
            "c0 > 0 across a decade of radii",
            format!(
                "x0 = ({}, {}), reliable radii span factor {span:.2}, effective Cantor level {}",
                x0.0,
                x0.1,
                crate::domain::effective_cantor_level(&grid, crate::domain::DEFAULT_CANTOR_LEVEL)
            ),
        );
        let slope = mazya.log_slope();
        ctx.report.check(
            &format!("Maz'ya ratio has no growth trend, {tag}"),
            Some(9),
            slope.is_some_and(|s| s.abs() <= 0.1),
            slope.unwrap_or(f64::NAN),
            "|log-slope| <= 0.1",
            format!("max ratio {:?}", mazya.max_ratio()),
        );
        if tag == "cantor" {
            ctx.heatmap("u_cantor.svg", &u, Some(&contact), "u, Cantor obstacle")?;
        }
    }
    Ok(())
}

fn capacity_scaling(ctx: &mut Ctx) -> Result<()> {
    let exact = 2.0 * PI / 2f64.ln();
    let reference = ctx
        .cfg
        .sub_resolution
        .unwrap_or(CAPACITY_REFERENCE_RESOLUTION);
    let disk = CapacityQuery {
        condenser: Condenser::disk(ORIGIN, 0.5),
        center: ORIGIN,
        radius: 1.0,
        clip: None,
    };
    let c = ctx.timings.time("cap(B_1/2; B_1)", || {
        capacity::capacity0(
            &disk,
            CapacityParams {
                sub_resolution: reference,
                solver: None,
            },
        )
    })?;
    let rel = c.capacity / exact - 1.0;
    ctx.report.add_result("cap_half_disk", &c)?;
    ctx.report.check(
        "cap0(B_1/2; B_1) matches 2 pi / ln 2",
        Some(8),
        rel.abs() <= 0.02,
        c.capacity,
        format!("{exact:.4} +- 2%"),
        format!("relative error {rel:.4e} at sub-grid {reference}"),
    );

    // Matched effective resolution: each shell gets its own sub-grid.
    let params = CapacityParams {
        sub_resolution: capacity::DEFAULT_SUB_RESOLUTION,
        solver: None,
    };
    let mut rows = Vec::new();
    for r in [0.1, 0.2, 0.4] {
        let q = CapacityQuery {
            condenser: Condenser::disk(ORIGIN, r),
            center: ORIGIN,
            radius: 2.0 * r,
            clip: None,
        };
        let matched = capacity::capacity0(&q, params)?.capacity;
        // Same condenser on one shared lattice, for comparison.
        let grid = ctx.grid()?;
        let shell = Grid::with_radius(grid.spec(), 2.0 * r)?;
        let mask = Condenser::disk(ORIGIN, r).rasterize(&shell, None);
        let shared = capacity::capacity_of_mask(&shell, &mask, None)?.capacity;
        rows.push(vec![r, matched, shared]);
    }
    let matched: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let (lo, hi) = matched
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let spread = (hi - lo) / lo;
    if let Some(path) = ctx.file("capacity_scaling.csv") {
        report::write_table_csv(&path, &["r", "capacity_matched", "capacity_shared_grid"], &rows)?;
    }
    ctx.report.add_result("scaling", &rows)?;
    ctx.report.check(
        "cap0(B_r; B_2r) constant in r",
        Some(8),
        spread <= 0.03,
        spread,
        "relative spread <= 3%",
        format!("r in {{0.1, 0.2, 0.4}}: {matched:?}"),
    );
    let shared: Vec<f64> = rows.iter().map(|r| r[2]).collect();
    let (lo, hi) = shared
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let rel = matched[0] / exact - 1.0;
    ctx.report.check(
        "matched-resolution value against 2 pi / ln 2",
        None,
        rel.abs() <= 0.02,
        rel,
        "relative error <= 2%",
        format!("sub-grid {}", capacity::DEFAULT_SUB_RESOLUTION),
    );
    ctx.report.check(
        "cap0(B_r; B_2r) spread on one shared lattice",
        None,
        (hi - lo) / lo <= 0.05,
        (hi - lo) / lo,
        "<= 5% (small shells are under-resolved)",
        format!("{shared:?}"),
    );
    Ok(())
}

fn frequency_monotonicity(ctx: &mut Ctx) -> Result<()> {
    let grid = ctx.grid()?;
    let cases: [(&str, ObstacleRegion, BoundaryData); 3] = [
        ("halfline", ObstacleRegion::HalfLine, h_half()),
        ("generic", ObstacleRegion::HalfLine, BoundaryData::CosTheta(0.3)),
        (
            "cantor",
            ObstacleRegion::CantorLine {
                level: crate::domain::DEFAULT_CANTOR_LEVEL,
            },
            h_half(),
        ),
    ];
    let mut first_csv = None;
    for (tag, region, data) in cases {
        let p = zero_obstacle(&grid, &region, data)?;
        let u = ctx.obstacle_solve(&format!("{tag} problem"), &p)?;
        let radii = profile_radii(ctx, &u);
        let profile = diagnostics::frequency_profile(&u, ORIGIN, &radii)?;
        ctx.frequency_outputs(tag, &profile)?;
        let n_drop = profile.worst_n_drop();
        ctx.report.check(
            &format!("N(r) nondecreasing, {tag}"),
            Some(4),
            n_drop <= 5e-3,
            n_drop,
            "largest drop <= 5e-3",
            format!("{} radii", profile.len()),
        );
        let beta_end = *profile.beta.last().unwrap_or(&0.0);
        let b_drop = profile.worst_beta_drop();
        ctx.report.check(
            &format!("beta(r) nondecreasing, {tag}"),
            Some(5),
            b_drop <= 5e-3 * beta_end,
            b_drop,
            format!("largest drop <= 5e-3 beta(r_max) = {:.3e}", 5e-3 * beta_end),
            "",
        );
        if first_csv.is_none() {
            first_csv = Some((p, profile.csv_bytes()?));
        }
    }

    // Linear field: beta(r) = pi r.
    let x1 = ScalarField::from_fn(grid.clone(), |x, _| x);
    let radii = profile_radii(ctx, &x1);
    let worst = radii
        .iter()
        .map(|&r| diagnostics::acf_beta(&x1, r).map(|b| (b / (PI * r) - 1.0).abs()))
        .try_fold(0.0, |acc, v| v.map(|v| f64::max(acc, v)))?;
    ctx.report.check(
        "beta(r) = pi r for u = x1",
        Some(5),
        worst <= 0.02,
        worst,
        "relative error <= 2%",
        "",
    );

    for kappa in [0.5, 1.0, 1.5, 2.0] {
        let f = ScalarField::from_fn(grid.clone(), ClosedForm::homogeneous(kappa, Sign::Plus)?.eval_fn());
        let profile = diagnostics::frequency_profile(&f, ORIGIN, &profile_radii(ctx, &f))?;
        let n: Vec<f64> = profile.n.iter().flatten().copied().collect();
        let sd = diagnostics::stdev(&n);
        ctx.report.check(
            &format!("N(r) constant for homogeneous kappa = {kappa}"),
            Some(7),
            sd <= 1e-2 && n.len() == profile.len(),
            sd,
            "stdev <= 1e-2",
            format!("mean {:.4}", n.iter().sum::<f64>() / n.len() as f64),
        );
    }

    // Determinism: a fresh solve reproduces the profile byte for byte.
    let (p, bytes) = first_csv.expect("three cases");
    let params = ctx.params(&grid);
    let (again, _) = solve_obstacle(&p.problem, params)?;
    let repeat = diagnostics::frequency_profile(&again, ORIGIN, &profile_radii(ctx, &again))?.csv_bytes()?;
    ctx.report.check(
        "repeat run gives byte-identical CSV",
        Some(14),
        repeat == bytes,
        if repeat == bytes { 0.0 } else { 1.0 },
        "identical bytes",
        format!("{} bytes", bytes.len()),
    );
    Ok(())
}

fn rellich_check(ctx: &mut Ctx) -> Result<()> {
    let grid = ctx.grid()?;
    let p = zero_obstacle(&grid, &ObstacleRegion::HalfLine, h_half())?;
    let u = ctx.obstacle_solve("halfline h_1/2 data", &p)?;
    let lo = 0.1f64.max(8.0 * grid.h());
    let radii: Vec<f64> = (0..9).map(|k| lo + (0.5 - lo) * k as f64 / 8.0).collect();
    let mut rows = Vec::new();
    let (mut worst_r, mut worst_g) = (0.0f64, 0.0f64);
    for &r in &radii {
        let rd = diagnostics::rellich_defect(&u, r)?;
        let gd = diagnostics::green_defect(&u, r)?;
        worst_r = worst_r.max(rd.abs());
        worst_g = worst_g.max(gd.abs());
        rows.push(vec![r, rd, gd]);
    }
    if let Some(path) = ctx.file("rellich.csv") {
        report::write_table_csv(&path, &["r", "rellich_defect", "green_defect"], &rows)?;
    }
    ctx.report.add_result("defects", &rows)?;
    ctx.report.check(
        "Rellich defect on the solved problem",
        Some(6),
        worst_r <= 5e-2,
        worst_r,
        "<= 5e-2 for r in [0.1, 0.5]",
        "",
    );
    ctx.report.check(
        "Green defect on the solved problem",
        None,
        worst_g <= 5e-2,
        worst_g,
        "<= 5e-2 for r in [0.1, 0.5]",
        "",
    );
    for kappa in [0.5, 2.0] {
        let f = ScalarField::from_fn(grid.clone(), ClosedForm::homogeneous(kappa, Sign::Plus)?.eval_fn());
        let worst = radii
            .iter()
            .map(|&r| diagnostics::rellich_defect(&f, r).map(f64::abs))
            .try_fold(0.0, |acc, v| v.map(|v| f64::max(acc, v)))?;
        ctx.report.check(
            &format!("Rellich defect of exact kappa = {kappa}"),
            Some(6),
            worst <= 1e-3,
            worst,
            "<= 1e-3",
            "",
        );
    }
    let control = ScalarField::from_fn(grid.clone(), |x, _| x * x);
    let d = diagnostics::rellich_defect(&control, 0.3)?;
    ctx.report.check(
        "negative control u = x1^2 shows a defect",
        None,
        d.abs() > 0.1,
        d,
        "|defect| > 0.1 (exact -1/2)",
        "",
    );
    Ok(())
}

fn mixed_bvp_barrier(ctx: &mut Ctx) -> Result<()> {
    let grid = ctx.grid()?;
    let params = ctx.params(&grid);
    let exact = ClosedForm::MixedExact;
    let data = ScalarField::from_fn(grid.clone(), exact.eval_fn());
    let (v, rep) = ctx
        .timings
        .time("mixed exact", || solve_mixed_bvp(&MixedBvp::new(data, None)?, params))?;
    ctx.record_solve("mixed exact", rep, &grid, params);
    let err = max_error(&v, exact.eval_fn(), 1.0);
    ctx.report.check(
        "mixed problem recovers r^1/2 cos(theta/2)",
        Some(11),
        err <= 3e-2,
        err,
        "max-norm <= 3e-2",
        "",
    );
    ctx.heatmap("v_mixed_exact.svg", &v, None, "mixed problem, exact data")?;

    let eps = 0.05;
    let barrier = ClosedForm::barrier(eps)?;
    let data = ScalarField::from_fn(grid.clone(), barrier.eval_fn());
    let source = ScalarField::from_fn(grid.clone(), |x, y| ClosedForm::barrier_source(eps, x, y));
    let (w, rep) = ctx.timings.time("mixed barrier", || {
        solve_mixed_bvp(&MixedBvp::new(data, Some(source))?, params)
    })?;
    ctx.record_solve("mixed barrier", rep, &grid, params);
    let radii = fit_radii(&grid, 8.0 * grid.h(), 0.5);
    let sups = radii
        .iter()
        .map(|&r| sup_on_circle(&w, r))
        .collect::<Result<Vec<f64>>>()?;
    let fit = diagnostics::power_law_fit(&radii, &sups)?;
    let target = 0.5 - eps;
    let c_hat = radii
        .iter()
        .zip(&sups)
        .map(|(r, s)| s / r.powf(target))
        .fold(0.0, f64::max);
    if let Some(path) = ctx.file("barrier_sup.csv") {
        fit.write_csv(&path)?;
    }
    ctx.report.add_result("barrier_fit", &fit)?;
    ctx.report.add_result("barrier_constant", c_hat)?;
    ctx.report.check(
        "sup on circles grows like r^0.45",
        Some(11),
        fit.exponent >= target - 0.02,
        fit.exponent,
        format!(">= {:.2} (bound C r^{target})", target - 0.02),
        format!("C = {c_hat:.4}, max error vs barrier {:.3e}", max_error(&w, barrier.eval_fn(), 1.0)),
    );
    Ok(())
}

fn extension_equivalence(ctx: &mut Ctx) -> Result<()> {
    let grid = ctx.grid()?;
    let params = ctx.params(&grid);
    let p = zero_obstacle(&grid, &ObstacleRegion::HalfLine, h_half())?;
    let u = ctx.obstacle_solve("halfline h_1/2 data", &p)?;
    let cutoff = Cutoff::default();
    let (psi_bar, rep) = ctx
        .timings
        .time("extension", || extend_obstacle(&u, cutoff, params))?;
    ctx.record_solve("extension", rep, &grid, params);

    let above = comparison_check(&psi_bar, &u)?;
    ctx.report.check(
        "extended obstacle lies below u",
        None,
        above <= 1e-8,
        above,
        "max(psi_bar - u) <= 1e-8",
        "",
    );
    let contact = diagnostics::contact_set(&u, &p.psi, &p.region);
    let on_contact = contact
        .indices()
        .filter(|&k| {
            let (x, y) = grid.coords(k);
            x.hypot(y) <= cutoff.inner
        })
        .map(|k| (psi_bar.at(k) - u.at(k)).abs())
        .fold(0.0, f64::max);
    ctx.report.check(
        "extended obstacle meets u on the contact set in B_3/4",
        None,
        on_contact <= 1e-8,
        on_contact,
        "<= 1e-8",
        "",
    );

    let sub = Grid::with_radius(grid.spec(), cutoff.inner)?;
    let region = sub.interior_mask().clone();
    let boundary = ScalarField::from_values(sub.clone(), u.values().to_vec())?;
    let obstacle = ScalarField::from_values(
        sub.clone(),
        psi_bar
            .values()
            .iter()
            .enumerate()
            .map(|(k, &v)| if region.get(k) { v } else { NO_OBSTACLE })
            .collect(),
    )?;
    let classical = ObstacleProblem::new(boundary, region, obstacle)?;
    let sub_params = SolverParams::for_grid(&sub);
    let sub_params = SolverParams {
        omega: params.omega,
        tol: params.tol,
        max_iter: sub_params.max_iter,
    };
    let (w, rep) = ctx
        .timings
        .time("classical on B_3/4", || solve_obstacle(&classical, sub_params))?;
    ctx.record_solve("classical on B_3/4", rep, &sub, sub_params);
    let diff = (0..sub.len())
        .filter(|&k| sub.is_active(k))
        .map(|k| (w.at(k) - u.at(k)).abs())
        .fold(0.0, f64::max);
    ctx.report.check(
        "classical obstacle problem with the extension reproduces u",
        Some(12),
        diff <= 1e-2,
        diff,
        "max-norm <= 1e-2",
        "",
    );
    ctx.heatmap("psi_bar.svg", &psi_bar, None, "extended obstacle")?;
    Ok(())
}

fn jump_obstacle(ctx: &mut Ctx) -> Result<()> {
    let grid = ctx.grid()?;
    let data = ctx.cfg.boundary_or(BoundaryData::Jump(1.2))?;
    let BoundaryData::Jump(c) = data else {
        return Err(config("jump-obstacle needs boundary data of the form jump(c)"));
    };
    let p = problem(&grid, &ObstacleRegion::FullLine, data, |x, _| {
        if x <= 0.0 {
            1.0
        } else {
            0.0
        }
    })?;
    let u = ctx.obstacle_solve("jump obstacle", &p)?;
    let q = zero_obstacle(&grid, &ObstacleRegion::HalfLine, BoundaryData::Form(ClosedForm::HAlpha(0.5)))?;
    // Data g − 1 = c h_{1/2}.
    let boundary = ScalarField::from_fn(grid.clone(), move |x, y| c * ClosedForm::HAlpha(0.5).evaluate(x, y));
    let zero = ObstacleProblem::new(boundary, q.region.clone(), q.psi.clone())?;
    let params = ctx.params(&grid);
    let (v, rep) = ctx.timings.time("zero obstacle", || solve_obstacle(&zero, params))?;
    ctx.record_solve("zero obstacle", rep, &grid, params);

    let v1 = shifted(&v, -1.0)?;
    let diff = (0..grid.len())
        .filter(|&k| grid.is_active(k))
        .filter(|&k| {
            let (x, y) = grid.coords(k);
            x.hypot(y) <= 0.1
        })
        .map(|k| (u.at(k) - v1.at(k)).abs())
        .fold(0.0, f64::max);
    let bound = 10.0 * grid.h().sqrt();
    ctx.report.check(
        "u equals 1 + v near the jump",
        Some(13),
        diff <= bound,
        diff,
        format!("<= 10 h^1/2 = {bound:.4}"),
        "max over B_0.1",
    );
    let fit = holder_at_origin(&shifted(&u, 1.0)?)?;
    ctx.holder_outputs("jump", &fit)?;
    ctx.report.check(
        "Hoelder exponent of u - 1 at the jump",
        Some(13),
        (fit.exponent - 0.5).abs() <= 0.05,
        fit.exponent,
        "0.50 +- 0.05",
        "",
    );
    let contact = diagnostics::contact_set(&u, &p.psi, &p.region);
    ctx.report.add_result("contact_nodes", contact.count())?;
    ctx.heatmap("u_jump.svg", &u, Some(&contact), "u, jump obstacle")?;
    Ok(())
}

fn isolated_contact(ctx: &mut Ctx) -> Result<()> {
    let grid = ctx.grid()?;
    let p = zero_obstacle(&grid, &ObstacleRegion::HalfLine, BoundaryData::Isolated)?;
    let u = ctx.obstacle_solve("isolated contact", &p)?;
    let radii = profile_radii(ctx, &u);
    let profile = diagnostics::frequency_profile(&u, ORIGIN, &radii)?;
    ctx.frequency_outputs("isolated", &profile)?;
    let kappa = blowup::kappa_from_frequency(&profile)?;
    let nearest_even = (kappa / 2.0).round().max(1.0) * 2.0;
    ctx.report.check(
        "frequency at the origin is even",
        None,
        (kappa - nearest_even).abs() <= 0.1 && nearest_even <= blowup::KAPPA_MAX,
        kappa,
        "in {2, 4, 6} +- 0.1",
        "",
    );
    let (analysis, resc) = blowup::analyze(&u)?;
    let res = &analysis.result;
    ctx.report.check(
        "blowup falls on the even branch",
        None,
        res.branch == Some(Branch::EvenInteger),
        res.kappa_admissible.unwrap_or(f64::NAN),
        "even integer",
        blowup_summary(res),
    );
    ctx.report.add_result("blowup", &analysis)?;
    ctx.report.add_result(
        "contact_nodes",
        diagnostics::contact_set(&u, &p.psi, &p.region).count(),
    )?;
    if let Some(path) = ctx.file("blowup_profile.csv") {
        blowup::write_profile_csv(&resc.field, res, &path)?;
    }
    Ok(())
}

fn single_problem(ctx: &mut Ctx, cmd: Command) -> Result<()> {
    let grid = ctx.grid()?;
    let region = ctx.cfg.region_or(ObstacleRegion::HalfLine)?;
    let data = ctx.cfg.boundary_or(h_half())?;
    let p = zero_obstacle(&grid, &region, data)?;
    let u = ctx.obstacle_solve("u", &p)?;
    let contact = diagnostics::contact_set(&u, &p.psi, &p.region);
    ctx.report.add_result("contact_nodes", contact.count())?;
    match cmd {
        Command::Solve => {
            if let Some(path) = ctx.file("u.csv") {
                report::write_field_csv(&u, &path)?;
            }
            ctx.heatmap("u.svg", &u, Some(&contact), "u")?;
        }
        Command::Capacity => {
            let lo = ctx.cfg.r_min.unwrap_or(capacity::MIN_RADIUS_SPACINGS * grid.h());
            let hi = ctx.cfg.r_max.unwrap_or(0.4);
            let count = ctx.cfg.radii_count.unwrap_or(5);
            let radii = diagnostics::log_radii(lo, hi, count);
            let params = CapacityParams {
                sub_resolution: ctx.cfg.sub_resolution.unwrap_or(capacity::DEFAULT_SUB_RESOLUTION),
                solver: None,
            };
            let cdc = ctx.timings.time("capacities", || {
                capacity::cdc_profile(&grid, &contact, ORIGIN, &radii, params)
            })?;
            let mazya = capacity::mazya_from_profile(&u, &cdc);
            if let Some(path) = ctx.file("cdc.csv") {
                cdc.write_csv(&path)?;
            }
            if let Some(path) = ctx.file("mazya.csv") {
                mazya.write_csv(&path)?;
            }
            let c0 = cdc.lower_bound().unwrap_or(0.0);
            ctx.report.add_result("cdc", &cdc)?;
            ctx.report.add_result("mazya", &mazya)?;
            ctx.report.check("capacity density bounded below", None, c0 > 0.0, c0, "> 0", "");
        }
        Command::Frequency => {
            let radii = profile_radii(ctx, &u);
            let profile = diagnostics::frequency_profile(&u, ORIGIN, &radii)?;
            ctx.frequency_outputs("origin", &profile)?;
            let fit = holder_at_origin(&u)?;
            ctx.holder_outputs("origin", &fit)?;
            ctx.report.add_result("holder_fit", &fit)?;
            let n_drop = profile.worst_n_drop();
            ctx.report.check("N(r) nondecreasing", None, n_drop <= 5e-3, n_drop, "<= 5e-3", "");
            let beta_end = *profile.beta.last().unwrap_or(&0.0);
            let b_drop = profile.worst_beta_drop();
            ctx.report.check(
                "beta(r) nondecreasing",
                None,
                b_drop <= 5e-3 * beta_end,
                b_drop,
                format!("<= {:.3e}", 5e-3 * beta_end),
                "",
            );
        }
        Command::Blowup => {
            let (analysis, resc) = blowup::analyze(&u)?;
            let res = &analysis.result;
            ctx.report.check(
                "blowup classified",
                None,
                res.classified,
                res.profile_residual,
                format!("residual <= {}", blowup::UNCLASSIFIED_RESIDUAL),
                blowup_summary(res),
            );
            ctx.report.add_result("blowup", &analysis)?;
            if let Some(path) = ctx.file("blowup_profile.csv") {
                blowup::write_profile_csv(&resc.field, res, &path)?;
            }
        }
    }
    Ok(())
}

/// Single obstacle solve from a configuration (region and boundary data
/// default to the half-line and `h_{1/2}`).
pub struct Solved {
    pub u: ScalarField,
    pub psi: ScalarField,
    pub region: Mask,
    pub report: SolveReport,
}

pub fn solve_from_config(cfg: &ExperimentConfig) -> Result<Solved> {
    cfg.validate()?;
    let grid = cfg.grid(DEFAULT_RESOLUTION)?;
    let region = cfg.region_or(ObstacleRegion::HalfLine)?;
    let data = cfg.boundary_or(h_half())?;
    let p = zero_obstacle(&grid, &region, data)?;
    let (u, report) = solve_obstacle(&p.problem, cfg.solver_params(&grid))?;
    Ok(Solved {
        u,
        psi: p.psi,
        region: p.region,
        report,
    })
}

/// Run every entry of a batch concurrently, each in `out/<dir>`. Results
/// come back in batch order.
pub fn run_batch(
    batch: &crate::config::Batch,
    out: Option<&Path>,
) -> Vec<(String, Result<RunOutput>)> {
    std::thread::scope(|s| {
        let handles: Vec<_> = batch
            .runs
            .iter()
            .map(|(dir, cfg)| {
                let target = out.map(|o| o.join(dir));
                s.spawn(move || {
                    let name = cfg.experiment.as_deref().unwrap_or_default();
                    run(name, cfg, target.as_deref())
                })
            })
            .collect();
        batch
            .runs
            .iter()
            .zip(handles)
            .map(|((dir, _), h)| {
                let r = h
                    .join()
                    .unwrap_or_else(|_| Err(config(format!("run '{dir}' panicked"))));
                (dir.clone(), r)
            })
            .collect()
    })
}
