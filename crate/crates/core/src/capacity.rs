//! Relative 0-capacity of condensers, the capacity density profile and the
//! Maz'ya growth ratio.
//!
//! A condenser `A` is a union of points, segments and disks in physical
//! coordinates. `cap₀(A; B_R(c))` is computed on a dedicated sub-grid of the
//! unit disk after mapping `x ↦ (x − c)/R`; the Dirichlet integral is scale
//! invariant in two dimensions, so no rescaling of the energy is needed.

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, Point};
use crate::domain::{Grid, GridSpec, Mask, ScalarField};
use crate::error::{config, Error, Result};
use crate::solver::{obstacle_field, solve_obstacle, ObstacleProblem, SolveReport, SolverParams};

pub const DEFAULT_SUB_RESOLUTION: usize = 257;

/// Radii below this many global spacings are flagged unreliable.
pub const MIN_RADIUS_SPACINGS: f64 = 4.0;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Condenser {
    pub points: Vec<Point>,
    pub segments: Vec<(Point, Point)>,
    pub disks: Vec<(Point, f64)>,
}

impl Condenser {
    pub fn disk(center: Point, radius: f64) -> Self {
        Self {
            disks: vec![(center, radius)],
            ..Self::default()
        }
    }

    pub fn point(p: Point) -> Self {
        Self {
            points: vec![p],
            ..Self::default()
        }
    }

    pub fn segment(a: Point, b: Point) -> Self {
        Self {
            segments: vec![(a, b)],
            ..Self::default()
        }
    }

    /// Node set of `grid` as geometry: every node is a point and every pair
    /// of 4-adjacent nodes spans a segment. Lines of nodes become polylines;
    /// isolated nodes stay points.
    pub fn from_mask(grid: &Grid, mask: &Mask) -> Self {
        let n = grid.n();
        let mut c = Self::default();
        for k in mask.indices() {
            let p = grid.coords(k);
            let (i, j) = grid.ij(k);
            let mut linked = false;
            if i + 1 < n && mask.get(k + 1) {
                c.segments.push((p, grid.coords(k + 1)));
                linked = true;
            }
            if j + 1 < n && mask.get(k + n) {
                c.segments.push((p, grid.coords(k + n)));
                linked = true;
            }
            let linked_before = (i > 0 && mask.get(k - 1)) || (j > 0 && mask.get(k - n));
            if !linked && !linked_before {
                c.points.push(p);
            }
        }
        c
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty() && self.segments.is_empty() && self.disks.is_empty()
    }

    fn mapped(&self, center: Point, scale: f64) -> Self {
        let m = |p: Point| ((p.0 - center.0) / scale, (p.1 - center.1) / scale);
        Self {
            points: self.points.iter().map(|&p| m(p)).collect(),
            segments: self.segments.iter().map(|&(a, b)| (m(a), m(b))).collect(),
            disks: self.disks.iter().map(|&(c, r)| (m(c), r / scale)).collect(),
        }
    }

    /// Nodes of `grid` covered by the condenser, optionally restricted to
    /// `|x| ≤ clip`. Segments take nodes within `h/2`, disks their closed
    /// interior, points their nearest node.
    pub fn rasterize(&self, grid: &Grid, clip: Option<f64>) -> Mask {
        let h = grid.h();
        let slack = 1e-9 * h;
        let keep = |k: usize| {
            let (x, y) = grid.coords(k);
            clip.is_none_or(|c| x.hypot(y) <= c + slack)
        };
        let mut mask = Mask::empty(grid.len());
        for &p in &self.points {
            if let Some(k) = grid.nearest_node(p.0, p.1) {
                if keep(k) {
                    mask.set(k, true);
                }
            }
        }
        for &(a, b) in &self.segments {
            let reach = 0.5 * h + slack;
            for k in nodes_in_box(grid, a.0.min(b.0) - reach, a.0.max(b.0) + reach, a.1.min(b.1) - reach, a.1.max(b.1) + reach) {
                if keep(k) && segment_distance(grid.coords(k), a, b) <= reach {
                    mask.set(k, true);
                }
            }
        }
        for &(c, r) in &self.disks {
            let reach = r + slack;
            for k in nodes_in_box(grid, c.0 - reach, c.0 + reach, c.1 - reach, c.1 + reach) {
                let (x, y) = grid.coords(k);
                if keep(k) && (x - c.0).hypot(y - c.1) <= reach {
                    mask.set(k, true);
                }
            }
        }
        mask
    }
}

fn nodes_in_box(grid: &Grid, x0: f64, x1: f64, y0: f64, y1: f64) -> impl Iterator<Item = usize> + '_ {
    let h = grid.h();
    let n = grid.n() as isize;
    let c = grid.center() as f64;
    let lo = |v: f64| ((v / h + c).floor() as isize).clamp(0, n - 1) as usize;
    let hi = |v: f64| ((v / h + c).ceil() as isize).clamp(0, n - 1) as usize;
    let (i0, i1, j0, j1) = (lo(x0), hi(x1), lo(y0), hi(y1));
    (j0..=j1).flat_map(move |j| (i0..=i1).map(move |i| grid.index(i, j)))
}

fn segment_distance(p: Point, a: Point, b: Point) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    (p.0 - a.0 - t * dx).hypot(p.1 - a.1 - t * dy)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityParams {
    /// Nodes per axis of the sub-grid spanning the shell.
    pub sub_resolution: usize,
    /// Defaults to [`SolverParams::for_grid`] on the sub-grid.
    pub solver: Option<SolverParams>,
}

impl Default for CapacityParams {
    fn default() -> Self {
        Self {
            sub_resolution: DEFAULT_SUB_RESOLUTION,
            solver: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityQuery {
    pub condenser: Condenser,
    /// Shell `B = B_radius(center)`.
    pub center: Point,
    pub radius: f64,
    /// Keep only the part of the condenser within this distance of `center`.
    pub clip: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityResult {
    pub capacity: f64,
    /// Condenser nodes on the sub-grid.
    pub nodes: usize,
    /// Set when the condenser has no nodes; the capacity is then 0.
    pub empty: bool,
    pub solve: Option<SolveReport>,
}

/// `Σ_edges (v_a − v_b)²` of the minimizer with `v = 0` on the sub-disk's
/// Dirichlet layer and `v ≥ 1` on the condenser.
pub fn capacity0(query: &CapacityQuery, params: CapacityParams) -> Result<CapacityResult> {
    if !(query.radius > 0.0) {
        return Err(config(format!("shell radius {} must be positive", query.radius)));
    }
    let grid = Grid::build(GridSpec::new(params.sub_resolution)?)?;
    let local = query.condenser.mapped(query.center, query.radius);
    let mask = local.rasterize(&grid, query.clip.map(|c| c / query.radius));
    capacity_of_mask(&grid, &mask, params.solver)
}

/// Capacity of a node set of `grid` relative to the grid's own disk.
pub fn capacity_of_mask(
    grid: &Arc<Grid>,
    mask: &Mask,
    solver: Option<SolverParams>,
) -> Result<CapacityResult> {
    if mask.count() == 0 {
        return Ok(CapacityResult {
            capacity: 0.0,
            nodes: 0,
            empty: true,
            solve: None,
        });
    }
    if let Some(k) = mask
        .indices()
        .find(|&k| !grid.is_interior(k) || grid.touches_dirichlet(k))
    {
        let (x, y) = grid.coords(k);
        return Err(config(format!(
            "condenser touches the shell boundary layer at ({x:.4}, {y:.4}) in shell coordinates"
        )));
    }
    let boundary = ScalarField::zeros(grid.clone());
    let psi = obstacle_field(grid, mask, |_, _| 1.0);
    let problem = ObstacleProblem::new(boundary, mask.clone(), psi)?;
    let params = solver.unwrap_or_else(|| SolverParams::for_grid(grid));
    let (_, report) = solve_obstacle(&problem, params)?;
    Ok(CapacityResult {
        capacity: report.energy,
        nodes: mask.count(),
        empty: false,
        solve: Some(report),
    })
}

fn check_ball(grid: &Grid, x0: Point, r: f64) -> Result<()> {
    let dist = grid.radius() - x0.0.hypot(x0.1);
    if !(r > 0.0 && 2.0 * r < dist) {
        return Err(Error::OutOfRange(format!(
            "radius {r}: need 0 < 2r < dist(x0, boundary) = {dist}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdcRow {
    pub r: f64,
    pub capacity: f64,
    /// Running minimum of the reliable capacities up to this radius.
    pub c0: f64,
    pub reliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdcProfile {
    pub x0: Point,
    pub rows: Vec<CdcRow>,
}

impl CdcProfile {
    /// Smallest capacity over reliable radii (`None` if there are none).
    pub fn lower_bound(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.reliable)
            .map(|r| r.capacity)
            .reduce(f64::min)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["r", "capacity", "c0", "reliable"])?;
        for row in &self.rows {
            w.write_record([
                row.r.to_string(),
                row.capacity.to_string(),
                row.c0.to_string(),
                row.reliable.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `cap₀(Λ ∩ B_r(x₀); B_{2r}(x₀))` for each radius. Radii below `4h` of the
/// global grid are computed but flagged unreliable and kept out of `c₀`.
pub fn cdc_profile(
    grid: &Arc<Grid>,
    contact: &Mask,
    x0: Point,
    radii: &[f64],
    params: CapacityParams,
) -> Result<CdcProfile> {
    for &r in radii {
        check_ball(grid, x0, r)?;
    }
    let condenser = Condenser::from_mask(grid, contact);
    let caps: Vec<f64> = radii
        .par_iter()
        .map(|&r| {
            let q = CapacityQuery {
                condenser: condenser.clone(),
                center: x0,
                radius: 2.0 * r,
                clip: Some(r),
            };
            capacity0(&q, params).map(|c| c.capacity)
        })
        .collect::<Result<_>>()?;
    let min_r = MIN_RADIUS_SPACINGS * grid.h();
    let mut running = f64::INFINITY;
    let rows = radii
        .iter()
        .zip(caps)
        .map(|(&r, capacity)| {
            let reliable = r >= min_r;
            if reliable {
                running = running.min(capacity);
            }
            CdcRow {
                r,
                capacity,
                c0: running,
                reliable,
            }
        })
        .collect();
    Ok(CdcProfile { x0, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MazyaRow {
    pub r: f64,
    /// `sup_{B_{r/2}(x₀)} |u|`.
    pub sup: f64,
    pub capacity: f64,
    /// `sup · cap^{1/2} / r^{1/2}`; `None` when the contact set misses `B_r`.
    pub ratio: Option<f64>,
    pub reliable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MazyaProfile {
    pub x0: Point,
    pub rows: Vec<MazyaRow>,
}

impl MazyaProfile {
    /// Least-squares slope of `log ratio` against `log r` over reliable rows
    /// with a positive ratio; `None` with fewer than two such rows.
    pub fn log_slope(&self) -> Option<f64> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .rows
            .iter()
            .filter(|row| row.reliable)
            .filter_map(|row| row.ratio.filter(|v| *v > 0.0).map(|v| (row.r.ln(), v.ln())))
            .unzip();
        (xs.len() >= 2).then(|| diagnostics::linear_fit(&xs, &ys).0)
    }

    pub fn max_ratio(&self) -> Option<f64> {
        self.rows
            .iter()
            .filter(|r| r.reliable)
            .filter_map(|r| r.ratio)
            .reduce(f64::max)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["r", "sup", "capacity", "ratio", "reliable"])?;
        for row in &self.rows {
            w.write_record([
                row.r.to_string(),
                row.sup.to_string(),
                row.capacity.to_string(),
                row.ratio.map_or_else(String::new, |v| v.to_string()),
                row.reliable.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Growth ratio `sup_{B_{r/2}}|u| · cap₀(Λ(u) ∩ B_r; B_{2r})^{1/2} / r^{1/2}`
/// with `Λ(u)` the contact set of `u` on `region`.
pub fn mazya_ratio(
    u: &ScalarField,
    psi: &ScalarField,
    region: &Mask,
    x0: Point,
    radii: &[f64],
    params: CapacityParams,
) -> Result<MazyaProfile> {
    u.check_same_grid(psi)?;
    let contact = diagnostics::contact_set(u, psi, region);
    let profile = cdc_profile(u.grid(), &contact, x0, radii, params)?;
    Ok(mazya_from_profile(u, &profile))
}

/// Growth ratios from an already computed capacity profile of `Λ(u)`.
pub fn mazya_from_profile(u: &ScalarField, profile: &CdcProfile) -> MazyaProfile {
    let x0 = profile.x0;
    let rows = profile
        .rows
        .iter()
        .map(|row| {
            let sup = diagnostics::sup_abs_in_ball(u, x0, 0.5 * row.r);
            let ratio = (row.capacity > 0.0).then(|| sup * row.capacity.sqrt() / row.r.sqrt());
            MazyaRow {
                r: row.r,
                sup,
                capacity: row.capacity,
                ratio,
                reliable: row.reliable,
            }
        })
        .collect();
    MazyaProfile { x0, rows }
}
