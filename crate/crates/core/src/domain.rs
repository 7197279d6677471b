//! Uniform node lattice over `[-1, 1]^2`, disk masks, obstacle regions and
//! node-indexed scalar fields.
//!
//! Nodes are indexed row-major, `index = j * n + i`, with `i` the column
//! (x₁ direction) and `j` the row (x₂ direction). Coordinates are computed
//! relative to the centre node so that mirror-image nodes carry exactly
//! negated coordinates and the origin is exactly zero.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};

/// Smallest admissible number of nodes per axis.
pub const MIN_RESOLUTION: usize = 33;

/// Default truncation level of the Cantor prefractal.
pub const DEFAULT_CANTOR_LEVEL: u32 = 5;

/// The Cantor prefractal is built on this segment of the x₁-axis.
pub const CANTOR_SEGMENT: (f64, f64) = (-0.75, -0.25);

const COORD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    resolution: usize,
    half_width: f64,
}

impl GridSpec {
    pub fn new(resolution: usize) -> Result<Self> {
        if resolution < MIN_RESOLUTION {
            return Err(config(format!(
                "grid resolution {resolution} is below the minimum {MIN_RESOLUTION}"
            )));
        }
        if resolution.is_multiple_of(2) {
            return Err(config(format!(
                "grid resolution {resolution} must be odd so the origin is a node"
            )));
        }
        Ok(Self {
            resolution,
            half_width: 1.0,
        })
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / (self.resolution - 1) as f64
    }
}

/// Boolean per-node set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask(Vec<bool>);

impl Mask {
    pub fn empty(len: usize) -> Self {
        Self(vec![false; len])
    }

    pub fn from_vec(bits: Vec<bool>) -> Self {
        Self(bits)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn get(&self, idx: usize) -> bool {
        self.0[idx]
    }

    pub fn set(&mut self, idx: usize, value: bool) {
        self.0[idx] = value;
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|b| **b).count()
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(k, b)| b.then_some(k))
    }

    pub fn is_subset_of(&self, other: &Mask) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| !*a || *b)
    }

    pub fn intersection(&self, other: &Mask) -> Mask {
        Mask(self.0.iter().zip(&other.0).map(|(a, b)| *a && *b).collect())
    }

    pub fn as_slice(&self) -> &[bool] {
        &self.0
    }
}

/// Node counts of the three-way partition produced by [`Grid::build`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildReport {
    pub interior: usize,
    pub dirichlet: usize,
    pub exterior: usize,
}

/// The lattice of a [`GridSpec`] together with the masks of a centred disk.
///
/// Interior nodes satisfy `|x| < radius - h/2`; Dirichlet nodes are the
/// remaining nodes with at least one interior 4-neighbour.
#[derive(Debug, Clone)]
pub struct Grid {
    spec: GridSpec,
    radius: f64,
    interior: Mask,
    dirichlet: Mask,
    report: BuildReport,
}

impl Grid {
    /// Grid of the unit disk.
    pub fn build(spec: GridSpec) -> Result<Arc<Grid>> {
        Self::with_radius(spec, 1.0)
    }

    /// Same lattice, disk of the given radius (used for sub-disks such as
    /// `B_{3/4}`).
    pub fn with_radius(spec: GridSpec, radius: f64) -> Result<Arc<Grid>> {
        let h = spec.spacing();
        if !(radius > 2.0 * h && radius <= spec.half_width()) {
            return Err(config(format!(
                "disk radius {radius} must lie in ({}, {}]",
                2.0 * h,
                spec.half_width()
            )));
        }
        let n = spec.resolution();
        let c = ((n - 1) / 2) as f64;
        let limit = radius - 0.5 * h;
        let mut interior = Mask::empty(n * n);
        for j in 0..n {
            for i in 0..n {
                let x = (i as f64 - c) * h;
                let y = (j as f64 - c) * h;
                if x.hypot(y) < limit {
                    interior.set(j * n + i, true);
                }
            }
        }
        let mut dirichlet = Mask::empty(n * n);
        for j in 0..n {
            for i in 0..n {
                let k = j * n + i;
                if interior.get(k) {
                    continue;
                }
                let touches = (i > 0 && interior.get(k - 1))
                    || (i + 1 < n && interior.get(k + 1))
                    || (j > 0 && interior.get(k - n))
                    || (j + 1 < n && interior.get(k + n));
                if touches {
                    dirichlet.set(k, true);
                }
            }
        }
        let report = BuildReport {
            interior: interior.count(),
            dirichlet: dirichlet.count(),
            exterior: n * n - interior.count() - dirichlet.count(),
        };
        Ok(Arc::new(Grid {
            spec,
            radius,
            interior,
            dirichlet,
            report,
        }))
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }

    /// Nodes per axis.
    pub fn n(&self) -> usize {
        self.spec.resolution()
    }

    pub fn h(&self) -> f64 {
        self.spec.spacing()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Total number of lattice nodes.
    pub fn len(&self) -> usize {
        self.n() * self.n()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn report(&self) -> BuildReport {
        self.report
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n() + i
    }

    #[inline]
    pub fn ij(&self, idx: usize) -> (usize, usize) {
        (idx % self.n(), idx / self.n())
    }

    /// Column/row index of the centre node.
    pub fn center(&self) -> usize {
        (self.n() - 1) / 2
    }

    pub fn origin(&self) -> usize {
        let c = self.center();
        self.index(c, c)
    }

    #[inline]
    pub fn axis_coord(&self, i: usize) -> f64 {
        (i as f64 - self.center() as f64) * self.h()
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> (f64, f64) {
        let (i, j) = self.ij(idx);
        (self.axis_coord(i), self.axis_coord(j))
    }

    /// Node located exactly (up to round-off) at `(x, y)`.
    pub fn node_at(&self, x: f64, y: f64) -> Option<usize> {
        let k = self.nearest_node(x, y)?;
        let (nx, ny) = self.coords(k);
        let tol = 1e-9 * self.h();
        ((nx - x).abs() <= tol && (ny - y).abs() <= tol).then_some(k)
    }

    /// Lattice node nearest to `(x, y)`, if the point lies within the lattice.
    pub fn nearest_node(&self, x: f64, y: f64) -> Option<usize> {
        let c = self.center() as f64;
        let fi = (x / self.h() + c).round();
        let fj = (y / self.h() + c).round();
        let n = self.n() as f64;
        if fi < 0.0 || fj < 0.0 || fi >= n || fj >= n {
            return None;
        }
        Some(self.index(fi as usize, fj as usize))
    }

    /// The 4-neighbours of an interior node (always inside the lattice).
    #[inline]
    pub fn neighbors(&self, idx: usize) -> [usize; 4] {
        let n = self.n();
        [idx - 1, idx + 1, idx - n, idx + n]
    }

    #[inline]
    pub fn is_interior(&self, idx: usize) -> bool {
        self.interior.get(idx)
    }

    #[inline]
    pub fn is_dirichlet(&self, idx: usize) -> bool {
        self.dirichlet.get(idx)
    }

    /// Interior or Dirichlet.
    #[inline]
    pub fn is_active(&self, idx: usize) -> bool {
        self.interior.get(idx) || self.dirichlet.get(idx)
    }

    pub fn interior_mask(&self) -> &Mask {
        &self.interior
    }

    pub fn dirichlet_mask(&self) -> &Mask {
        &self.dirichlet
    }

    /// Interior node adjacent to at least one Dirichlet node.
    pub fn touches_dirichlet(&self, idx: usize) -> bool {
        self.is_interior(idx) && self.neighbors(idx).iter().any(|&m| self.is_dirichlet(m))
    }

    /// Same lattice and disk.
    pub fn same_as(&self, other: &Grid) -> bool {
        self.spec == other.spec && self.radius == other.radius
    }

    /// Same lattice (disks may differ).
    pub fn same_lattice(&self, other: &Grid) -> bool {
        self.spec == other.spec
    }
}

/// Description of the obstacle set `F`.
#[derive(Debug, Clone, PartialEq)]
pub enum ObstacleRegion {
    /// The whole node row `x₂ = 0`.
    FullLine,
    /// `{x₁ ≤ 0, x₂ = 0}`.
    HalfLine,
    /// Closed cone opening to the left: `|θ − π| ≤ half_angle`, plus the origin.
    Cone { half_angle: f64 },
    /// Middle-thirds prefractal of [`CANTOR_SEGMENT`] on `x₂ = 0`.
    CantorLine { level: u32 },
    Explicit(Mask),
}

impl ObstacleRegion {
    pub fn realize(&self, grid: &Grid) -> Result<Mask> {
        let mut mask = Mask::empty(grid.len());
        match self {
            ObstacleRegion::FullLine => {
                for k in grid.interior_mask().indices() {
                    if grid.coords(k).1 == 0.0 {
                        mask.set(k, true);
                    }
                }
            }
            ObstacleRegion::HalfLine => {
                for k in grid.interior_mask().indices() {
                    let (x, y) = grid.coords(k);
                    if y == 0.0 && x <= 0.0 {
                        mask.set(k, true);
                    }
                }
            }
            ObstacleRegion::Cone { half_angle } => {
                if !(0.0..PI).contains(half_angle) {
                    return Err(config(format!(
                        "cone half-angle {half_angle} outside [0, π)"
                    )));
                }
                for k in grid.interior_mask().indices() {
                    let (x, y) = grid.coords(k);
                    let inside = if x == 0.0 && y == 0.0 {
                        true
                    } else {
                        PI - y.abs().atan2(x) <= half_angle + COORD_TOL
                    };
                    if inside {
                        mask.set(k, true);
                    }
                }
            }
            ObstacleRegion::CantorLine { level } => {
                let level = effective_cantor_level(grid, *level);
                let intervals = cantor_intervals(level);
                for k in grid.interior_mask().indices() {
                    let (x, y) = grid.coords(k);
                    if y == 0.0
                        && intervals
                            .iter()
                            .any(|&(a, b)| x >= a - COORD_TOL && x <= b + COORD_TOL)
                    {
                        mask.set(k, true);
                    }
                }
            }
            ObstacleRegion::Explicit(m) => {
                if m.len() != grid.len() {
                    return Err(config(format!(
                        "explicit mask has {} nodes, grid has {}",
                        m.len(),
                        grid.len()
                    )));
                }
                if !m.is_subset_of(grid.interior_mask()) {
                    return Err(config("explicit mask contains non-interior nodes"));
                }
                mask = m.clone();
            }
        }
        Ok(mask)
    }

    /// Parse a descriptor such as `halfline`, `fullline`, `cone(0.785)` or
    /// `cantor(5)`.
    pub fn parse(text: &str) -> Result<Self> {
        let t = text.trim().to_ascii_lowercase();
        let arg = |prefix: &str| -> Option<String> {
            t.strip_prefix(prefix)
                .and_then(|r| r.strip_prefix('('))
                .and_then(|r| r.strip_suffix(')'))
                .map(|s| s.trim().to_string())
        };
        match t.as_str() {
            "fullline" | "full-line" => return Ok(Self::FullLine),
            "halfline" | "half-line" => return Ok(Self::HalfLine),
            "cantor" => {
                return Ok(Self::CantorLine {
                    level: DEFAULT_CANTOR_LEVEL,
                })
            }
            _ => {}
        }
        if let Some(a) = arg("cone") {
            let half_angle: f64 = a
                .parse()
                .map_err(|_| config(format!("bad cone half-angle '{a}'")))?;
            return Ok(Self::Cone { half_angle });
        }
        if let Some(a) = arg("cantor") {
            let level: u32 = a
                .parse()
                .map_err(|_| config(format!("bad cantor level '{a}'")))?;
            return Ok(Self::CantorLine { level });
        }
        Err(config(format!("unknown region descriptor '{text}'")))
    }
}

/// Deepest Cantor level whose intervals are at least one grid spacing long.
pub fn max_cantor_level(h: f64) -> u32 {
    let ratio = 1.0 / (2.0 * h);
    if ratio < 1.0 {
        return 0;
    }
    // floor(log_3(ratio)) without trusting ln round-off at exact powers.
    let mut level = 0u32;
    let mut len = 1.0;
    while len * 3.0 <= ratio * (1.0 + 1e-12) {
        len *= 3.0;
        level += 1;
    }
    level
}

pub fn effective_cantor_level(grid: &Grid, level: u32) -> u32 {
    level.min(max_cantor_level(grid.h()))
}

/// Closed intervals of the level-`level` middle-thirds prefractal of
/// [`CANTOR_SEGMENT`], in increasing order.
pub fn cantor_intervals(level: u32) -> Vec<(f64, f64)> {
    let mut intervals = vec![CANTOR_SEGMENT];
    for _ in 0..level {
        intervals = intervals
            .into_iter()
            .flat_map(|(a, b)| {
                let third = (b - a) / 3.0;
                [(a, a + third), (b - third, b)]
            })
            .collect();
    }
    intervals
}

/// Node-indexed real values on a [`Grid`].
#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: Arc<Grid>) -> Self {
        let len = grid.len();
        Self {
            grid,
            values: vec![0.0; len],
        }
    }

    pub fn from_values(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    /// Evaluate `f` at every lattice node.
    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let (x, y) = grid.coords(k);
                f(x, y)
            })
            .collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, idx: usize) -> f64 {
        self.values[idx]
    }

    #[inline]
    pub fn at_ij(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.grid.same_lattice(&other.grid) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "resolution {} vs {}",
                self.grid.n(),
                other.grid.n()
            )))
        }
    }

    /// Maximum of `|u|` over interior and Dirichlet nodes.
    pub fn max_abs(&self) -> f64 {
        (0..self.values.len())
            .filter(|&k| self.grid.is_active(k))
            .map(|k| self.values[k].abs())
            .fold(0.0, f64::max)
    }

    /// Bilinear interpolation; `None` outside the lattice.
    pub fn sample(&self, x: f64, y: f64) -> Option<f64> {
        let (i, j, s, t) = self.cell_of(x, y)?;
        let u00 = self.at_ij(i, j);
        let u10 = self.at_ij(i + 1, j);
        let u01 = self.at_ij(i, j + 1);
        let u11 = self.at_ij(i + 1, j + 1);
        Some(bilerp(u00, u10, u01, u11, s, t))
    }

    /// Central-difference gradient at a node with all four neighbours inside
    /// the lattice.
    pub fn node_gradient(&self, i: usize, j: usize) -> (f64, f64) {
        let h2 = 2.0 * self.grid.h();
        let gx = (self.at_ij(i + 1, j) - self.at_ij(i - 1, j)) / h2;
        let gy = (self.at_ij(i, j + 1) - self.at_ij(i, j - 1)) / h2;
        (gx, gy)
    }

    /// Bilinear interpolation of central-difference node gradients.
    pub fn sample_gradient(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let (i, j, s, t) = self.cell_of(x, y)?;
        let n = self.grid.n();
        if i == 0 || j == 0 || i + 2 >= n || j + 2 >= n {
            return None;
        }
        let g00 = self.node_gradient(i, j);
        let g10 = self.node_gradient(i + 1, j);
        let g01 = self.node_gradient(i, j + 1);
        let g11 = self.node_gradient(i + 1, j + 1);
        Some((
            bilerp(g00.0, g10.0, g01.0, g11.0, s, t),
            bilerp(g00.1, g10.1, g01.1, g11.1, s, t),
        ))
    }

    fn cell_of(&self, x: f64, y: f64) -> Option<(usize, usize, f64, f64)> {
        let h = self.grid.h();
        let c = self.grid.center() as f64;
        let fx = x / h + c;
        let fy = y / h + c;
        let last = (self.grid.n() - 1) as f64;
        if !(fx >= 0.0 && fy >= 0.0 && fx <= last && fy <= last) {
            return None;
        }
        let i = (fx.floor() as usize).min(self.grid.n() - 2);
        let j = (fy.floor() as usize).min(self.grid.n() - 2);
        Some((i, j, fx - i as f64, fy - j as f64))
    }
}

#[inline]
fn bilerp(u00: f64, u10: f64, u01: f64, u11: f64, s: f64, t: f64) -> f64 {
    (1.0 - t) * ((1.0 - s) * u00 + s * u10) + t * ((1.0 - s) * u01 + s * u11)
}

/// Field carrying `g` at Dirichlet nodes and zero elsewhere. `g` is evaluated
/// at the node position itself (the staircase boundary layer).
pub fn evaluate_on_boundary(grid: &Arc<Grid>, g: impl Fn(f64, f64) -> f64) -> ScalarField {
    let mut field = ScalarField::zeros(grid.clone());
    for k in grid.dirichlet_mask().indices() {
        let (x, y) = grid.coords(k);
        field.values[k] = g(x, y);
    }
    field
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> Arc<Grid> {
        Grid::build(GridSpec::new(n).unwrap()).unwrap()
    }

    #[test]
    fn rejects_even_and_small_resolutions() {
        assert!(matches!(GridSpec::new(64), Err(Error::Config(_))));
        assert!(matches!(GridSpec::new(31), Err(Error::Config(_))));
        assert!(GridSpec::new(33).is_ok());
    }

    #[test]
    fn origin_is_interior_node() {
        let g = grid(33);
        assert_eq!(g.center(), 16);
        assert_eq!(g.origin(), g.index(16, 16));
        assert!(g.is_interior(g.origin()));
        assert_eq!(g.coords(g.origin()), (0.0, 0.0));
    }

    #[test]
    fn spacing_of_129() {
        assert_eq!(GridSpec::new(129).unwrap().spacing(), 0.015625);
    }

    #[test]
    fn interior_count_matches_brute_force_scan() {
        let g = grid(129);
        let h = 2.0 / 128.0;
        let mut count = 0;
        for j in 0..129 {
            for i in 0..129 {
                let x = -1.0 + i as f64 * h;
                let y = -1.0 + j as f64 * h;
                if (x * x + y * y).sqrt() < 1.0 - h / 2.0 {
                    count += 1;
                }
            }
        }
        assert_eq!(g.report().interior, count);
    }

    #[test]
    fn masks_partition_and_close_under_neighbours() {
        let g = grid(65);
        let r = g.report();
        assert_eq!(r.interior + r.dirichlet + r.exterior, g.len());
        for k in 0..g.len() {
            assert!(!(g.is_interior(k) && g.is_dirichlet(k)));
        }
        for k in g.interior_mask().indices() {
            for m in g.neighbors(k) {
                assert!(g.is_active(m));
            }
        }
    }

    #[test]
    fn degenerate_cone_is_half_line() {
        let g = grid(33);
        let cone = ObstacleRegion::Cone { half_angle: 0.0 }.realize(&g).unwrap();
        let half = ObstacleRegion::HalfLine.realize(&g).unwrap();
        assert_eq!(cone, half);
    }

    #[test]
    fn half_line_on_33() {
        let g = grid(33);
        let half = ObstacleRegion::HalfLine.realize(&g).unwrap();
        let h = g.h();
        let expected: Vec<usize> = (0..33)
            .filter(|&i| {
                let x = g.axis_coord(i);
                x <= 0.0 && x.abs() < 1.0 - h / 2.0
            })
            .map(|i| g.index(i, 16))
            .collect();
        assert_eq!(half.indices().collect::<Vec<_>>(), expected);
    }

    #[test]
    fn cone_rejects_bad_angle() {
        let g = grid(33);
        assert!(ObstacleRegion::Cone { half_angle: PI }.realize(&g).is_err());
        assert!(ObstacleRegion::Cone { half_angle: -0.1 }.realize(&g).is_err());
    }

    #[test]
    fn cantor_level_two_matches_interval_enumeration() {
        // Level-2 intervals of [-3/4, -1/4], enumerated by hand (units of 1/36).
        let expected = [(-27, -25), (-23, -21), (-15, -13), (-11, -9)];
        let got = cantor_intervals(2);
        assert_eq!(got.len(), 4);
        for (&(a, b), &(ea, eb)) in got.iter().zip(&expected) {
            assert!((a - ea as f64 / 36.0).abs() < 1e-14);
            assert!((b - eb as f64 / 36.0).abs() < 1e-14);
        }
        let g = grid(129);
        let mask = ObstacleRegion::CantorLine { level: 2 }.realize(&g).unwrap();
        for k in 0..g.len() {
            let (x, y) = g.coords(k);
            let inside = y == 0.0
                && expected
                    .iter()
                    .any(|&(a, b)| x * 36.0 >= a as f64 - 1e-9 && x * 36.0 <= b as f64 + 1e-9);
            assert_eq!(mask.get(k), inside, "node {k} at x={x}");
        }
    }

    #[test]
    fn cantor_level_is_capped_by_resolution() {
        assert_eq!(max_cantor_level(1.0 / 128.0), 3);
        assert_eq!(max_cantor_level(1.0 / 64.0), 3);
        assert_eq!(max_cantor_level(1.0 / 16.0), 1);
    }

    #[test]
    fn boundary_evaluation() {
        let g = grid(65);
        let one = evaluate_on_boundary(&g, |_, _| 1.0);
        let lin = evaluate_on_boundary(&g, |x, _| x);
        for k in 0..g.len() {
            if g.is_dirichlet(k) {
                assert_eq!(one.at(k), 1.0);
                assert_eq!(lin.at(k), g.coords(k).0);
            } else {
                assert_eq!(one.at(k), 0.0);
            }
        }
    }

    #[test]
    fn parses_region_descriptors() {
        assert_eq!(ObstacleRegion::parse("halfline").unwrap(), ObstacleRegion::HalfLine);
        assert_eq!(
            ObstacleRegion::parse("cantor(3)").unwrap(),
            ObstacleRegion::CantorLine { level: 3 }
        );
        assert_eq!(
            ObstacleRegion::parse("cone(0.5)").unwrap(),
            ObstacleRegion::Cone { half_angle: 0.5 }
        );
        assert!(ObstacleRegion::parse("triangle").is_err());
    }

    #[test]
    fn bilinear_sampling_is_exact_on_bilinear_functions() {
        let g = grid(33);
        let f = ScalarField::from_fn(g, |x, y| 1.0 + 2.0 * x - y + 0.5 * x * y);
        let v = f.sample(0.123, -0.456).unwrap();
        let exact = 1.0 + 2.0 * 0.123 + 0.456 + 0.5 * 0.123 * -0.456;
        assert!((v - exact).abs() < 1e-13);
        assert!(f.sample(1.5, 0.0).is_none());
    }
}
