//! Projected SOR for the discrete obstacle problem, plus the unconstrained
//! Dirichlet problem and the mixed Dirichlet/Neumann problem on the upper
//! half-disk.
//!
//! All three share one kernel: a fixed lexicographic sweep over the free
//! nodes of the 5-point Laplacian, each update relaxed by `omega` and then
//! projected onto `u ≥ lower`. Free nodes without an obstacle carry the
//! [`NO_OBSTACLE`] sentinel, which iterates never reach.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::domain::{Grid, Mask, ScalarField};
use crate::error::{config, Result};

/// Stand-in for `−∞` off the obstacle set.
pub const NO_OBSTACLE: f64 = -1e30;

const FINITE_OBSTACLE: f64 = NO_OBSTACLE / 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverParams {
    pub omega: f64,
    /// Stop once the largest nodal update of a sweep is at most `tol`.
    pub tol: f64,
    pub max_iter: usize,
}

impl SolverParams {
    pub const DEFAULT_OMEGA: f64 = 1.8;
    pub const DEFAULT_TOL: f64 = 1e-9;

    /// `omega = 1.8`, `tol = 1e-9`, `max_iter = 500 N`.
    pub fn for_grid(grid: &Grid) -> Self {
        Self {
            omega: Self::DEFAULT_OMEGA,
            tol: Self::DEFAULT_TOL,
            max_iter: 500 * grid.n(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0 && self.omega < 2.0) {
            return Err(config(format!("omega {} outside (0, 2)", self.omega)));
        }
        if !(self.tol > 0.0) {
            return Err(config(format!("tol {} must be positive", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(config("max_iter must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub final_update: f64,
    /// `Σ_edges (u_a − u_b)²` over edges touching a free node.
    pub energy: f64,
    pub converged: bool,
    /// `max |min(u − ψ̂, −Δ_h u − f)|` over free nodes.
    pub complementarity_defect: f64,
    /// Largest excess of the obstacle over the boundary data range at
    /// obstacle nodes next to the Dirichlet layer (reported, not enforced).
    pub admissibility_gap: Option<f64>,
}

/// Discrete obstacle problem on the disk of `grid`.
#[derive(Debug, Clone)]
pub struct ObstacleProblem {
    grid: Arc<Grid>,
    boundary: ScalarField,
    region: Mask,
    obstacle: ScalarField,
    source: Option<ScalarField>,
}

impl ObstacleProblem {
    /// `boundary` is read at Dirichlet nodes; `obstacle` must be finite
    /// exactly on `region` (use [`obstacle_field`]).
    pub fn new(boundary: ScalarField, region: Mask, obstacle: ScalarField) -> Result<Self> {
        let grid = boundary.grid().clone();
        obstacle.check_same_grid(&boundary)?;
        if !grid.same_as(obstacle.grid()) {
            return Err(config("obstacle and boundary data live on different disks"));
        }
        if region.len() != grid.len() {
            return Err(config("region mask does not match the grid"));
        }
        if !region.is_subset_of(grid.interior_mask()) {
            return Err(config("obstacle region contains non-interior nodes"));
        }
        for k in 0..grid.len() {
            let finite = obstacle.at(k) > FINITE_OBSTACLE;
            if grid.is_interior(k) && finite != region.get(k) {
                return Err(config(format!(
                    "obstacle must be finite exactly on the region (node {k})"
                )));
            }
        }
        Ok(Self {
            grid,
            boundary,
            region,
            obstacle,
            source: None,
        })
    }

    /// Unconstrained problem (empty obstacle set).
    pub fn unconstrained(boundary: ScalarField) -> Self {
        let grid = boundary.grid().clone();
        let len = grid.len();
        Self {
            obstacle: ScalarField::from_values(grid.clone(), vec![NO_OBSTACLE; len])
                .expect("sized to grid"),
            region: Mask::empty(len),
            grid,
            boundary,
            source: None,
        }
    }

    pub fn with_source(mut self, source: ScalarField) -> Result<Self> {
        source.check_same_grid(&self.boundary)?;
        self.source = Some(source);
        Ok(self)
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn region(&self) -> &Mask {
        &self.region
    }

    pub fn obstacle(&self) -> &ScalarField {
        &self.obstacle
    }

    pub fn boundary(&self) -> &ScalarField {
        &self.boundary
    }

    fn admissibility_gap(&self) -> Option<f64> {
        let g = &self.grid;
        let bmax = g
            .dirichlet_mask()
            .indices()
            .map(|k| self.boundary.at(k))
            .fold(f64::NEG_INFINITY, f64::max);
        self.region
            .indices()
            .filter(|&k| g.touches_dirichlet(k))
            .map(|k| self.obstacle.at(k) - bmax)
            .reduce(f64::max)
    }

    fn system(&self) -> System {
        let g = &self.grid;
        let h2 = g.h() * g.h();
        let nodes: Vec<usize> = g.interior_mask().indices().collect();
        let neighbors = nodes.iter().map(|&k| g.neighbors(k)).collect();
        let rhs = nodes
            .iter()
            .map(|&k| self.source.as_ref().map_or(0.0, |f| h2 * f.at(k)))
            .collect();
        let lower = nodes.iter().map(|&k| self.obstacle.at(k)).collect();
        let mut values = vec![0.0; g.len()];
        for k in g.dirichlet_mask().indices() {
            values[k] = self.boundary.at(k);
        }
        System::new(g.clone(), nodes, neighbors, rhs, lower, values)
    }

    pub fn psor(&self, params: SolverParams) -> Result<Psor> {
        params.validate()?;
        Ok(Psor::new(self.system(), params))
    }
}

/// Obstacle field equal to `psi` on `region` and [`NO_OBSTACLE`] elsewhere.
pub fn obstacle_field(grid: &Arc<Grid>, region: &Mask, psi: impl Fn(f64, f64) -> f64) -> ScalarField {
    let mut field = ScalarField::zeros(grid.clone());
    for (k, v) in field.values_mut().iter_mut().enumerate() {
        *v = if region.get(k) {
            let (x, y) = grid.coords(k);
            psi(x, y)
        } else {
            NO_OBSTACLE
        };
    }
    field
}

/// Linear system of the free nodes in sweep order.
#[derive(Debug, Clone)]
struct System {
    grid: Arc<Grid>,
    nodes: Vec<usize>,
    neighbors: Vec<[usize; 4]>,
    /// `h² f` per free node.
    rhs: Vec<f64>,
    lower: Vec<f64>,
    /// Full-lattice values; fixed nodes hold their data.
    values: Vec<f64>,
    free: Vec<bool>,
}

impl System {
    fn new(
        grid: Arc<Grid>,
        nodes: Vec<usize>,
        neighbors: Vec<[usize; 4]>,
        rhs: Vec<f64>,
        lower: Vec<f64>,
        mut values: Vec<f64>,
    ) -> Self {
        let mut free = vec![false; grid.len()];
        for (p, &k) in nodes.iter().enumerate() {
            free[k] = true;
            values[k] = lower[p].max(0.0);
        }
        Self {
            grid,
            nodes,
            neighbors,
            rhs,
            lower,
            values,
            free,
        }
    }
}

/// Projected SOR iteration over a [`System`].
#[derive(Debug, Clone)]
pub struct Psor {
    sys: System,
    params: SolverParams,
    iterations: usize,
    last_update: f64,
}

impl Psor {
    fn new(sys: System, params: SolverParams) -> Self {
        Self {
            sys,
            params,
            iterations: 0,
            last_update: f64::INFINITY,
        }
    }

    /// One lexicographic sweep; returns the largest nodal update.
    pub fn sweep(&mut self) -> f64 {
        let omega = self.params.omega;
        let sys = &mut self.sys;
        let u = &mut sys.values;
        let mut max_update = 0.0f64;
        for (p, &k) in sys.nodes.iter().enumerate() {
            let [a, b, c, d] = sys.neighbors[p];
            let target = 0.25 * (u[a] + u[b] + u[c] + u[d] + sys.rhs[p]);
            let old = u[k];
            let mut new = old + omega * (target - old);
            let lo = sys.lower[p];
            if new < lo {
                new = lo;
            }
            u[k] = new;
            max_update = max_update.max((new - old).abs());
        }
        self.iterations += 1;
        self.last_update = max_update;
        max_update
    }

    /// Sweep until the update drops to `tol` or `max_iter` is reached.
    pub fn run(&mut self) -> SolveReport {
        while self.iterations < self.params.max_iter {
            if self.sweep() <= self.params.tol {
                break;
            }
        }
        self.report()
    }

    /// Dirichlet energy: each free–free edge counted once, free–fixed
    /// edges once.
    pub fn energy(&self) -> f64 {
        let s = &self.sys;
        let u = &s.values;
        let mut e = 0.0;
        for (p, &k) in s.nodes.iter().enumerate() {
            for &m in &s.neighbors[p] {
                let w = if s.free[m] { 0.5 } else { 1.0 };
                let d = u[k] - u[m];
                e += w * d * d;
            }
        }
        e
    }

    /// The quadratic functional PSOR descends: energy minus `2 h² Σ f u`.
    pub fn functional(&self) -> f64 {
        let s = &self.sys;
        let src: f64 = s
            .nodes
            .iter()
            .zip(&s.rhs)
            .map(|(&k, r)| r * s.values[k])
            .sum();
        self.energy() - 2.0 * src
    }

    /// `max |min(u − ψ̂, −Δ_h u − f)|` over free nodes.
    pub fn complementarity_defect(&self) -> f64 {
        let s = &self.sys;
        let h2 = s.grid.h() * s.grid.h();
        let u = &s.values;
        let mut worst = 0.0f64;
        for (p, &k) in s.nodes.iter().enumerate() {
            let [a, b, c, d] = s.neighbors[p];
            let residual = (4.0 * u[k] - u[a] - u[b] - u[c] - u[d] - s.rhs[p]) / h2;
            let gap = if s.lower[p] > FINITE_OBSTACLE {
                u[k] - s.lower[p]
            } else {
                f64::INFINITY
            };
            worst = worst.max(gap.min(residual).abs());
        }
        worst
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn values(&self) -> &[f64] {
        &self.sys.values
    }

    pub fn report(&self) -> SolveReport {
        SolveReport {
            iterations: self.iterations,
            final_update: self.last_update,
            energy: self.energy(),
            converged: self.last_update <= self.params.tol,
            complementarity_defect: self.complementarity_defect(),
            admissibility_gap: None,
        }
    }

    pub fn into_field(self) -> ScalarField {
        let grid = self.sys.grid.clone();
        ScalarField::from_values(grid, self.sys.values).expect("sized to grid")
    }
}

/// Projected-SOR fixed point of the obstacle problem. Non-convergence is
/// reported through `SolveReport::converged`, not as an error.
pub fn solve_obstacle(
    problem: &ObstacleProblem,
    params: SolverParams,
) -> Result<(ScalarField, SolveReport)> {
    let mut psor = problem.psor(params)?;
    let mut report = psor.run();
    report.admissibility_gap = problem.admissibility_gap();
    Ok((psor.into_field(), report))
}

/// `−Δu = f` in the disk, `u = g` on the Dirichlet layer.
pub fn solve_dirichlet(
    boundary: ScalarField,
    source: Option<ScalarField>,
    params: SolverParams,
) -> Result<(ScalarField, SolveReport)> {
    let mut problem = ObstacleProblem::unconstrained(boundary);
    if let Some(f) = source {
        problem = problem.with_source(f)?;
    }
    solve_obstacle(&problem, params)
}

/// Mixed problem on the closed upper half-disk:
/// `−Δv = f` inside, `v = data` on `Γ_D = F ∪ arc` with `F = {x₁ ≤ 0, x₂ = 0}`,
/// `∂_ν v = 0` on `Γ_N = {x₁ > 0, x₂ = 0}` through the ghost reflection
/// `v(i, −1) = v(i, 1)`.
#[derive(Debug, Clone)]
pub struct MixedBvp {
    grid: Arc<Grid>,
    data: ScalarField,
    source: Option<ScalarField>,
}

/// Node roles on the closed upper half-disk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HalfDiskNode {
    Interior,
    Neumann,
    /// Obstacle part of the Dirichlet boundary.
    DirichletF,
    DirichletArc,
    Outside,
}

impl MixedBvp {
    /// `data` is read on both Dirichlet parts, `source` at free nodes.
    pub fn new(data: ScalarField, source: Option<ScalarField>) -> Result<Self> {
        if let Some(f) = &source {
            f.check_same_grid(&data)?;
        }
        let grid = data.grid().clone();
        Ok(Self { grid, data, source })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn classify(grid: &Grid, k: usize) -> HalfDiskNode {
        let (x, y) = grid.coords(k);
        if y < 0.0 {
            return HalfDiskNode::Outside;
        }
        if grid.is_dirichlet(k) {
            return HalfDiskNode::DirichletArc;
        }
        if !grid.is_interior(k) {
            return HalfDiskNode::Outside;
        }
        if y > 0.0 {
            HalfDiskNode::Interior
        } else if x > 0.0 {
            HalfDiskNode::Neumann
        } else {
            HalfDiskNode::DirichletF
        }
    }

    fn system(&self) -> System {
        let g = &self.grid;
        let n = g.n();
        let h2 = g.h() * g.h();
        let mut nodes = Vec::new();
        let mut neighbors = Vec::new();
        let mut values = vec![0.0; g.len()];
        for k in 0..g.len() {
            match Self::classify(g, k) {
                HalfDiskNode::Interior => {
                    nodes.push(k);
                    neighbors.push(g.neighbors(k));
                }
                HalfDiskNode::Neumann => {
                    nodes.push(k);
                    neighbors.push([k - 1, k + 1, k + n, k + n]);
                }
                HalfDiskNode::DirichletF | HalfDiskNode::DirichletArc => {
                    values[k] = self.data.at(k);
                }
                HalfDiskNode::Outside => {}
            }
        }
        let rhs = nodes
            .iter()
            .map(|&k| self.source.as_ref().map_or(0.0, |f| h2 * f.at(k)))
            .collect();
        let lower = vec![NO_OBSTACLE; nodes.len()];
        System::new(g.clone(), nodes, neighbors, rhs, lower, values)
    }

    pub fn psor(&self, params: SolverParams) -> Result<Psor> {
        params.validate()?;
        Ok(Psor::new(self.system(), params))
    }
}

/// Solves the mixed problem and fills the lower half by even reflection.
pub fn solve_mixed_bvp(spec: &MixedBvp, params: SolverParams) -> Result<(ScalarField, SolveReport)> {
    let mut psor = spec.psor(params)?;
    let report = psor.run();
    let mut field = psor.into_field();
    reflect_even(&mut field);
    Ok((field, report))
}

/// Overwrite the lower half (`x₂ < 0`) with the mirror of the upper half.
pub fn reflect_even(field: &mut ScalarField) {
    let grid = field.grid().clone();
    let n = grid.n();
    let c = grid.center();
    let values = field.values_mut();
    for j in 0..c {
        let mirror = 2 * c - j;
        for i in 0..n {
            values[j * n + i] = values[mirror * n + i];
        }
    }
}

/// Smooth radial cutoff: 1 on `B_inner`, 0 outside `B_outer`, `C^∞` in
/// between.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub inner: f64,
    pub outer: f64,
}

impl Default for Cutoff {
    fn default() -> Self {
        Self {
            inner: 0.75,
            outer: 0.95,
        }
    }
}

impl Cutoff {
    pub fn eval(&self, r: f64) -> f64 {
        if r <= self.inner {
            return 1.0;
        }
        if r >= self.outer {
            return 0.0;
        }
        let t = (r - self.inner) / (self.outer - self.inner);
        let bump = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
        let a = bump(1.0 - t);
        a / (a + bump(t))
    }
}

/// Extended obstacle `Ψ̄`: solves the mixed problem with zero source and
/// data `−‖u‖_∞ (1 − η)` on `Γ_D`, then reflects evenly across `x₂ = 0`.
pub fn extend_obstacle(
    u: &ScalarField,
    cutoff: Cutoff,
    params: SolverParams,
) -> Result<(ScalarField, SolveReport)> {
    if !(cutoff.inner > 0.0 && cutoff.inner < cutoff.outer && cutoff.outer <= 1.0) {
        return Err(config("cutoff radii must satisfy 0 < inner < outer <= 1"));
    }
    let sup = u.max_abs();
    let data = ScalarField::from_fn(u.grid().clone(), |x, y| {
        -sup * (1.0 - cutoff.eval(x.hypot(y)))
    });
    solve_mixed_bvp(&MixedBvp::new(data, None)?, params)
}

/// Signed maximum of `u₁ − u₂` over interior and Dirichlet nodes.
pub fn comparison_check(u1: &ScalarField, u2: &ScalarField) -> Result<f64> {
    u1.check_same_grid(u2)?;
    let g = u1.grid();
    Ok((0..g.len())
        .filter(|&k| g.is_active(k))
        .map(|k| u1.at(k) - u2.at(k))
        .fold(f64::NEG_INFINITY, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{evaluate_on_boundary, GridSpec, ObstacleRegion};

    fn grid(n: usize) -> Arc<Grid> {
        Grid::build(GridSpec::new(n).unwrap()).unwrap()
    }

    fn half_line_problem(g: &Arc<Grid>, bc: impl Fn(f64, f64) -> f64, psi: f64) -> ObstacleProblem {
        let region = ObstacleRegion::HalfLine.realize(g).unwrap();
        let obstacle = obstacle_field(g, &region, |_, _| psi);
        ObstacleProblem::new(evaluate_on_boundary(g, bc), region, obstacle).unwrap()
    }

    #[test]
    fn affine_data_with_inactive_obstacle_is_recovered_exactly() {
        let g = grid(33);
        let p = half_line_problem(&g, |x, _| x, -1e6);
        let (u, rep) = solve_obstacle(&p, SolverParams::for_grid(&g)).unwrap();
        assert!(rep.converged);
        for k in g.interior_mask().indices() {
            assert!((u.at(k) - g.coords(k).0).abs() < 1e-7);
        }
    }

    #[test]
    fn constant_data_never_touches_obstacle() {
        let g = grid(33);
        let p = half_line_problem(&g, |_, _| 1.0, 0.0);
        let (u, rep) = solve_obstacle(&p, SolverParams::for_grid(&g)).unwrap();
        assert!(rep.converged);
        for k in g.interior_mask().indices() {
            assert!((u.at(k) - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn dirichlet_zero_and_positive_source() {
        let g = grid(33);
        let params = SolverParams::for_grid(&g);
        let (u, _) = solve_dirichlet(ScalarField::zeros(g.clone()), None, params).unwrap();
        assert!(u.values().iter().all(|v| *v == 0.0));
        let f = ScalarField::from_fn(g.clone(), |_, _| 1.0);
        let (u, rep) = solve_dirichlet(ScalarField::zeros(g.clone()), Some(f), params).unwrap();
        assert!(rep.converged);
        assert!(g.interior_mask().indices().all(|k| u.at(k) > 0.0));
    }

    #[test]
    fn quadratic_harmonic_dirichlet_data_is_reproduced() {
        // x1² − x2² is annihilated by the 5-point Laplacian.
        let g = grid(65);
        let bc = evaluate_on_boundary(&g, |x, y| x * x - y * y);
        let (u, rep) = solve_dirichlet(bc, None, SolverParams::for_grid(&g)).unwrap();
        assert!(rep.converged);
        for k in g.interior_mask().indices() {
            let (x, y) = g.coords(k);
            assert!((u.at(k) - (x * x - y * y)).abs() < 1e-6);
        }
    }

    #[test]
    fn rejects_inconsistent_masks_and_params() {
        let g = grid(33);
        let mut region = ObstacleRegion::HalfLine.realize(&g).unwrap();
        let obstacle = obstacle_field(&g, &region, |_, _| 0.0);
        region.set(g.index(0, 0), true);
        assert!(ObstacleProblem::new(ScalarField::zeros(g.clone()), region, obstacle).is_err());

        let p = half_line_problem(&g, |_, _| 0.0, 0.0);
        let bad = SolverParams {
            omega: 2.0,
            ..SolverParams::for_grid(&g)
        };
        assert!(solve_obstacle(&p, bad).is_err());
    }

    #[test]
    fn non_convergence_is_reported_not_raised() {
        let g = grid(33);
        let p = half_line_problem(&g, |x, _| x, 0.0);
        let params = SolverParams {
            max_iter: 3,
            ..SolverParams::for_grid(&g)
        };
        let (_, rep) = solve_obstacle(&p, params).unwrap();
        assert!(!rep.converged);
        assert_eq!(rep.iterations, 3);
    }

    #[test]
    fn projection_is_exact_on_active_nodes() {
        let g = grid(65);
        let p = half_line_problem(&g, |x, y| -(x * x + y * y).sqrt(), 0.0);
        let (u, rep) = solve_obstacle(&p, SolverParams::for_grid(&g)).unwrap();
        assert!(rep.converged);
        let region = p.region();
        let active = region.indices().filter(|&k| u.at(k) == 0.0).count();
        assert!(active > 0);
        assert!(region.indices().all(|k| u.at(k) >= 0.0));
    }

    #[test]
    fn mixed_zero_data_gives_zero() {
        let g = grid(33);
        let spec = MixedBvp::new(ScalarField::zeros(g.clone()), None).unwrap();
        let (v, rep) = solve_mixed_bvp(&spec, SolverParams::for_grid(&g)).unwrap();
        assert!(rep.converged);
        assert!(v.values().iter().all(|x| *x == 0.0));
    }

    #[test]
    fn mixed_node_roles_partition_half_disk() {
        let g = grid(33);
        let c = g.center();
        assert_eq!(MixedBvp::classify(&g, g.origin()), HalfDiskNode::DirichletF);
        assert_eq!(MixedBvp::classify(&g, g.index(c + 1, c)), HalfDiskNode::Neumann);
        assert_eq!(MixedBvp::classify(&g, g.index(c - 1, c)), HalfDiskNode::DirichletF);
        assert_eq!(MixedBvp::classify(&g, g.index(c, c + 1)), HalfDiskNode::Interior);
        assert_eq!(MixedBvp::classify(&g, g.index(c, c - 1)), HalfDiskNode::Outside);
    }

    #[test]
    fn cutoff_is_smooth_step() {
        let eta = Cutoff::default();
        assert_eq!(eta.eval(0.5), 1.0);
        assert_eq!(eta.eval(0.75), 1.0);
        assert_eq!(eta.eval(0.96), 0.0);
        let mid = eta.eval(0.85);
        assert!((mid - 0.5).abs() < 1e-12);
        let mut prev = 1.0;
        for i in 0..=100 {
            let v = eta.eval(0.75 + 0.2 * i as f64 / 100.0);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn extension_of_zero_is_zero() {
        let g = grid(33);
        let (psi, _) =
            extend_obstacle(&ScalarField::zeros(g.clone()), Cutoff::default(), SolverParams::for_grid(&g))
                .unwrap();
        assert!(psi.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn comparison_of_shifted_fields() {
        let g = grid(33);
        let u = ScalarField::from_fn(g.clone(), |x, y| x * y);
        let v = ScalarField::from_fn(g.clone(), |x, y| x * y + 1.0);
        let d = comparison_check(&u, &v).unwrap();
        assert!((d + 1.0).abs() <= 1e-12);
        let other = ScalarField::zeros(grid(35));
        assert!(comparison_check(&u, &other).is_err());
    }
}
