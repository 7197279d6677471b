//! Radial energy and boundary integrals, Almgren and ACF-type frequencies,
//! Rellich and Green identity defects, Hölder exponent fits and contact sets.

use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Mask, ScalarField};
use crate::error::{Error, Result};

/// Angular samples of the circle quadrature.
pub const QUADRATURE_SAMPLES: usize = 1024;

/// Default number of radii in a frequency profile.
pub const DEFAULT_PROFILE_RADII: usize = 48;

/// `H(r)` at or below this value leaves `N(r)` undefined.
pub const H_FLOOR: f64 = 1e-20;

/// Oscillations below this value are dropped from exponent fits.
pub const OSC_FLOOR: f64 = 1e-12;

/// Contact tolerance on `u − ψ`.
pub const CONTACT_TOL: f64 = 1e-12;

/// Sub-samples per axis used to weight cells cut by the circle.
const COVERAGE_SUBSAMPLES: usize = 16;

pub type Point = (f64, f64);

pub const ORIGIN: Point = (0.0, 0.0);

fn check_radius(u: &ScalarField, center: Point, r: f64, margin_h: f64, what: &str) -> Result<()> {
    let g = u.grid();
    let h = g.h();
    let reach = center.0.hypot(center.1) + r;
    if r < margin_h * h || reach > g.radius() - margin_h * h {
        return Err(Error::OutOfRange(format!(
            "{what}: radius {r} about ({}, {}) needs r >= {margin_h}h and to stay {margin_h}h inside the disk",
            center.0, center.1
        )));
    }
    Ok(())
}

/// `∫_{B_r(center)} |∇u|²` from the energies of the bilinear interpolant on
/// each cell, weighted by the fraction of the cell area inside the disk.
pub fn dirichlet_energy_at(u: &ScalarField, center: Point, r: f64) -> Result<f64> {
    check_radius(u, center, r, 4.0, "dirichlet energy")?;
    let g = u.grid();
    let h = g.h();
    let n = g.n();
    let c = g.center() as f64;
    let lo = |v: f64| (((v - r) / h + c).floor().max(0.0) as usize).min(n - 2);
    let hi = |v: f64| (((v + r) / h + c).ceil().max(0.0) as usize).min(n - 2);
    let half_diag = h * std::f64::consts::FRAC_1_SQRT_2;
    let mut total = 0.0;
    for j in lo(center.1)..=hi(center.1) {
        for i in lo(center.0)..=hi(center.0) {
            let xc = g.axis_coord(i) + 0.5 * h;
            let yc = g.axis_coord(j) + 0.5 * h;
            let d = (xc - center.0).hypot(yc - center.1);
            let weight = if d + half_diag <= r {
                1.0
            } else if d - half_diag >= r {
                continue;
            } else {
                coverage(xc - center.0, yc - center.1, h, r)
            };
            let u00 = u.at_ij(i, j);
            let u10 = u.at_ij(i + 1, j);
            let u01 = u.at_ij(i, j + 1);
            let u11 = u.at_ij(i + 1, j + 1);
            let e = bilinear_cell_energy(u00, u10, u01, u11);
            total += weight * e;
        }
    }
    Ok(total)
}

pub fn dirichlet_energy(u: &ScalarField, r: f64) -> Result<f64> {
    dirichlet_energy_at(u, ORIGIN, r)
}

/// Exact `∫|∇q|²` over a square cell for the bilinear interpolant `q` of the
/// corner values (independent of the cell size in two dimensions).
#[inline]
pub fn bilinear_cell_energy(u00: f64, u10: f64, u01: f64, u11: f64) -> f64 {
    let (p, q) = (u10 - u00, u11 - u01);
    let (s, t) = (u01 - u00, u11 - u10);
    (p * p + p * q + q * q + s * s + s * t + t * t) / 3.0
}

/// Fraction of the cell centred at `(xc, yc)` (relative to the disk centre)
/// lying inside the disk of radius `r`.
fn coverage(xc: f64, yc: f64, h: f64, r: f64) -> f64 {
    let s = COVERAGE_SUBSAMPLES;
    let step = h / s as f64;
    let r2 = r * r;
    let mut inside = 0usize;
    for b in 0..s {
        let y = yc - 0.5 * h + (b as f64 + 0.5) * step;
        for a in 0..s {
            let x = xc - 0.5 * h + (a as f64 + 0.5) * step;
            if x * x + y * y <= r2 {
                inside += 1;
            }
        }
    }
    inside as f64 / (s * s) as f64
}

/// Boundary integrals over `∂B_r(center)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircleIntegrals {
    /// `∫ u²`.
    pub u2: f64,
    /// `∫ |∇u|²`.
    pub grad2: f64,
    /// `∫ (∂_ν u)²`.
    pub normal2: f64,
    /// `∫ u ∂_ν u`.
    pub u_normal: f64,
}

/// Trapezoidal rule with [`QUADRATURE_SAMPLES`] equi-angular points on the
/// bilinear interpolant of `u`. The normal derivative is a radial central
/// difference with step `h`; the tangential derivative is the difference of
/// neighbouring circle samples, taken at their midpoint. Neither stencil
/// straddles a ray through the centre, so a kink of `u` along the slit does
/// not leak into the gradient.
pub fn circle_integrals(u: &ScalarField, center: Point, r: f64) -> Result<CircleIntegrals> {
    check_radius(u, center, r, 8.0, "circle quadrature")?;
    let m = QUADRATURE_SAMPLES;
    let dr = u.grid().h();
    let dtheta = 2.0 * PI / m as f64;
    let at = |rho: f64, theta: f64| -> Result<f64> {
        let (x, y) = (center.0 + rho * theta.cos(), center.1 + rho * theta.sin());
        u.sample(x, y)
            .ok_or_else(|| Error::OutOfRange(format!("sample ({x}, {y}) off the lattice")))
    };
    let ring: Vec<f64> = (0..m).map(|k| at(r, k as f64 * dtheta)).collect::<Result<_>>()?;
    let mut acc = CircleIntegrals {
        u2: 0.0,
        grad2: 0.0,
        normal2: 0.0,
        u_normal: 0.0,
    };
    for k in 0..m {
        let theta = k as f64 * dtheta;
        let v = ring[k];
        let dn = (at(r + dr, theta)? - at(r - dr, theta)?) / (2.0 * dr);
        // Tangential derivative at the midpoint θ_{k+1/2}; midpoint and
        // trapezoid rules share the weight.
        let dt = (ring[(k + 1) % m] - v) / (r * dtheta);
        acc.u2 += v * v;
        acc.grad2 += dn * dn + dt * dt;
        acc.normal2 += dn * dn;
        acc.u_normal += v * dn;
    }
    let w = 2.0 * PI * r / m as f64;
    acc.u2 *= w;
    acc.grad2 *= w;
    acc.normal2 *= w;
    acc.u_normal *= w;
    Ok(acc)
}

/// `H(r) = ∫_{∂B_r} u²`.
pub fn boundary_l2(u: &ScalarField, r: f64) -> Result<f64> {
    Ok(circle_integrals(u, ORIGIN, r)?.u2)
}

/// `N(r) = r D(r) / H(r)`.
pub fn almgren_n_at(u: &ScalarField, center: Point, r: f64) -> Result<f64> {
    let h = circle_integrals(u, center, r)?.u2;
    if h <= H_FLOOR {
        return Err(Error::Undefined(format!("H({r}) = {h} below the quadrature floor")));
    }
    Ok(r * dirichlet_energy_at(u, center, r)? / h)
}

pub fn almgren_n(u: &ScalarField, r: f64) -> Result<f64> {
    almgren_n_at(u, ORIGIN, r)
}

/// `β(r) = D(r) / r` (the weight `|x|^{2−n}` is 1 in two dimensions).
pub fn acf_beta_at(u: &ScalarField, center: Point, r: f64) -> Result<f64> {
    Ok(dirichlet_energy_at(u, center, r)? / r)
}

pub fn acf_beta(u: &ScalarField, r: f64) -> Result<f64> {
    acf_beta_at(u, ORIGIN, r)
}

fn relative(num: f64, den: f64) -> f64 {
    if den.abs() <= 1e-300 {
        if num.abs() <= 1e-300 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        num / den
    }
}

/// `(∫|∇u|² − 2∫(∂_ν u)²) / ∫|∇u|²` on `∂B_r(center)`.
pub fn rellich_defect_at(u: &ScalarField, center: Point, r: f64) -> Result<f64> {
    let c = circle_integrals(u, center, r)?;
    Ok(relative(c.grad2 - 2.0 * c.normal2, c.grad2))
}

pub fn rellich_defect(u: &ScalarField, r: f64) -> Result<f64> {
    rellich_defect_at(u, ORIGIN, r)
}

/// `(D(r) − ∫_{∂B_r} u ∂_ν u) / D(r)`.
pub fn green_defect_at(u: &ScalarField, center: Point, r: f64) -> Result<f64> {
    let d = dirichlet_energy_at(u, center, r)?;
    let c = circle_integrals(u, center, r)?;
    Ok(relative(d - c.u_normal, d))
}

pub fn green_defect(u: &ScalarField, r: f64) -> Result<f64> {
    green_defect_at(u, ORIGIN, r)
}

/// `count` log-spaced radii from `lo` to `hi` inclusive.
pub fn log_radii(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

/// 48 log-spaced radii in `[8h, 0.5]`.
pub fn default_radii(u: &ScalarField) -> Vec<f64> {
    log_radii(8.0 * u.grid().h(), 0.5, DEFAULT_PROFILE_RADII)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyProfile {
    pub center: Point,
    pub radii: Vec<f64>,
    pub d: Vec<f64>,
    pub h: Vec<f64>,
    /// `None` where `H(r)` is below [`H_FLOOR`].
    pub n: Vec<Option<f64>>,
    pub beta: Vec<f64>,
    pub rellich_defect: Vec<f64>,
    pub green_defect: Vec<f64>,
}

impl FrequencyProfile {
    pub fn len(&self) -> usize {
        self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.radii.is_empty()
    }

    /// Largest decrease `N(r_i) − N(r_{i+1})` over consecutive defined values
    /// (zero when nondecreasing).
    pub fn worst_n_drop(&self) -> f64 {
        worst_drop(self.n.iter().flatten().copied())
    }

    pub fn worst_beta_drop(&self) -> f64 {
        worst_drop(self.beta.iter().copied())
    }

    /// Columns `r, D, H, N, beta, rellich_defect, green_defect`; `N` is empty
    /// where undefined.
    pub fn csv_bytes(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["r", "D", "H", "N", "beta", "rellich_defect", "green_defect"])?;
        for k in 0..self.len() {
            w.write_record([
                self.radii[k].to_string(),
                self.d[k].to_string(),
                self.h[k].to_string(),
                self.n[k].map_or_else(String::new, |v| v.to_string()),
                self.beta[k].to_string(),
                self.rellich_defect[k].to_string(),
                self.green_defect[k].to_string(),
            ])?;
        }
        w.into_inner()
            .map_err(|e| Error::Io(std::io::Error::new(e.error().kind(), e.error().to_string())))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.csv_bytes()?)?;
        Ok(())
    }
}

fn worst_drop(values: impl Iterator<Item = f64>) -> f64 {
    let v: Vec<f64> = values.collect();
    v.windows(2).map(|w| w[0] - w[1]).fold(0.0, f64::max)
}

pub fn frequency_profile(u: &ScalarField, center: Point, radii: &[f64]) -> Result<FrequencyProfile> {
    let rows: Vec<(f64, f64, Option<f64>, f64, f64, f64)> = radii
        .par_iter()
        .map(|&r| {
            let d = dirichlet_energy_at(u, center, r)?;
            let c = circle_integrals(u, center, r)?;
            let n = (c.u2 > H_FLOOR).then(|| r * d / c.u2);
            Ok((
                d,
                c.u2,
                n,
                d / r,
                relative(c.grad2 - 2.0 * c.normal2, c.grad2),
                relative(d - c.u_normal, d),
            ))
        })
        .collect::<Result<_>>()?;
    Ok(FrequencyProfile {
        center,
        radii: radii.to_vec(),
        d: rows.iter().map(|r| r.0).collect(),
        h: rows.iter().map(|r| r.1).collect(),
        n: rows.iter().map(|r| r.2).collect(),
        beta: rows.iter().map(|r| r.3).collect(),
        rellich_defect: rows.iter().map(|r| r.4).collect(),
        green_defect: rows.iter().map(|r| r.5).collect(),
    })
}

/// Least-squares power law `value ≈ C r^κ` in log–log coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HolderFit {
    pub exponent: f64,
    pub constant: f64,
    pub r_range: (f64, f64),
    /// RMS residual in log–log coordinates.
    pub fit_residual: f64,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

impl HolderFit {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["r", "value", "fit"])?;
        for (r, v) in self.radii.iter().zip(&self.values) {
            let fit = self.constant * r.powf(self.exponent);
            w.write_record([r.to_string(), v.to_string(), fit.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Ordinary least squares `y = a + b x`; returns `(b, a, rms)`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let rms = (xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - a - b * x).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    (b, a, rms)
}

/// Fit `values ≈ C r^κ`, dropping values below [`OSC_FLOOR`].
pub fn power_law_fit(radii: &[f64], values: &[f64]) -> Result<HolderFit> {
    let (rs, vs): (Vec<f64>, Vec<f64>) = radii
        .iter()
        .zip(values)
        .filter(|(_, v)| **v > OSC_FLOOR)
        .map(|(r, v)| (*r, *v))
        .unzip();
    if rs.len() < 3 {
        return Err(Error::Undefined(format!(
            "power-law fit needs 3 usable radii, got {}",
            rs.len()
        )));
    }
    let lx: Vec<f64> = rs.iter().map(|r| r.ln()).collect();
    let ly: Vec<f64> = vs.iter().map(|v| v.ln()).collect();
    let (slope, intercept, rms) = linear_fit(&lx, &ly);
    Ok(HolderFit {
        exponent: slope,
        constant: intercept.exp(),
        r_range: (rs[0], rs[rs.len() - 1]),
        fit_residual: rms,
        radii: rs,
        values: vs,
    })
}

/// `max |u − u(center)|` over interior and Dirichlet nodes within `r`.
pub fn oscillation(u: &ScalarField, center_node: usize, r: f64) -> f64 {
    let g = u.grid();
    let (cx, cy) = g.coords(center_node);
    let u0 = u.at(center_node);
    let reach = r + 1e-9 * g.h();
    nodes_in_ball(u, (cx, cy), reach)
        .map(|k| (u.at(k) - u0).abs())
        .fold(0.0, f64::max)
}

/// `sup |u|` over interior and Dirichlet nodes within `r` of `center`.
pub fn sup_abs_in_ball(u: &ScalarField, center: Point, r: f64) -> f64 {
    let reach = r + 1e-9 * u.grid().h();
    nodes_in_ball(u, center, reach)
        .map(|k| u.at(k).abs())
        .fold(0.0, f64::max)
}

fn nodes_in_ball(u: &ScalarField, center: Point, r: f64) -> impl Iterator<Item = usize> + '_ {
    let g = u.grid();
    let h = g.h();
    let n = g.n();
    let c = g.center() as f64;
    let lo = |v: f64| ((v - r) / h + c).floor().max(0.0) as usize;
    let hi = |v: f64| (((v + r) / h + c).ceil().max(0.0) as usize).min(n - 1);
    let (i0, i1, j0, j1) = (lo(center.0), hi(center.0), lo(center.1), hi(center.1));
    (j0..=j1).flat_map(move |j| {
        (i0..=i1).filter_map(move |i| {
            let k = g.index(i, j);
            let (x, y) = g.coords(k);
            (g.is_active(k) && (x - center.0).hypot(y - center.1) <= r).then_some(k)
        })
    })
}

/// Radii for exponent fits: log-spaced, snapped to whole multiples of `h`
/// so lattice axes reach the sampled radius exactly, deduplicated.
pub fn fit_radii(h: f64, r_min: f64, r_max: f64, samples: usize) -> Vec<f64> {
    let mut out: Vec<f64> = log_radii(r_min, r_max, samples)
        .into_iter()
        .map(|r| ((r / h).round().max(1.0)) * h)
        .filter(|r| *r >= r_min - 1e-12 && *r <= r_max + 1e-12)
        .collect();
    out.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    out
}

/// Least-squares slope of `log osc(r)` against `log r` about `center_node`.
pub fn holder_fit(
    u: &ScalarField,
    center_node: usize,
    r_min: f64,
    r_max: f64,
    samples: usize,
) -> Result<HolderFit> {
    let h = u.grid().h();
    if r_min < 8.0 * h - 1e-12 || r_max > 0.5 + 1e-12 || r_min >= r_max {
        return Err(Error::OutOfRange(format!(
            "fit range [{r_min}, {r_max}] must satisfy 8h <= r_min < r_max <= 0.5 (h = {h})"
        )));
    }
    let radii = fit_radii(h, r_min, r_max, samples);
    let osc: Vec<f64> = radii.iter().map(|&r| oscillation(u, center_node, r)).collect();
    power_law_fit(&radii, &osc)
}

/// Obstacle nodes with `u − ψ ≤ 1e-12`.
pub fn contact_set(u: &ScalarField, psi: &ScalarField, region: &Mask) -> Mask {
    let mut m = Mask::empty(region.len());
    for k in region.indices() {
        if u.at(k) - psi.at(k) <= CONTACT_TOL {
            m.set(k, true);
        }
    }
    m
}

/// Population standard deviation.
pub fn stdev(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Grid, GridSpec};
    use crate::exact::{ClosedForm, Sign};
    use std::sync::Arc;

    fn grid(n: usize) -> Arc<Grid> {
        Grid::build(GridSpec::new(n).unwrap()).unwrap()
    }

    /// Independent polar-grid midpoint rule for `∫_{B_r} |∇u|²` given the
    /// analytic gradient magnitude as a function of `(ρ, θ)`.
    fn polar_quadrature(r: f64, grad2: impl Fn(f64, f64) -> f64) -> f64 {
        let (nr, nt) = (4000, 512);
        let mut s = 0.0;
        for a in 0..nr {
            let rho = (a as f64 + 0.5) * r / nr as f64;
            for b in 0..nt {
                let th = (b as f64 + 0.5) * 2.0 * PI / nt as f64;
                s += grad2(rho, th) * rho;
            }
        }
        s * (r / nr as f64) * (2.0 * PI / nt as f64)
    }

    #[test]
    fn energy_of_linear_and_constant_fields() {
        let g = grid(129);
        let x1 = ScalarField::from_fn(g.clone(), |x, _| x);
        let c = ScalarField::from_fn(g.clone(), |_, _| 3.0);
        for r in [16.0 * g.h(), 0.3, 0.6] {
            let d = dirichlet_energy(&x1, r).unwrap();
            assert!((d / (PI * r * r) - 1.0).abs() < 0.02, "r={r} D={d}");
            assert_eq!(dirichlet_energy(&c, r).unwrap(), 0.0);
            let b = acf_beta(&x1, r).unwrap();
            assert!((b / (PI * r) - 1.0).abs() < 0.02);
        }
        assert!(dirichlet_energy(&x1, 2.0 * g.h()).is_err());
        assert!(dirichlet_energy(&x1, 0.99).is_err());
    }

    #[test]
    fn energy_of_square_root_profile_matches_radial_quadrature() {
        // |∇(r^{1/2} cos(θ/2))|² = 1/(4ρ): D(r) = π r / 2.
        let oracle = polar_quadrature(0.4, |rho, _| 0.25 / rho);
        assert!((oracle - PI * 0.4 / 2.0).abs() < 1e-9);
        let g = grid(257);
        let u = ScalarField::from_fn(g, ClosedForm::MixedExact.eval_fn());
        let d = dirichlet_energy(&u, 0.4).unwrap();
        assert!((d / oracle - 1.0).abs() < 0.02, "{d} vs {oracle}");
    }

    #[test]
    fn circle_quadrature_calibration() {
        let g = grid(129);
        let one = ScalarField::from_fn(g.clone(), |_, _| 1.0);
        let x1 = ScalarField::from_fn(g.clone(), |x, _| x);
        for r in default_radii(&one) {
            let h = boundary_l2(&one, r).unwrap();
            assert!((h / (2.0 * PI * r) - 1.0).abs() < 1e-3);
            let c = circle_integrals(&x1, ORIGIN, r).unwrap();
            assert!((c.normal2 / (PI * r) - 1.0).abs() < 0.01);
        }
        assert!(boundary_l2(&one, 4.0 * g.h()).is_err());
    }

    #[test]
    fn boundary_l2_of_homogeneous_fields() {
        let g = grid(257);
        for kappa in [0.5, 1.5, 2.0] {
            let f = ClosedForm::Homogeneous {
                kappa,
                sign: Sign::Plus,
            };
            let u = ScalarField::from_fn(g.clone(), f.eval_fn());
            for r in [16.0 * g.h(), 0.2, 0.5] {
                let h = boundary_l2(&u, r).unwrap();
                let exact = PI * r.powf(2.0 * kappa + 1.0);
                assert!((h / exact - 1.0).abs() < 0.01, "kappa={kappa} r={r}");
            }
        }
    }

    #[test]
    fn almgren_of_homogeneous_fields() {
        let g = grid(257);
        let x1 = ScalarField::from_fn(g.clone(), |x, _| x);
        let sq = ScalarField::from_fn(g.clone(), ClosedForm::MixedExact.eval_fn());
        let radii = default_radii(&x1);
        for &r in &radii {
            assert!((almgren_n(&x1, r).unwrap() - 1.0).abs() < 0.02);
            assert!((almgren_n(&sq, r).unwrap() - 0.5).abs() < 0.02, "r={r} N={}", almgren_n(&sq, r).unwrap());
        }
        let zero = ScalarField::zeros(g);
        assert!(matches!(almgren_n(&zero, 0.3), Err(Error::Undefined(_))));
    }

    #[test]
    fn rellich_and_green_on_reference_fields() {
        let g = grid(257);
        for kappa in [0.5, 1.0, 2.0, 2.5] {
            let u = ScalarField::from_fn(
                g.clone(),
                ClosedForm::Homogeneous {
                    kappa,
                    sign: Sign::Plus,
                }
                .eval_fn(),
            );
            for r in [0.1, 0.3, 0.5] {
                assert!(rellich_defect(&u, r).unwrap().abs() < 1e-3, "kappa={kappa} r={r} d={}", rellich_defect(&u, r).unwrap());
            }
        }
        let x2 = ScalarField::from_fn(g.clone(), |_, y| y);
        let x1 = ScalarField::from_fn(g.clone(), |x, _| x);
        for r in [0.1, 0.3, 0.5] {
            assert!(rellich_defect(&x2, r).unwrap().abs() < 1e-4);
            assert!(green_defect(&x1, r).unwrap().abs() < 2e-2);
        }
        // Non-harmonic control: u = x1², defect (4 − 6)/4.
        let sq = ScalarField::from_fn(g.clone(), |x, _| x * x);
        assert!((rellich_defect(&sq, 0.3).unwrap() + 0.5).abs() < 1e-2);
        let zero = ScalarField::zeros(g);
        assert_eq!(green_defect(&zero, 0.3).unwrap(), 0.0);
        assert_eq!(rellich_defect(&zero, 0.3).unwrap(), 0.0);
    }

    #[test]
    fn holder_fits_of_sampled_closed_forms() {
        let g = grid(257);
        let h = g.h();
        let o = g.origin();
        let cases: [(Box<dyn Fn(f64, f64) -> f64 + Sync>, f64, f64); 3] = [
            (Box::new(ClosedForm::HAlpha(2.0 / 3.0).eval_fn()), 2.0 / 3.0, 0.01),
            (Box::new(|x: f64, y: f64| x.hypot(y)), 1.0, 0.01),
            (Box::new(|x: f64, y: f64| x * x - y * y), 2.0, 0.02),
        ];
        for (f, expected, tol) in cases {
            let u = ScalarField::from_fn(g.clone(), f);
            let fit = holder_fit(&u, o, 8.0 * h, 0.25, 16).unwrap();
            assert!((fit.exponent - expected).abs() < tol, "{fit:?}");
        }
        let u = ScalarField::from_fn(g.clone(), |x, _| x);
        assert!(holder_fit(&u, o, 2.0 * h, 0.25, 8).is_err());
        let flat = ScalarField::zeros(g);
        assert!(holder_fit(&flat, o, 8.0 * h, 0.25, 8).is_err());
    }

    #[test]
    fn homogeneous_fields_have_flat_frequency() {
        let g = grid(257);
        for kappa in [0.5, 1.0, 1.5, 2.0] {
            let u = ScalarField::from_fn(
                g.clone(),
                ClosedForm::Homogeneous {
                    kappa,
                    sign: Sign::Plus,
                }
                .eval_fn(),
            );
            let p = frequency_profile(&u, ORIGIN, &default_radii(&u)).unwrap();
            let n: Vec<f64> = p.n.iter().flatten().copied().collect();
            assert_eq!(n.len(), p.len());
            assert!(stdev(&n) < 1e-2, "kappa={kappa} stdev={}", stdev(&n));
        }
    }

    #[test]
    fn fit_radii_are_lattice_multiples() {
        let h = 1.0 / 128.0;
        let r = fit_radii(h, 8.0 * h, 0.25, 20);
        assert!(r.windows(2).all(|w| w[1] > w[0]));
        for v in &r {
            assert!(((v / h) - (v / h).round()).abs() < 1e-9);
        }
    }

    #[test]
    fn linear_fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys = [1.0, 3.0, 5.0, 7.0];
        let (b, a, rms) = linear_fit(&xs, &ys);
        assert!((b - 2.0).abs() < 1e-14 && (a - 1.0).abs() < 1e-14 && rms < 1e-14);
    }
}
