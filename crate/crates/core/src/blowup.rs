//! Almgren rescalings at the origin and classification of the blowup against
//! the admissible homogeneities `{1/2, 3/2, 5/2, …} ∪ {2, 4, 6}`.

use std::f64::consts::PI;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{self, FrequencyProfile, QUADRATURE_SAMPLES};
use crate::domain::ScalarField;
use crate::error::{Error, Result};
use crate::exact::{is_quarter_branch, polar, Sign};

/// Largest admissible homogeneity considered.
pub const KAPPA_MAX: f64 = 6.0;

/// Fit ring for the continuous exponent.
pub const RING: (f64, f64) = (0.25, 0.75);

/// Circle on which the profile residual is measured.
pub const PROFILE_RADIUS: f64 = 0.5;

/// Residual above which no candidate is accepted.
pub const UNCLASSIFIED_RESIDUAL: f64 = 0.5;

/// Smallest rescaling radius in grid spacings.
pub const MIN_RESCALE_SPACINGS: f64 = 16.0;

pub const MAX_RESCALE_RADIUS: f64 = 0.25;

/// `{1/2, 3/2, …, 11/2} ∪ {2, 4, 6}` in increasing order.
pub fn admissible_kappas() -> Vec<f64> {
    let mut k: Vec<f64> = (0..6).map(|m| m as f64 + 0.5).collect();
    k.extend([2.0, 4.0, 6.0]);
    k.sort_by(f64::total_cmp);
    k
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    HalfInteger,
    EvenInteger,
}

impl Branch {
    pub fn of(kappa: f64) -> Branch {
        if (kappa - kappa.floor() - 0.5).abs() < 1e-9 {
            Branch::HalfInteger
        } else {
            Branch::EvenInteger
        }
    }
}

/// Sign of the blowup profile for a nonpositive-contact solution:
/// `−r^κ cos(κθ)` on `κ ∈ 2ℕ₀ + 1/2`, `+r^κ cos(κθ)` otherwise.
pub fn expected_sign(kappa: f64) -> Sign {
    if is_quarter_branch(kappa) {
        Sign::Minus
    } else {
        Sign::Plus
    }
}

/// `u_r(x) = u(r x) / (H(r)/r)^{1/2}` on the grid of `u`.
#[derive(Debug, Clone)]
pub struct Rescaling {
    pub radius: f64,
    pub field: ScalarField,
    /// `‖u_r‖²_{L²(∂B₁)}` measured on the rescaled field.
    pub norm: f64,
}

pub fn rescale(u: &ScalarField, r: f64) -> Result<Rescaling> {
    let g = u.grid();
    let lo = MIN_RESCALE_SPACINGS * g.h();
    if !(r >= lo - 1e-12 && r <= MAX_RESCALE_RADIUS + 1e-12) {
        return Err(Error::OutOfRange(format!(
            "rescaling radius {r} outside [{lo}, {MAX_RESCALE_RADIUS}]"
        )));
    }
    let h = diagnostics::circle_integrals(u, diagnostics::ORIGIN, r)?.u2;
    if h <= diagnostics::H_FLOOR {
        return Err(Error::Undefined(format!("H({r}) = {h}: rescaling undefined")));
    }
    let scale = (h / r).sqrt();
    let values = (0..g.len())
        .map(|k| {
            let (x, y) = g.coords(k);
            u.sample(r * x, r * y)
                .map(|v| v / scale)
                .ok_or_else(|| Error::OutOfRange(format!("({}, {}) off the lattice", r * x, r * y)))
        })
        .collect::<Result<Vec<f64>>>()?;
    let field = ScalarField::from_values(g.clone(), values)?;
    let norm = unit_circle_l2(&field)?;
    Ok(Rescaling {
        radius: r,
        field,
        norm,
    })
}

fn unit_circle_l2(field: &ScalarField) -> Result<f64> {
    let m = QUADRATURE_SAMPLES;
    let mut s = 0.0;
    for k in 0..m {
        let t = 2.0 * PI * k as f64 / m as f64;
        let v = field
            .sample(t.cos(), t.sin())
            .ok_or_else(|| Error::OutOfRange("unit circle off the lattice".into()))?;
        s += v * v;
    }
    Ok(s * 2.0 * PI / m as f64)
}

/// Max-norm distance on `B_{1/2}` between the rescalings at `r` and `r/2`.
pub fn cauchy_distance(u: &ScalarField, r: f64) -> Result<f64> {
    let a = rescale(u, r)?;
    let b = rescale(u, 0.5 * r)?;
    let g = u.grid();
    Ok((0..g.len())
        .filter(|&k| {
            let (x, y) = g.coords(k);
            x.hypot(y) <= 0.5
        })
        .map(|k| (a.field.at(k) - b.field.at(k)).abs())
        .fold(0.0, f64::max))
}

/// Even part in `x₂`, taken node by node through the mirrored row.
pub fn even_part(u: &ScalarField) -> ScalarField {
    let g = u.grid();
    let n = g.n();
    let mut out = u.clone();
    for j in 0..n {
        for i in 0..n {
            let k = g.index(i, j);
            out.values_mut()[k] = 0.5 * (u.at(k) + u.at(g.index(i, n - 1 - j)));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub kappa: f64,
    pub amplitude: f64,
    pub residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupResult {
    /// Continuous least-squares exponent on the fit ring.
    pub kappa_hat: f64,
    /// Best admissible exponent; `None` when unclassified.
    pub kappa_admissible: Option<f64>,
    pub amplitude: f64,
    /// RMS of `u − b r^κ cos(κθ)` on `∂B_{1/2}` at the chosen candidate.
    pub profile_residual: f64,
    pub branch: Option<Branch>,
    pub sign: Sign,
    pub sign_consistent: bool,
    pub classified: bool,
    pub candidates: Vec<Candidate>,
}

impl BlowupResult {
    /// Ratio of the runner-up residual to the winning one.
    pub fn admissibility_gap(&self) -> f64 {
        let mut r: Vec<f64> = self.candidates.iter().map(|c| c.residual).collect();
        r.sort_by(f64::total_cmp);
        if r.len() < 2 {
            return f64::INFINITY;
        }
        r[1] / r[0].max(1e-300)
    }
}

/// Nodes of the fit ring as `(ρ, θ, value)` with the mirrored angle.
fn ring_samples(u: &ScalarField) -> Vec<(f64, f64, f64)> {
    let g = u.grid();
    (0..g.len())
        .filter_map(|k| {
            let (x, y) = g.coords(k);
            let (rho, theta) = polar(x, y);
            (rho >= RING.0 && rho <= RING.1).then(|| (rho, theta, u.at(k)))
        })
        .collect()
}

/// Least-squares amplitude and RMS residual of `b ρ^κ cos(κθ)`.
fn fit_amplitude(samples: &[(f64, f64, f64)], kappa: f64) -> (f64, f64) {
    let (mut sfv, mut sff) = (0.0, 0.0);
    for &(rho, theta, v) in samples {
        let f = rho.powf(kappa) * (kappa * theta).cos();
        sfv += f * v;
        sff += f * f;
    }
    let b = if sff > 0.0 { sfv / sff } else { 0.0 };
    let sse: f64 = samples
        .iter()
        .map(|&(rho, theta, v)| (v - b * rho.powf(kappa) * (kappa * theta).cos()).powi(2))
        .sum();
    (b, (sse / samples.len() as f64).sqrt())
}

fn circle_samples(u: &ScalarField, radius: f64) -> Result<Vec<(f64, f64, f64)>> {
    let m = QUADRATURE_SAMPLES;
    (0..m)
        .map(|k| {
            let t = 2.0 * PI * k as f64 / m as f64;
            let (x, y) = (radius * t.cos(), radius * t.sin());
            let (rho, theta) = polar(x, y);
            u.sample(x, y)
                .map(|v| (rho, theta, v))
                .ok_or_else(|| Error::OutOfRange("profile circle off the lattice".into()))
        })
        .collect()
}

/// Continuous exponent: coarse scan of the ring residual, then golden-section
/// refinement around the best scan point.
fn fit_kappa(samples: &[(f64, f64, f64)]) -> f64 {
    let step = 0.05;
    let grid: Vec<f64> = (0..=((KAPPA_MAX + 0.5 - 0.25) / step).round() as usize)
        .map(|i| 0.25 + i as f64 * step)
        .collect();
    let res: Vec<f64> = grid.par_iter().map(|&k| fit_amplitude(samples, k).1).collect();
    let best = (0..grid.len())
        .min_by(|&a, &b| res[a].total_cmp(&res[b]))
        .expect("nonempty scan");
    let (mut a, mut b) = (grid[best] - step, grid[best] + step);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let f = |k: f64| fit_amplitude(samples, k).1;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..60 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Classify a normalized rescaling through its even part in `x₂`.
pub fn classify(u_resc: &ScalarField) -> Result<BlowupResult> {
    let even = even_part(u_resc);
    let ring = ring_samples(&even);
    if ring.is_empty() {
        return Err(Error::Undefined("fit ring holds no nodes".into()));
    }
    let kappa_hat = fit_kappa(&ring);
    let profile = circle_samples(&even, PROFILE_RADIUS)?;
    let candidates: Vec<Candidate> = admissible_kappas()
        .into_iter()
        .map(|kappa| {
            let (amplitude, _) = fit_amplitude(&ring, kappa);
            let sse: f64 = profile
                .iter()
                .map(|&(rho, theta, v)| (v - amplitude * rho.powf(kappa) * (kappa * theta).cos()).powi(2))
                .sum();
            Candidate {
                kappa,
                amplitude,
                residual: (sse / profile.len() as f64).sqrt(),
            }
        })
        .collect();
    let best = *candidates
        .iter()
        .min_by(|a, b| a.residual.total_cmp(&b.residual))
        .expect("nonempty candidate set");
    let classified = best.residual <= UNCLASSIFIED_RESIDUAL;
    let sign = if best.amplitude < 0.0 { Sign::Minus } else { Sign::Plus };
    Ok(BlowupResult {
        kappa_hat,
        kappa_admissible: classified.then_some(best.kappa),
        amplitude: best.amplitude,
        profile_residual: best.residual,
        branch: classified.then(|| Branch::of(best.kappa)),
        sign,
        sign_consistent: classified && sign == expected_sign(best.kappa),
        classified,
        candidates,
    })
}

/// Profile on `∂B_{1/2}` against the chosen fit, for plotting.
pub fn write_profile_csv(u_resc: &ScalarField, result: &BlowupResult, path: &Path) -> Result<()> {
    let even = even_part(u_resc);
    let kappa = result.kappa_admissible.unwrap_or(result.kappa_hat);
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["angle", "value", "fit"])?;
    let m = QUADRATURE_SAMPLES;
    for k in 0..m {
        let t = 2.0 * PI * k as f64 / m as f64;
        let (x, y) = (PROFILE_RADIUS * t.cos(), PROFILE_RADIUS * t.sin());
        let (rho, theta) = polar(x, y);
        let v = even
            .sample(x, y)
            .ok_or_else(|| Error::OutOfRange("profile circle off the lattice".into()))?;
        let fit = result.amplitude * rho.powf(kappa) * (kappa * theta).cos();
        w.write_record([t.to_string(), v.to_string(), fit.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `N(0+)` estimated as the mean of `N` at the three smallest radii where
/// it is defined.
pub fn kappa_from_frequency(profile: &FrequencyProfile) -> Result<f64> {
    let mut pts: Vec<(f64, f64)> = profile
        .radii
        .iter()
        .zip(&profile.n)
        .filter_map(|(&r, n)| n.map(|v| (r, v)))
        .collect();
    if pts.len() < 3 {
        return Err(Error::Undefined(format!(
            "need 3 radii with defined N, have {}",
            pts.len()
        )));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(pts[..3].iter().map(|p| p.1).sum::<f64>() / 3.0)
}

/// Rescaling at the smallest reliable radius `16h`, its classification and
/// the Cauchy check between `32h` and `16h`. The check is skipped on grids
/// too coarse for `32h` to be a valid rescaling radius.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupAnalysis {
    pub radius: f64,
    pub norm: f64,
    pub result: BlowupResult,
    pub cauchy_radius: Option<f64>,
    pub cauchy_distance: Option<f64>,
}

pub fn analyze(u: &ScalarField) -> Result<(BlowupAnalysis, Rescaling)> {
    let h = u.grid().h();
    let r = MIN_RESCALE_SPACINGS * h;
    let resc = rescale(u, r)?;
    let result = classify(&resc.field)?;
    let cauchy_radius = (2.0 * r <= MAX_RESCALE_RADIUS + 1e-12).then_some(2.0 * r);
    let cauchy = cauchy_radius.map(|c| cauchy_distance(u, c)).transpose()?;
    Ok((
        BlowupAnalysis {
            radius: r,
            norm: resc.norm,
            result,
            cauchy_radius,
            cauchy_distance: cauchy,
        },
        resc,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Grid, GridSpec};
    use crate::exact::ClosedForm;
    use std::sync::Arc;

    fn grid(n: usize) -> Arc<Grid> {
        Grid::build(GridSpec::new(n).unwrap()).unwrap()
    }

    fn homogeneous(g: &Arc<Grid>, kappa: f64, sign: Sign) -> ScalarField {
        ScalarField::from_fn(g.clone(), ClosedForm::Homogeneous { kappa, sign }.eval_fn())
    }

    #[test]
    fn admissible_set() {
        assert_eq!(
            admissible_kappas(),
            vec![0.5, 1.5, 2.0, 2.5, 3.5, 4.0, 4.5, 5.5, 6.0]
        );
        assert_eq!(Branch::of(2.5), Branch::HalfInteger);
        assert_eq!(Branch::of(4.0), Branch::EvenInteger);
        assert_eq!(expected_sign(0.5), Sign::Minus);
        assert_eq!(expected_sign(1.5), Sign::Plus);
        assert_eq!(expected_sign(4.5), Sign::Minus);
    }

    #[test]
    fn square_root_profile_is_self_similar() {
        let g = grid(257);
        let u = ScalarField::from_fn(g.clone(), ClosedForm::MixedExact.eval_fn());
        let amp = 1.0 / PI.sqrt();
        for r in [16.0 * g.h(), 0.25] {
            let s = rescale(&u, r).unwrap();
            assert!((s.norm - 1.0).abs() < 1e-2, "norm {}", s.norm);
            for &(x, y) in &[(0.5, 0.0), (-0.3, 0.4), (0.1, -0.7)] {
                let k = g.nearest_node(x, y).unwrap();
                let (px, py) = g.coords(k);
                let exact = amp * ClosedForm::MixedExact.evaluate(px, py);
                assert!((s.field.at(k) - exact).abs() < 5e-3, "r={r} at ({px},{py})");
            }
        }
    }

    #[test]
    fn rescaling_ignores_positive_factors() {
        let g = grid(129);
        let u = homogeneous(&g, 1.5, Sign::Plus);
        let mut v = u.clone();
        v.values_mut().iter_mut().for_each(|x| *x *= 7.5);
        let a = rescale(&u, 0.25).unwrap();
        let b = rescale(&v, 0.25).unwrap();
        for (x, y) in a.field.values().iter().zip(b.field.values()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn rescale_rejects_bad_radii() {
        let g = grid(129);
        let u = homogeneous(&g, 1.5, Sign::Plus);
        assert!(rescale(&u, 8.0 * g.h()).is_err());
        assert!(rescale(&u, 0.3).is_err());
        let zero = ScalarField::zeros(g);
        assert!(matches!(rescale(&zero, 0.25), Err(Error::Undefined(_))));
    }

    #[test]
    fn exact_inputs_classify_with_gap() {
        let g = grid(257);
        for (kappa, sign) in [(0.5, Sign::Minus), (1.5, Sign::Plus), (2.0, Sign::Plus)] {
            let u = homogeneous(&g, kappa, sign);
            let s = rescale(&u, 0.25).unwrap();
            let res = classify(&s.field).unwrap();
            assert_eq!(res.kappa_admissible, Some(kappa));
            assert!(res.profile_residual <= 1e-3, "{res:?}");
            assert!((res.kappa_hat - kappa).abs() < 1e-2, "{res:?}");
            assert!(res.admissibility_gap() >= 10.0, "{res:?}");
            assert!(res.sign_consistent);
            assert_eq!(res.sign, sign);
        }
    }

    #[test]
    fn wrong_sign_is_flagged() {
        let g = grid(129);
        let u = ScalarField::from_fn(g.clone(), ClosedForm::MixedExact.eval_fn());
        let res = classify(&rescale(&u, 0.25).unwrap().field).unwrap();
        assert_eq!(res.kappa_admissible, Some(0.5));
        assert_eq!(res.branch, Some(Branch::HalfInteger));
        assert_eq!(res.sign, Sign::Plus);
        assert!(!res.sign_consistent);
    }

    #[test]
    fn noise_is_unclassified() {
        let g = grid(65);
        let u = ScalarField::from_fn(g.clone(), |x, y| {
            (37.0 * x).sin() * (53.0 * y).cos() * 3.0
        });
        let res = classify(&u).unwrap();
        assert!(!res.classified);
        assert_eq!(res.kappa_admissible, None);
    }

    #[test]
    fn odd_part_is_ignored() {
        let g = grid(129);
        let u = ScalarField::from_fn(g.clone(), |x, y| {
            ClosedForm::Homogeneous {
                kappa: 2.0,
                sign: Sign::Plus,
            }
            .evaluate(x, y)
                + 0.5 * y
        });
        let res = classify(&u).unwrap();
        assert_eq!(res.kappa_admissible, Some(2.0));
    }

    #[test]
    fn frequency_limit_uses_three_smallest_radii() {
        let g = grid(129);
        let u = ScalarField::from_fn(g.clone(), |x, _| x);
        let radii = diagnostics::default_radii(&u);
        let p = diagnostics::frequency_profile(&u, diagnostics::ORIGIN, &radii).unwrap();
        assert!((kappa_from_frequency(&p).unwrap() - 1.0).abs() < 0.05);
        let short = diagnostics::frequency_profile(&u, diagnostics::ORIGIN, &radii[..2]).unwrap();
        assert!(kappa_from_frequency(&short).is_err());
    }
}
