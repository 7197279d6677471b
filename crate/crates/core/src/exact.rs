//! Closed-form reference fields and barriers.
//!
//! Every form is written in the mirrored polar angle `θ = atan2(|x₂|, x₁)`,
//! `θ ∈ [0, π]`, so it is even in `x₂` and never touches the branch cut.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::domain::ObstacleRegion;
use crate::error::{config, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ClosedForm {
    /// `h_α = −r^α cos(αθ)`, α ∈ [1/2, 1].
    HAlpha(f64),
    /// `± r^κ cos(κθ)`.
    Homogeneous { kappa: f64, sign: Sign },
    /// `r^{1/2−ε} cos((1−ε)θ/2)`, ε ∈ (0, 1/2).
    Barrier(f64),
    /// `r^{1/2} cos(θ/2)`: harmonic in the upper half-disk, zero on the
    /// negative axis, vanishing normal derivative on the positive axis.
    MixedExact,
}

#[inline]
pub fn polar(x: f64, y: f64) -> (f64, f64) {
    (x.hypot(y), y.abs().atan2(x))
}

impl ClosedForm {
    pub fn h_alpha(alpha: f64) -> Result<Self> {
        if !(0.5..=1.0).contains(&alpha) {
            return Err(config(format!("h_alpha needs alpha in [1/2, 1], got {alpha}")));
        }
        Ok(ClosedForm::HAlpha(alpha))
    }

    /// Negative sign is only allowed on the branch `κ ∈ 2ℕ₀ + 1/2`.
    pub fn homogeneous(kappa: f64, sign: Sign) -> Result<Self> {
        if kappa <= 0.0 {
            return Err(config(format!("homogeneity {kappa} must be positive")));
        }
        if sign == Sign::Minus && !is_quarter_branch(kappa) {
            return Err(config(format!(
                "negative profile requires kappa in 2N0 + 1/2, got {kappa}"
            )));
        }
        Ok(ClosedForm::Homogeneous { kappa, sign })
    }

    pub fn barrier(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps < 0.5) {
            return Err(config(format!("barrier needs eps in (0, 1/2), got {eps}")));
        }
        Ok(ClosedForm::Barrier(eps))
    }

    /// Radial exponent and angular frequency `(a, b)` with form `c·r^a cos(bθ)`.
    fn exponents(&self) -> (f64, f64, f64) {
        match *self {
            ClosedForm::HAlpha(a) => (-1.0, a, a),
            ClosedForm::Homogeneous { kappa, sign } => (sign.factor(), kappa, kappa),
            ClosedForm::Barrier(e) => (1.0, 0.5 - e, 0.5 * (1.0 - e)),
            ClosedForm::MixedExact => (1.0, 0.5, 0.5),
        }
    }

    pub fn evaluate(&self, x: f64, y: f64) -> f64 {
        let (c, a, b) = self.exponents();
        let (r, theta) = polar(x, y);
        if r == 0.0 {
            return 0.0;
        }
        c * r.powf(a) * (b * theta).cos()
    }

    pub fn eval_fn(self) -> impl Fn(f64, f64) -> f64 + Send + Sync + Copy {
        move |x, y| self.evaluate(x, y)
    }

    /// Pointwise Laplacian. Zero for the harmonic forms away from the
    /// negative x₁-axis; the barrier follows `(a² − b²) r^{a−2} cos(bθ)`.
    pub fn laplacian(&self, x: f64, y: f64) -> Result<f64> {
        let (c, a, b) = self.exponents();
        let (r, theta) = polar(x, y);
        if r == 0.0 {
            return Err(Error::Undefined("laplacian at the origin".into()));
        }
        // The mirrored form has a kink across the negative axis unless
        // sin(bπ) vanishes.
        let on_cut = y == 0.0 && x < 0.0 && (b * PI).sin().abs() > 1e-12;
        if on_cut {
            return Err(Error::Undefined(format!(
                "distributional laplacian on the negative axis at x1={x}"
            )));
        }
        Ok(c * (a * a - b * b) * r.powf(a - 2.0) * (b * theta).cos())
    }

    /// `−Δh` for the barrier in the form it is usually quoted,
    /// `(ε/2 − 3ε²/4) r^{−3/2−ε} cos((1−ε)θ/2)`.
    pub fn barrier_source(eps: f64, x: f64, y: f64) -> f64 {
        let (r, theta) = polar(x, y);
        if r == 0.0 {
            return 0.0;
        }
        (eps / 2.0 - 0.75 * eps * eps) * r.powf(-1.5 - eps) * (0.5 * (1.0 - eps) * theta).cos()
    }
}

/// `κ ∈ 2ℕ₀ + 1/2`.
pub fn is_quarter_branch(kappa: f64) -> bool {
    let m = (kappa - 0.5) / 2.0;
    (m - m.round()).abs() < 1e-9 && m.round() >= 0.0
}

/// Cone on which `h_α` solves the zero-obstacle problem; half-angle
/// `π(1 − 1/(2α))`.
pub fn cone_for_alpha(alpha: f64) -> Result<ObstacleRegion> {
    if !(0.5..=1.0).contains(&alpha) {
        return Err(config(format!("cone needs alpha in [1/2, 1], got {alpha}")));
    }
    Ok(ObstacleRegion::Cone {
        half_angle: PI * (1.0 - 1.0 / (2.0 * alpha)),
    })
}
