//! Density regularization: Helmholtz PDE filter over the design domain,
//! smooth Heaviside projection at Gauss points, the intermediate-density
//! penalty, and back-propagation of sensitivities through the chain.

mod filter;

use serde::{Deserialize, Serialize};

pub use filter::{build_filter, FilterOperator};

use crate::error::{Error, Result};
use crate::shape::GAUSS_POINTS;

/// Per-element Gauss point values.
pub type GaussField = Vec<[f64; GAUSS_POINTS]>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectionParams {
    pub beta: f64,
    pub eta: f64,
}

impl ProjectionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::InvalidParameter(format!("bad projection parameters {self:?}")));
        }
        Ok(())
    }
}

/// H(ρ̃) = (tanh βη + tanh β(ρ̃−η)) / (tanh βη + tanh β(1−η)).
pub fn project(rho_tilde: f64, p: &ProjectionParams) -> f64 {
    let a = (p.beta * p.eta).tanh();
    let den = a + (p.beta * (1.0 - p.eta)).tanh();
    if rho_tilde == 1.0 {
        return 1.0;
    }
    (a + (p.beta * (rho_tilde - p.eta)).tanh()) / den
}

pub fn project_derivative(rho_tilde: f64, p: &ProjectionParams) -> f64 {
    let den = (p.beta * p.eta).tanh() + (p.beta * (1.0 - p.eta)).tanh();
    let t = (p.beta * (rho_tilde - p.eta)).tanh();
    p.beta * (1.0 - t * t) / den
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PenaltyParams {
    pub a_d: f64,
    pub alpha: f64,
    pub delta: f64,
}

impl PenaltyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a_d >= 0.0 && self.alpha > 0.0 && self.alpha <= 1.0 && self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidParameter(format!("bad penalty parameters {self:?}")));
        }
        Ok(())
    }
}

/// 4^α (ρ̄+δ)^α (1−ρ̄+δ)^α
pub fn penalty_integrand(rho_bar: f64, alpha: f64, delta: f64) -> f64 {
    (4.0 * (rho_bar + delta) * (1.0 - rho_bar + delta)).powf(alpha)
}

pub fn penalty_integrand_derivative(rho_bar: f64, alpha: f64, delta: f64) -> f64 {
    let a = rho_bar + delta;
    let b = 1.0 - rho_bar + delta;
    alpha * penalty_integrand(rho_bar, alpha, delta) * (1.0 / a - 1.0 / b)
}

/// Penalty of one field normalized by the design volume (the a_d scale is
/// applied by the caller).
pub fn penalty(op: &FilterOperator, rho_bar: &[[f64; GAUSS_POINTS]], p: &PenaltyParams) -> f64 {
    let mut s = 0.0;
    for (w, r) in op.gauss_weights().iter().zip(rho_bar) {
        for g in 0..GAUSS_POINTS {
            s += w[g] * penalty_integrand(r[g], p.alpha, p.delta);
        }
    }
    s / op.design_volume()
}

pub fn penalty_gradient(op: &FilterOperator, rho_bar: &[[f64; GAUSS_POINTS]], p: &PenaltyParams) -> GaussField {
    let v = op.design_volume();
    op.gauss_weights()
        .iter()
        .zip(rho_bar)
        .map(|(w, r)| std::array::from_fn(|g| w[g] * penalty_integrand_derivative(r[g], p.alpha, p.delta) / v))
        .collect()
}

/// Forward state of one density field.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    /// Element design variables.
    pub rho: Vec<f64>,
    /// Filtered nodal field on the design nodes.
    pub nodal: Vec<f64>,
    /// Filtered field at Gauss points before projection (clamped to [0, 1]).
    pub tilde: GaussField,
    /// Projected physical density at Gauss points.
    pub bar: GaussField,
}

pub fn forward(op: &FilterOperator, rho: &[f64], proj: &ProjectionParams) -> Result<FieldState> {
    let nodal = op.apply(rho)?;
    let tilde: GaussField = op
        .interpolate(&nodal)
        .into_iter()
        .map(|t| t.map(|x| x.clamp(0.0, 1.0)))
        .collect();
    let bar = tilde.iter().map(|t| t.map(|x| project(x, proj))).collect();
    Ok(FieldState {
        rho: rho.to_vec(),
        nodal,
        tilde,
        bar,
    })
}

/// Maps d(output)/dρ̄ at Gauss points to d(output)/dρ per design element.
pub fn backprop(
    op: &FilterOperator,
    proj: &ProjectionParams,
    state: &FieldState,
    grad_bar: &[[f64; GAUSS_POINTS]],
) -> Result<Vec<f64>> {
    if grad_bar.len() != op.n_elements() {
        return Err(Error::DimensionMismatch {
            what: "Gauss point gradient",
            expected: op.n_elements(),
            got: grad_bar.len(),
        });
    }
    let raw = op.interpolate(&state.nodal);
    let grad_tilde: GaussField = grad_bar
        .iter()
        .zip(&raw)
        .map(|(g, t)| {
            std::array::from_fn(|q| {
                // the clamp has zero slope outside [0, 1]
                if (0.0..=1.0).contains(&t[q]) {
                    g[q] * project_derivative(t[q], proj)
                } else {
                    0.0
                }
            })
        })
        .collect();
    let nodal = op.interpolate_transpose(&grad_tilde);
    op.apply_transpose(&nodal)
}

/// Both density fields of the design.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignState {
    pub rho1: FieldState,
    pub rho2: FieldState,
}

impl DesignState {
    pub fn new(op: &FilterOperator, rho1: &[f64], rho2: &[f64], proj: &ProjectionParams) -> Result<Self> {
        Ok(DesignState {
            rho1: forward(op, rho1, proj)?,
            rho2: forward(op, rho2, proj)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_fixed_points() {
        for beta in [1.0, 3.7, 20.0] {
            let p = ProjectionParams { beta, eta: 0.5 };
            assert!((project(0.5, &p) - 0.5).abs() < 1e-15);
            assert_eq!(project(1.0, &p), 1.0);
            assert_eq!(project(0.0, &p), 0.0);
        }
    }

    #[test]
    fn projection_closed_form() {
        // tanh(0.5) = 0.46211715726000974, tanh(0.25) = 0.24491866240370913
        let expected = (0.462_117_157_260_009_74 + 0.244_918_662_403_709_13) / (2.0 * 0.462_117_157_260_009_74);
        let v = project(0.75, &ProjectionParams { beta: 1.0, eta: 0.5 });
        assert!((v - expected).abs() < 1e-15);
        assert!((v - 0.764_996_287_798_405_5).abs() < 1e-12);
    }

    #[test]
    fn projection_derivative_matches_difference() {
        let p = ProjectionParams { beta: 6.0, eta: 0.4 };
        for x in [0.1, 0.4, 0.77] {
            let h = 1e-6;
            let fd = (project(x + h, &p) - project(x - h, &p)) / (2.0 * h);
            assert!((fd - project_derivative(x, &p)).abs() < 1e-8 * fd.abs());
        }
    }

    #[test]
    fn penalty_integrand_values() {
        assert!((penalty_integrand(0.5, 0.3, 1e-12) - 1.0).abs() < 1e-11);
        let d = 1e-9;
        assert!((penalty_integrand(0.0, 1.0, d) - 4.0 * d * (1.0 + d)).abs() < 1e-24);
        assert_eq!(penalty_integrand(0.0, 0.7, d), penalty_integrand(1.0, 0.7, d));
        assert_eq!(penalty_integrand_derivative(0.5, 0.7, d), 0.0);
    }

    #[test]
    fn penalty_integrand_derivative_matches_difference() {
        for (x, a) in [(0.2, 0.9), (0.7, 0.1), (0.95, 0.5)] {
            let h = 1e-7;
            let fd = (penalty_integrand(x + h, a, 1e-9) - penalty_integrand(x - h, a, 1e-9)) / (2.0 * h);
            assert!((fd - penalty_integrand_derivative(x, a, 1e-9)).abs() < 1e-6 * fd.abs());
        }
    }
}
