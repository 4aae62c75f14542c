//! Exponential material interpolation (EMI).

use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use super::{MaterialPhase, PhaseTriplet};

static CLAMP_EVENTS: AtomicU64 = AtomicU64::new(0);

/// Number of times `chi` received a density marginally outside [0, 1].
pub fn chi_clamp_events() -> u64 {
    CLAMP_EVENTS.load(Ordering::Relaxed)
}

fn clamp_density(rho: f64) -> f64 {
    if (0.0..=1.0).contains(&rho) {
        return rho;
    }
    CLAMP_EVENTS.fetch_add(1, Ordering::Relaxed);
    rho.clamp(0.0, 1.0)
}

/// χ_q(ρ̄) = (e^{qρ̄} − 1) / (e^q − 1).
///
/// `q = 0` returns the pointwise limit ρ̄.
pub fn chi(q: f64, rho: f64) -> f64 {
    let rho = clamp_density(rho);
    if q == 0.0 {
        return rho;
    }
    (q * rho).exp_m1() / q.exp_m1()
}

/// dχ_q/dρ̄ = q e^{qρ̄} / (e^q − 1).
pub fn chi_derivative(q: f64, rho: f64) -> f64 {
    let rho = clamp_density(rho);
    if q == 0.0 {
        return 1.0;
    }
    q * (q * rho).exp() / q.exp_m1()
}

/// Penalization exponents of one interpolation stage.
///
/// `m` drives the mechanical moduli K and G, `mel` the coupling permittivity
/// ε_r, and `el` the purely electric constant c_e.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmiParams {
    pub q1_m: f64,
    pub q1_mel: f64,
    pub q1_el: f64,
    pub q2_m: f64,
    pub q2_mel: f64,
    pub q2_el: f64,
}

impl EmiParams {
    /// Start of the continuation.
    pub fn initial() -> Self {
        EmiParams {
            q1_m: 1.0,
            q1_mel: 2.0,
            q1_el: 2.0,
            q2_m: -1.0,
            q2_mel: 2.0,
            q2_el: -2.0,
        }
    }

    /// Terminal values of the continuation.
    pub fn terminal() -> Self {
        EmiParams {
            q1_m: 4.0,
            q1_mel: 8.0,
            q1_el: 8.0,
            q2_m: -4.0,
            q2_mel: 8.0,
            q2_el: -8.0,
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        [self.q1_m, self.q1_mel, self.q1_el, self.q2_m, self.q2_mel, self.q2_el]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        EmiParams {
            q1_m: a[0],
            q1_mel: a[1],
            q1_el: a[2],
            q2_m: a[3],
            q2_mel: a[4],
            q2_el: a[5],
        }
    }
}

/// Value and the two partial derivatives of one interpolated constant.
///
/// Written as (1−χ1)ξ⁰ + χ1((1−χ2)ξ¹ + χ2ξ²), which equals the nested form
/// ξ⁰ + χ1(−ξ⁰ + ξ¹ + χ2(−ξ¹ + ξ²)) and hits each phase exactly at the corners.
fn blend(q1: f64, q2: f64, x0: f64, x1: f64, x2: f64, r1: f64, r2: f64) -> (f64, f64, f64) {
    let c1 = chi(q1, r1);
    let c2 = chi(q2, r2);
    let solid = (1.0 - c2) * x1 + c2 * x2;
    let value = (1.0 - c1) * x0 + c1 * solid;
    let d1 = chi_derivative(q1, r1) * (solid - x0);
    let d2 = c1 * chi_derivative(q2, r2) * (x2 - x1);
    (value, d1, d2)
}

pub fn interpolate_phase(triplet: &PhaseTriplet, emi: &EmiParams, rho1: f64, rho2: f64) -> MaterialPhase {
    interpolate_phase_with_derivatives(triplet, emi, rho1, rho2).0
}

/// Interpolated phase and its derivatives with respect to ρ̄1 and ρ̄2.
pub fn interpolate_phase_with_derivatives(
    triplet: &PhaseTriplet,
    emi: &EmiParams,
    rho1: f64,
    rho2: f64,
) -> (MaterialPhase, MaterialPhase, MaterialPhase) {
    let (v, e, s) = (&triplet.void, &triplet.electrode, &triplet.eap);
    let k = blend(emi.q1_m, emi.q2_m, v.bulk, e.bulk, s.bulk, rho1, rho2);
    let g = blend(emi.q1_m, emi.q2_m, v.shear, e.shear, s.shear, rho1, rho2);
    let er = blend(emi.q1_mel, emi.q2_mel, v.eps_r, e.eps_r, s.eps_r, rho1, rho2);
    let ce = blend(emi.q1_el, emi.q2_el, v.c_e, e.c_e, s.c_e, rho1, rho2);
    let phase = |pick: fn(&(f64, f64, f64)) -> f64| MaterialPhase {
        bulk: pick(&k),
        shear: pick(&g),
        eps_r: pick(&er),
        c_e: pick(&ce),
    };
    (phase(|t| t.0), phase(|t| t.1), phase(|t| t.2))
}
