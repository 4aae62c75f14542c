//! Constitutive response of the electro-active polymer, electrode and void
//! phases, and the three-phase exponential interpolation between them.
//!
//! Units throughout the crate are mm, N, V and MPa (N/mm²). The vacuum
//! permittivity in F/m equals N/V², a unit that does not involve length, so
//! its numerical value is unchanged in this system: with E in V/mm,
//! `EPS0 * |E|²` is directly a stress in MPa.

mod emi;
mod response;

use serde::{Deserialize, Serialize};

pub use emi::{chi, chi_clamp_events, chi_derivative, interpolate_phase, interpolate_phase_with_derivatives, EmiParams};
pub use response::{
    effective_triplet, energy_terms, evaluate_design_point, evaluate_solid, evaluate_void, EnergyTerm, EnergyTerms, Matrix3x9, Matrix9,
    PointKinematics, PointResponse,
};

/// Vacuum permittivity, N/V².
pub const EPS0: f64 = 8.854e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialPhase {
    /// Bulk modulus K (MPa).
    pub bulk: f64,
    /// Shear modulus G (MPa).
    pub shear: f64,
    /// Electric constant c_e (N/V²).
    pub c_e: f64,
    /// Relative permittivity ε_r of the coupled term.
    pub eps_r: f64,
}

impl MaterialPhase {
    pub fn eap() -> Self {
        MaterialPhase {
            bulk: 0.6,
            shear: 0.1,
            c_e: -0.5 * EPS0,
            eps_r: 4.7,
        }
    }

    pub fn electrode() -> Self {
        MaterialPhase {
            bulk: 0.6 * 10.0,
            shear: 0.1 * 10.0,
            c_e: -0.5 * EPS0 * 1e5,
            eps_r: 0.0,
        }
    }

    pub fn void() -> Self {
        MaterialPhase {
            bulk: 0.6e-9,
            shear: 0.1e-9,
            c_e: -0.5 * EPS0,
            eps_r: 0.0,
        }
    }

    pub fn validate(&self) -> crate::Result<()> {
        if !(self.bulk > 0.0 && self.shear > 0.0 && self.eps_r >= 0.0 && self.c_e.is_finite()) {
            return Err(crate::Error::InvalidParameter(format!("invalid material phase {self:?}")));
        }
        Ok(())
    }
}

/// Constants of the three phases addressed by the interpolation:
/// ρ̄1 = 0 is void, ρ̄1 = 1 solid; within solid ρ̄2 = 0 is electrode, ρ̄2 = 1 EAP.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseTriplet {
    pub void: MaterialPhase,
    pub electrode: MaterialPhase,
    pub eap: MaterialPhase,
    pub eps0: f64,
}

impl Default for PhaseTriplet {
    fn default() -> Self {
        PhaseTriplet {
            void: MaterialPhase::void(),
            electrode: MaterialPhase::electrode(),
            eap: MaterialPhase::eap(),
            eps0: EPS0,
        }
    }
}

impl PhaseTriplet {
    pub fn validate(&self) -> crate::Result<()> {
        self.void.validate()?;
        self.electrode.validate()?;
        self.eap.validate()?;
        if !(self.eps0 > 0.0) {
            return Err(crate::Error::InvalidParameter("eps0 must be positive".into()));
        }
        Ok(())
    }
}
