//! Energy density, stresses and analytic tangents at a quadrature point.
//!
//! The free energy
//!
//! Ω = ½K(J−1)² + ½G(J^{-2/3} tr C − 3) − ½ε0 ε_r J E·C⁻¹E + c_e E·E
//!
//! is linear in the four constants (K, G, ε_r, c_e). Each of the four terms is
//! evaluated once with a unit coefficient and the response of any phase is
//! their weighted sum; the same terms give the derivatives with respect to
//! the design densities.
//!
//! Voigt ordering of F and of the first Piola stress T is row-major,
//! index `3 i + J` for component (i, J). With D = −∂Ω/∂E the tangents are
//! D_mec = ∂²Ω/∂F∂F, D_mix = ∂²Ω/∂E∂F and D_elt = ∂²Ω/∂E∂E.

use nalgebra::{Matrix3, SMatrix, Vector3};

use super::{emi::interpolate_phase_with_derivatives, EmiParams, MaterialPhase, PhaseTriplet};
use crate::error::{Error, Result};

pub type Matrix9 = SMatrix<f64, 9, 9>;
pub type Matrix3x9 = SMatrix<f64, 3, 9>;

#[inline]
fn v9(i: usize, j: usize) -> usize {
    3 * i + j
}

#[derive(Debug, Clone, Copy)]
pub struct PointKinematics {
    pub f: Matrix3<f64>,
    pub e: Vector3<f64>,
    pub j: f64,
    pub c: Matrix3<f64>,
    pub f_inv: Matrix3<f64>,
}

impl PointKinematics {
    pub fn new(f: Matrix3<f64>, e: Vector3<f64>) -> Result<Self> {
        let j = f.determinant();
        if !(j > 0.0) || !j.is_finite() {
            return Err(Error::NonPositiveJacobian(j));
        }
        let f_inv = f.try_inverse().ok_or(Error::NonPositiveJacobian(j))?;
        Ok(PointKinematics {
            f,
            e,
            j,
            c: f.transpose() * f,
            f_inv,
        })
    }

    /// Isochoric right Cauchy-Green tensor J^{-2/3} C.
    pub fn c_bar(&self) -> Matrix3<f64> {
        self.c * self.j.powf(-2.0 / 3.0)
    }
}

/// One unit-coefficient energy term and its derivatives.
#[derive(Debug, Clone, Copy)]
pub struct EnergyTerm {
    pub omega: f64,
    pub stress: Matrix3<f64>,
    pub d: Vector3<f64>,
    pub d_mec: Matrix9,
    pub d_mix: Matrix3x9,
    pub d_elt: Matrix3<f64>,
}

impl EnergyTerm {
    fn zero() -> Self {
        EnergyTerm {
            omega: 0.0,
            stress: Matrix3::zeros(),
            d: Vector3::zeros(),
            d_mec: Matrix9::zeros(),
            d_mix: Matrix3x9::zeros(),
            d_elt: Matrix3::zeros(),
        }
    }
}

/// Terms multiplying K, G, ε_r and c_e respectively.
#[derive(Debug, Clone, Copy)]
pub struct EnergyTerms {
    pub volumetric: EnergyTerm,
    pub isochoric: EnergyTerm,
    pub coupling: EnergyTerm,
    pub electric: EnergyTerm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointResponse {
    pub omega: f64,
    /// First Piola-type total stress.
    pub stress: Matrix3<f64>,
    /// Material electric displacement.
    pub d: Vector3<f64>,
    pub d_mec: Matrix9,
    pub d_mix: Matrix3x9,
    pub d_elt: Matrix3<f64>,
}

impl EnergyTerms {
    fn weights(phase: &MaterialPhase) -> [f64; 4] {
        [phase.bulk, phase.shear, phase.eps_r, phase.c_e]
    }

    fn terms(&self) -> [&EnergyTerm; 4] {
        [&self.volumetric, &self.isochoric, &self.coupling, &self.electric]
    }

    /// Full response of a phase, tangents included.
    pub fn combine(&self, phase: &MaterialPhase) -> PointResponse {
        let mut r = PointResponse {
            omega: 0.0,
            stress: Matrix3::zeros(),
            d: Vector3::zeros(),
            d_mec: Matrix9::zeros(),
            d_mix: Matrix3x9::zeros(),
            d_elt: Matrix3::zeros(),
        };
        for (w, t) in Self::weights(phase).into_iter().zip(self.terms()) {
            if w == 0.0 {
                continue;
            }
            r.omega += w * t.omega;
            r.stress += w * t.stress;
            r.d += w * t.d;
            r.d_mec += w * t.d_mec;
            r.d_mix += w * t.d_mix;
            r.d_elt += w * t.d_elt;
        }
        r
    }

    /// Energy, stress and displacement only. Also used with a phase holding
    /// derivatives of the constants, which gives ∂(Ω, T, D)/∂ρ̄.
    pub fn combine_first_order(&self, phase: &MaterialPhase) -> (f64, Matrix3<f64>, Vector3<f64>) {
        let mut omega = 0.0;
        let mut stress = Matrix3::zeros();
        let mut d = Vector3::zeros();
        for (w, t) in Self::weights(phase).into_iter().zip(self.terms()) {
            if w == 0.0 {
                continue;
            }
            omega += w * t.omega;
            stress += w * t.stress;
            d += w * t.d;
        }
        (omega, stress, d)
    }
}

/// Evaluates the four unit energy terms. Tangent fields stay zero when
/// `with_tangents` is false.
pub fn energy_terms(kin: &PointKinematics, eps0: f64, with_tangents: bool) -> EnergyTerms {
    let f = &kin.f;
    let fi = &kin.f_inv;
    let fit = fi.transpose();
    let j = kin.j;
    let i1 = kin.c.trace();
    let ci = fi * fit;
    let e = &kin.e;
    let w = fit * e;
    let v = fi * w;
    let s = w.dot(&w);

    let mut vol = EnergyTerm::zero();
    vol.omega = 0.5 * (j - 1.0) * (j - 1.0);
    vol.stress = (j - 1.0) * j * fit;

    let a = j.powf(-2.0 / 3.0);
    let mut iso = EnergyTerm::zero();
    iso.omega = 0.5 * (a * i1 - 3.0);
    iso.stress = a * (f - (i1 / 3.0) * fit);

    let ej = eps0 * j;
    let mut cpl = EnergyTerm::zero();
    cpl.omega = -0.5 * ej * s;
    cpl.stress = ej * (w * v.transpose() - 0.5 * s * fit);
    cpl.d = ej * v;

    let mut ele = EnergyTerm::zero();
    ele.omega = e.dot(e);
    ele.d = -2.0 * e;

    if with_tangents {
        for i in 0..3 {
            for jj in 0..3 {
                let r = v9(i, jj);
                for k in 0..3 {
                    for l in 0..3 {
                        let c = v9(k, l);
                        // ∂Finv_Jk/∂... pattern shared by every term
                        let cross = fi[(jj, k)] * fi[(l, i)];
                        vol.d_mec[(r, c)] = (2.0 * j - 1.0) * j * fit[(i, jj)] * fit[(k, l)] - (j - 1.0) * j * cross;
                        let delta = if i == k && jj == l { 1.0 } else { 0.0 };
                        iso.d_mec[(r, c)] = a
                            * (delta - (2.0 / 3.0) * (f[(i, jj)] * fit[(k, l)] + fit[(i, jj)] * f[(k, l)])
                                + (2.0 / 9.0) * i1 * fit[(i, jj)] * fit[(k, l)]
                                + (1.0 / 3.0) * i1 * cross);
                        cpl.d_mec[(r, c)] = cpl.stress[(i, jj)] * fit[(k, l)]
                            + ej * (w[k] * v[l] * fit[(i, jj)] + 0.5 * s * cross
                                - w[k] * fi[(l, i)] * v[jj]
                                - w[i] * fi[(jj, k)] * v[l]
                                - w[i] * w[k] * ci[(jj, l)]);
                    }
                }
            }
        }
        for aa in 0..3 {
            for k in 0..3 {
                for l in 0..3 {
                    cpl.d_mix[(aa, v9(k, l))] = -ej * (fit[(k, l)] * v[aa] - fi[(aa, k)] * v[l] - w[k] * ci[(aa, l)]);
                }
            }
        }
        cpl.d_elt = -ej * ci;
        ele.d_elt = 2.0 * Matrix3::identity();
    }

    EnergyTerms {
        volumetric: vol,
        isochoric: iso,
        coupling: cpl,
        electric: ele,
    }
}

pub fn evaluate_solid(kin: &PointKinematics, phase: &MaterialPhase, eps0: f64) -> PointResponse {
    energy_terms(kin, eps0, true).combine(phase)
}

/// Void response: Neo-Hookean with the void moduli and the decoupled vacuum
/// energy −½ε0 E·E.
pub fn evaluate_void(kin: &PointKinematics, bulk: f64, shear: f64, eps0: f64) -> PointResponse {
    let phase = MaterialPhase {
        bulk,
        shear,
        c_e: -0.5 * eps0,
        eps_r: 0.0,
    };
    energy_terms(kin, eps0, true).combine(&phase)
}

/// Triplet used in the interpolation. The unstabilized variant replaces the
/// void electric constants by the deformation-coupled vacuum (ε_r = 1, c_e = 0).
pub fn effective_triplet(triplet: &PhaseTriplet, stabilized_electric: bool) -> PhaseTriplet {
    let mut t = *triplet;
    if !stabilized_electric {
        t.void.eps_r = 1.0;
        t.void.c_e = 0.0;
    }
    t
}

pub fn evaluate_design_point(
    kin: &PointKinematics,
    triplet: &PhaseTriplet,
    emi: &EmiParams,
    rho1: f64,
    rho2: f64,
    stabilized_electric: bool,
) -> PointResponse {
    let t = effective_triplet(triplet, stabilized_electric);
    let (phase, _, _) = interpolate_phase_with_derivatives(&t, emi, rho1, rho2);
    energy_terms(kin, t.eps0, true).combine(&phase)
}
