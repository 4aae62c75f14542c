//! Quick self-checks run by `eaptop verify`: finite-difference and
//! closed-form comparisons on small problems, a few seconds in total.

use nalgebra::{Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::driver::{build_actuator, ProblemConfig};
use crate::material::{chi, evaluate_design_point, EmiParams, MaterialPhase, PhaseTriplet, PointKinematics, PointResponse, EPS0};
use crate::mesh::{build_mesh, MeshSpec};
use crate::mma::{MmaParams, MmaState};
use crate::regularization::{build_filter, forward, project, ProjectionParams};
use crate::sensitivity::{IterationParams, Pipeline};

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, err: f64, tol: f64) -> CheckResult {
    CheckResult {
        name,
        passed: err.is_finite() && err < tol,
        detail: format!("error {err:.3e} (tolerance {tol:.0e})"),
    }
}

fn failed(name: &'static str, e: crate::Error) -> CheckResult {
    CheckResult {
        name,
        passed: false,
        detail: e.to_string(),
    }
}

pub fn run_all() -> Vec<CheckResult> {
    vec![
        constitutive(),
        dielectric(),
        filter_properties(),
        interpolation_symmetry(),
        mma_problems(),
        adjoint(),
    ]
}

fn response(t: &PhaseTriplet, r1: f64, r2: f64, f: &Matrix3<f64>, e: &Vector3<f64>) -> Option<PointResponse> {
    let kin = PointKinematics::new(*f, *e).ok()?;
    Some(evaluate_design_point(&kin, t, &EmiParams::initial(), r1, r2, true))
}

/// T, D and the three tangents against central differences.
fn constitutive() -> CheckResult {
    let name = "constitutive tangents vs central differences";
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let t = PhaseTriplet::default();
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let f = Matrix3::from_fn(|i, j| if i == j { 1.0 } else { 0.0 } + rng.random_range(-0.2..0.2));
        if f.determinant() < 0.5 {
            continue;
        }
        let e = Vector3::from_fn(|_, _| rng.random_range(-2000.0..2000.0));
        let (r1, r2) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        let Some(r) = response(&t, r1, r2, &f, &e) else {
            return CheckResult {
                name,
                passed: false,
                detail: "inverted state".into(),
            };
        };
        let h = 1e-6;
        let mut err = 0.0f64;
        for c in 0..9 {
            let (i, j) = (c / 3, c % 3);
            let mut fp = f;
            let mut fm = f;
            fp[(i, j)] += h;
            fm[(i, j)] -= h;
            let (p, m) = (response(&t, r1, r2, &fp, &e).unwrap(), response(&t, r1, r2, &fm, &e).unwrap());
            err = err.max(((p.omega - m.omega) / (2.0 * h) - r.stress[(i, j)]).abs() / r.stress.norm());
            for d in 0..9 {
                let fd = (p.stress[(d / 3, d % 3)] - m.stress[(d / 3, d % 3)]) / (2.0 * h);
                err = err.max((fd - r.d_mec[(d, c)]).abs() / r.d_mec.norm());
            }
        }
        // Ω is quadratic in E, so central differences in E are exact up to
        // roundoff for any step
        let he = 10.0;
        for a in 0..3 {
            let mut ep = e;
            let mut em = e;
            ep[a] += he;
            em[a] -= he;
            let (p, m) = (response(&t, r1, r2, &f, &ep).unwrap(), response(&t, r1, r2, &f, &em).unwrap());
            err = err.max((-(p.omega - m.omega) / (2.0 * he) - r.d[a]).abs() / r.d.norm());
            for b in 0..3 {
                let fd = (p.d[b] - m.d[b]) / (2.0 * he);
                err = err.max((fd + r.d_elt[(b, a)]).abs() / r.d_elt.norm());
            }
            for c in 0..9 {
                let fd = (p.stress[(c / 3, c % 3)] - m.stress[(c / 3, c % 3)]) / (2.0 * he);
                err = err.max((fd - r.d_mix[(a, c)]).abs() / r.d_mix.norm());
            }
        }
        worst = worst.max(err);
    }
    check(name, worst, 1e-6)
}

fn dielectric() -> CheckResult {
    let e = Vector3::new(3.0, -1.5, 0.5);
    let kin = PointKinematics::new(Matrix3::identity(), e).unwrap();
    let r = crate::material::evaluate_solid(&kin, &MaterialPhase::eap(), EPS0);
    let expected = EPS0 * (4.7 + 1.0) * e;
    check("EAP at F = I: D = eps0 (eps_r + 1) E", (r.d - expected).norm() / expected.norm(), 1e-12)
}

fn filter_properties() -> CheckResult {
    let name = "filter conservation and constant fixed point";
    let mesh = match build_mesh(&MeshSpec {
        design_nx: 12,
        design_ny: 12,
        freespace_extent_factor: 1.0,
        ..MeshSpec::default()
    }) {
        Ok(m) => m,
        Err(e) => return failed(name, e),
    };
    let op = match build_filter(&mesh, 0.25) {
        Ok(op) => op,
        Err(e) => return failed(name, e),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let rho: Vec<f64> = (0..mesh.n_design()).map(|_| rng.random_range(0.0..1.0)).collect();
    let nodal = op.apply(&rho).unwrap();
    let w = op.gauss_weights();
    let raw: f64 = rho.iter().zip(w).map(|(r, w)| r * w.iter().sum::<f64>()).sum();
    let conservation = (op.integrate_nodal(&nodal) - raw).abs() / raw;
    let constant = op.apply(&vec![0.37; mesh.n_design()]).unwrap();
    let fixed = constant.iter().fold(0.0f64, |m, v| m.max((v - 0.37).abs()));
    let p = ProjectionParams { beta: 8.0, eta: 0.5 };
    let ends = (project(0.0, &p) - 0.0).abs() + (project(1.0, &p) - 1.0).abs();
    let state = forward(&op, &rho, &p).unwrap();
    let bounded = state.bar.iter().flatten().all(|&v| (0.0..=1.0).contains(&v));
    let mut r = check(name, conservation.max(fixed / 1e-2).max(ends), 1e-10);
    r.passed &= bounded;
    r
}

fn interpolation_symmetry() -> CheckResult {
    let mut worst = 0.0f64;
    for q in [-8.0, -2.0, 0.5, 3.0, 8.0] {
        for k in 0..=20 {
            let x = k as f64 / 20.0;
            worst = worst.max((chi(q, x) - (1.0 - chi(-q, 1.0 - x))).abs());
        }
    }
    check("interpolation symmetry chi_q(x) = 1 - chi_-q(1-x)", worst, 1e-14)
}

fn mma_problems() -> CheckResult {
    let p = MmaParams::default();
    let mut s = MmaState::new(vec![0.9], vec![0.0], vec![1.0]).unwrap();
    for _ in 0..30 {
        let x = s.x[0];
        if s.update(&p, (x - 0.3).powi(2), &[2.0 * (x - 0.3)], &[], &[]).is_err() {
            return check("MMA analytic problems", f64::NAN, 1e-4);
        }
    }
    let e1 = (s.x[0] - 0.3).abs();
    let mut s = MmaState::new(vec![0.5, 0.2], vec![0.0; 2], vec![1.0; 2]).unwrap();
    for _ in 0..60 {
        let (a, b) = (s.x[0], s.x[1]);
        if s.update(&p, -a - b, &[-1.0, -1.0], &[a + b - 1.0], &[vec![1.0, 1.0]]).is_err() {
            return check("MMA analytic problems", f64::NAN, 1e-4);
        }
    }
    let e2 = (s.x[0] + s.x[1] - 1.0).abs();
    check("MMA analytic problems", e1.max(e2), 1e-4)
}

/// Adjoint gradient against central differences on a 4x4 actuator.
fn adjoint() -> CheckResult {
    let name = "adjoint gradient vs central differences";
    let mut cfg = ProblemConfig::default();
    cfg.mesh.design_nx = 4;
    cfg.mesh.design_ny = 4;
    cfg.mesh.freespace_extent_factor = 2.0;
    cfg.source_patch_length = 0.2;
    let act = match build_actuator(&cfg) {
        Ok(a) => a,
        Err(e) => return failed(name, e),
    };
    let pipe = Pipeline {
        problem: &act.problem,
        filter: &act.filter,
        triplet: cfg.materials,
        stabilized_electric: true,
        objective: act.objective.clone(),
        fractions: cfg.volume_fractions,
    };
    let params = IterationParams {
        projection: ProjectionParams { beta: 2.0, eta: 0.5 },
        emi: EmiParams::initial(),
        penalty: cfg.schedule.penalty(0, 0.5),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = act.mesh.n_design();
    let r1: Vec<f64> = (0..n).map(|_| rng.random_range(0.4..1.0)).collect();
    let r2: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..0.9)).collect();
    let base = match pipe.evaluate(&r1, &r2, &params, None, true) {
        Ok(b) => b,
        Err(e) => return failed(name, e),
    };
    let g = base.gradients.as_ref().unwrap();
    let scale = g.d_g0_rho1.iter().chain(&g.d_g0_rho2).fold(0.0f64, |a, b| a.max(b.abs()));
    let h = 1e-5;
    let mut worst = 0.0f64;
    for &i in &[1usize, 6, 11] {
        for field in 0..2 {
            let value = |s: f64| {
                let (mut a, mut b) = (r1.clone(), r2.clone());
                if field == 0 { a[i] += s } else { b[i] += s }
                pipe.evaluate(&a, &b, &params, Some(&base.state), false).map(|e| e.g0_bar)
            };
            let (Ok(p), Ok(m)) = (value(h), value(-h)) else {
                return check(name, f64::NAN, 1e-4);
            };
            let fd = (p - m) / (2.0 * h);
            let an = if field == 0 { g.d_g0_rho1[i] } else { g.d_g0_rho2[i] };
            worst = worst.max((fd - an).abs() / an.abs().max(1e-3 * scale));
        }
    }
    check(name, worst, 1e-4)
}
