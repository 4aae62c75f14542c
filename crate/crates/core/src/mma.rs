//! Method of moving asymptotes for
//!
//! ```text
//! min f0(x)  s.t.  f_i(x) <= 0, i = 1..m,  xmin <= x <= xmax
//! ```
//!
//! in the form with artificial variables y_i (z is dropped since a_i = 0):
//! min f0 + Σ (c_i y_i + ½ d_i y_i²) s.t. f_i − y_i <= 0, y >= 0.
//!
//! Constants:
//!
//! | name      | value  | role                                               |
//! |-----------|--------|----------------------------------------------------|
//! | `ghinit`  | 0.2    | initial asymptote distance, times the range        |
//! | `ghincr`  | 1.1    | gap expansion after monotone steps                 |
//! | `ghdecr`  | 0.7    | gap contraction after oscillating steps            |
//! | `gap_min` | 1e-4   | closest asymptote distance, times the range        |
//! | `gap_max` | 10     | farthest asymptote distance, times the range       |
//! | `albefa`  | 0.1    | subproblem bounds keep this fraction off asymptote |
//! | `move_limit` | 0.5 | largest step, times the range                      |
//! | `raa0`    | 1e-5   | regularization of the convex approximations        |
//! | `c`       | 1000   | linear cost of the artificial variables            |
//! | `d`       | 1      | quadratic cost of the artificial variables         |

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MmaParams {
    pub ghinit: f64,
    pub ghincr: f64,
    pub ghdecr: f64,
    pub gap_min: f64,
    pub gap_max: f64,
    pub albefa: f64,
    pub move_limit: f64,
    pub raa0: f64,
    pub c: f64,
    pub d: f64,
}

impl Default for MmaParams {
    fn default() -> Self {
        MmaParams {
            ghinit: 0.2,
            ghincr: 1.1,
            ghdecr: 0.7,
            gap_min: 1e-4,
            gap_max: 10.0,
            albefa: 0.1,
            move_limit: 0.5,
            raa0: 1e-5,
            c: 1000.0,
            d: 1.0,
        }
    }
}

impl MmaParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.ghinit > 0.0
            && self.ghdecr > 0.0
            && self.ghdecr < 1.0
            && self.ghincr > 1.0
            && self.gap_min > 0.0
            && self.gap_max > self.gap_min
            && self.albefa > 0.0
            && self.albefa < 1.0
            && self.move_limit > 0.0
            && self.raa0 > 0.0
            && self.c >= 0.0
            && self.d > 0.0;
        if !ok {
            return Err(Error::InvalidParameter(format!("bad MMA parameters {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmaState {
    pub x: Vec<f64>,
    pub x_old1: Vec<f64>,
    pub x_old2: Vec<f64>,
    pub low: Vec<f64>,
    pub upp: Vec<f64>,
    pub xmin: Vec<f64>,
    pub xmax: Vec<f64>,
    /// Completed updates.
    pub iteration: usize,
}

/// Result of one update.
#[derive(Debug, Clone, PartialEq)]
pub struct MmaStep {
    /// Multipliers of the subproblem constraints.
    pub lambda: Vec<f64>,
    /// Artificial variables; nonzero when a constraint could not be met.
    pub y: Vec<f64>,
    /// Largest |Δx|.
    pub change: f64,
}

/// Separable convex approximation around the current iterate:
/// f̃_i(x) = Σ_j p_ij/(U_j − x_j) + q_ij/(x_j − L_j) + r_i.
#[derive(Debug, Clone)]
pub struct Subproblem {
    pub low: Vec<f64>,
    pub upp: Vec<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Row 0 is the objective.
    pub p: Vec<Vec<f64>>,
    pub q: Vec<Vec<f64>>,
    pub r: Vec<f64>,
    c: f64,
    d: f64,
}

impl Subproblem {
    pub fn m(&self) -> usize {
        self.r.len() - 1
    }

    /// Values and gradients of all approximations at x.
    pub fn approximations(&self, x: &[f64]) -> (Vec<f64>, Vec<Vec<f64>>) {
        let mut val = self.r.clone();
        let mut grad = vec![vec![0.0; x.len()]; self.r.len()];
        for i in 0..self.r.len() {
            for j in 0..x.len() {
                let u = self.upp[j] - x[j];
                let l = x[j] - self.low[j];
                val[i] += self.p[i][j] / u + self.q[i][j] / l;
                grad[i][j] = self.p[i][j] / (u * u) - self.q[i][j] / (l * l);
            }
        }
        (val, grad)
    }

    /// Minimizer of the Lagrangian over the box for multipliers λ.
    fn x_of(&self, lam: &[f64]) -> Vec<f64> {
        (0..self.low.len())
            .map(|j| {
                let (pp, qq) = self.combined(lam, j);
                let (sp, sq) = (pp.sqrt(), qq.sqrt());
                let x = (sp * self.low[j] + sq * self.upp[j]) / (sp + sq);
                x.clamp(self.alpha[j], self.beta[j])
            })
            .collect()
    }

    fn combined(&self, lam: &[f64], j: usize) -> (f64, f64) {
        let mut pp = self.p[0][j];
        let mut qq = self.q[0][j];
        for (i, &l) in lam.iter().enumerate() {
            pp += l * self.p[i + 1][j];
            qq += l * self.q[i + 1][j];
        }
        (pp, qq)
    }

    fn y_of(&self, lam: &[f64]) -> Vec<f64> {
        lam.iter().map(|&l| ((l - self.c) / self.d).max(0.0)).collect()
    }

    /// Dual function W(λ), its gradient and the primal minimizer.
    fn dual(&self, lam: &[f64]) -> (f64, Vec<f64>, Vec<f64>, Vec<f64>) {
        let x = self.x_of(lam);
        let y = self.y_of(lam);
        let (val, _) = self.approximations(&x);
        let mut w = val[0];
        let mut grad = vec![0.0; lam.len()];
        for i in 0..lam.len() {
            w += lam[i] * (val[i + 1] - y[i]) + self.c * y[i] + 0.5 * self.d * y[i] * y[i];
            grad[i] = val[i + 1] - y[i];
        }
        (w, grad, x, y)
    }

    /// Hessian of W, which is negative semidefinite.
    fn dual_hessian(&self, lam: &[f64], x: &[f64], y: &[f64]) -> DMatrix<f64> {
        let m = lam.len();
        let mut h = DMatrix::zeros(m, m);
        for j in 0..x.len() {
            if x[j] <= self.alpha[j] || x[j] >= self.beta[j] {
                continue;
            }
            let u = self.upp[j] - x[j];
            let l = x[j] - self.low[j];
            let (pp, qq) = self.combined(lam, j);
            let curv = 2.0 * pp / (u * u * u) + 2.0 * qq / (l * l * l);
            let g: Vec<f64> = (0..m)
                .map(|i| self.p[i + 1][j] / (u * u) - self.q[i + 1][j] / (l * l))
                .collect();
            for a in 0..m {
                for b in 0..m {
                    h[(a, b)] -= g[a] * g[b] / curv;
                }
            }
        }
        for i in 0..m {
            if y[i] > 0.0 {
                h[(i, i)] -= 1.0 / self.d;
            }
        }
        h
    }

    fn kkt_residual(lam: &[f64], grad: &[f64]) -> f64 {
        lam.iter()
            .zip(grad)
            .map(|(&l, &g)| (l - (l + g).max(0.0)).abs())
            .fold(0.0, f64::max)
    }

    /// Maximizes W over λ ≥ 0: projected Newton, then coordinate-wise
    /// bisection if Newton stalls.
    pub fn solve_dual(&self) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let m = self.m();
        let mut lam = vec![0.0; m];
        if m == 0 {
            return (self.x_of(&lam), vec![], lam);
        }
        let scale = 1.0 + self.r.iter().skip(1).fold(0.0f64, |a, b| a.max(b.abs()));
        let tol = 1e-13 * scale;
        for _ in 0..100 {
            let (w, grad, x, y) = self.dual(&lam);
            if Self::kkt_residual(&lam, &grad) <= tol {
                return (x, y, lam);
            }
            // free set: multipliers not held at zero by the bound
            let free: Vec<usize> = (0..m).filter(|&i| lam[i] > 0.0 || grad[i] > 0.0).collect();
            let h = self.dual_hessian(&lam, &x, &y);
            let mut dir = vec![0.0; m];
            let nf = free.len();
            let hf = DMatrix::from_fn(nf, nf, |a, b| -h[(free[a], free[b])]);
            let gf = DVector::from_fn(nf, |a, _| grad[free[a]]);
            let reg = 1e-14 * (1.0 + hf.diagonal().amax());
            let hreg = hf + DMatrix::identity(nf, nf) * reg;
            match hreg.cholesky() {
                Some(ch) => {
                    let s = ch.solve(&gf);
                    for (a, &i) in free.iter().enumerate() {
                        dir[i] = s[a];
                    }
                }
                None => dir.copy_from_slice(&grad),
            }
            let mut t = 1.0;
            let mut improved = false;
            for _ in 0..40 {
                let trial: Vec<f64> = lam.iter().zip(&dir).map(|(l, d)| (l + t * d).max(0.0)).collect();
                let (wt, ..) = self.dual(&trial);
                let ascent: f64 = grad.iter().zip(trial.iter().zip(&lam)).map(|(g, (a, b))| g * (a - b)).sum();
                if wt >= w + 1e-4 * ascent && trial != lam {
                    lam = trial;
                    improved = true;
                    break;
                }
                t *= 0.5;
            }
            if !improved {
                break;
            }
        }
        self.bisection_sweeps(lam, tol)
    }

    /// Cyclic coordinate ascent; each coordinate derivative of the concave W
    /// is nonincreasing, so its root is bracketed and bisected.
    fn bisection_sweeps(&self, mut lam: Vec<f64>, tol: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let m = lam.len();
        for _ in 0..1000 {
            for i in 0..m {
                let deriv = |v: f64, lam: &mut Vec<f64>| {
                    lam[i] = v;
                    self.dual(lam).1[i]
                };
                if deriv(0.0, &mut lam) <= 0.0 {
                    lam[i] = 0.0;
                    continue;
                }
                let mut lo = 0.0;
                let mut hi = 1.0;
                while deriv(hi, &mut lam) > 0.0 && hi < 1e300 {
                    lo = hi;
                    hi *= 2.0;
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if mid <= lo || mid >= hi {
                        break;
                    }
                    if deriv(mid, &mut lam) > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                lam[i] = 0.5 * (lo + hi);
            }
            let (_, grad, ..) = self.dual(&lam);
            if Self::kkt_residual(&lam, &grad) <= tol.max(1e-10) {
                break;
            }
        }
        let (_, _, x, y) = self.dual(&lam);
        (x, y, lam)
    }
}

impl MmaState {
    pub fn new(x0: Vec<f64>, xmin: Vec<f64>, xmax: Vec<f64>) -> Result<Self> {
        let n = x0.len();
        for (what, v) in [("xmin", &xmin), ("xmax", &xmax)] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    got: v.len(),
                });
            }
        }
        for j in 0..n {
            if !(xmin[j] < xmax[j]) || !(x0[j] >= xmin[j] && x0[j] <= xmax[j]) {
                return Err(Error::InvalidParameter(format!(
                    "variable {j}: x = {} outside [{}, {}]",
                    x0[j], xmin[j], xmax[j]
                )));
            }
        }
        Ok(MmaState {
            x_old1: x0.clone(),
            x_old2: x0.clone(),
            low: xmin.clone(),
            upp: xmax.clone(),
            x: x0,
            xmin,
            xmax,
            iteration: 0,
        })
    }

    /// Moves the asymptotes for the coming update.
    fn update_asymptotes(&mut self, p: &MmaParams) {
        let k = self.iteration + 1;
        for j in 0..self.x.len() {
            let range = self.xmax[j] - self.xmin[j];
            let x = self.x[j];
            if k <= 2 {
                self.low[j] = x - p.ghinit * range;
                self.upp[j] = x + p.ghinit * range;
                continue;
            }
            let trend = (x - self.x_old1[j]) * (self.x_old1[j] - self.x_old2[j]);
            let factor = if trend > 0.0 {
                p.ghincr
            } else if trend < 0.0 {
                p.ghdecr
            } else {
                1.0
            };
            let low = x - factor * (self.x_old1[j] - self.low[j]);
            let upp = x + factor * (self.upp[j] - self.x_old1[j]);
            self.low[j] = low.clamp(x - p.gap_max * range, x - p.gap_min * range);
            self.upp[j] = upp.clamp(x + p.gap_min * range, x + p.gap_max * range);
        }
    }

    /// Builds the subproblem at the current iterate (moving the asymptotes).
    pub fn subproblem(&mut self, p: &MmaParams, f0: f64, df0: &[f64], f: &[f64], df: &[Vec<f64>]) -> Result<Subproblem> {
        p.validate()?;
        let n = self.x.len();
        if df0.len() != n {
            return Err(Error::DimensionMismatch {
                what: "objective gradient",
                expected: n,
                got: df0.len(),
            });
        }
        if df.len() != f.len() {
            return Err(Error::DimensionMismatch {
                what: "constraint gradients",
                expected: f.len(),
                got: df.len(),
            });
        }
        for g in df {
            if g.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "constraint gradient",
                    expected: n,
                    got: g.len(),
                });
            }
        }
        if !f0.is_finite() || f.iter().chain(df0).chain(df.iter().flatten()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite MMA input".into()));
        }
        self.update_asymptotes(p);
        let mut alpha = vec![0.0; n];
        let mut beta = vec![0.0; n];
        let mut rows_p = vec![vec![0.0; n]; f.len() + 1];
        let mut rows_q = vec![vec![0.0; n]; f.len() + 1];
        let mut r = Vec::with_capacity(f.len() + 1);
        r.push(f0);
        r.extend_from_slice(f);
        for j in 0..n {
            let x = self.x[j];
            let range = self.xmax[j] - self.xmin[j];
            alpha[j] = (self.low[j] + p.albefa * (x - self.low[j]))
                .max(x - p.move_limit * range)
                .max(self.xmin[j]);
            beta[j] = (self.upp[j] - p.albefa * (self.upp[j] - x))
                .min(x + p.move_limit * range)
                .min(self.xmax[j]);
            let ux = self.upp[j] - x;
            let xl = x - self.low[j];
            let inv_range = 1.0 / range.max(1e-5);
            for i in 0..=f.len() {
                let g = if i == 0 { df0[j] } else { df[i - 1][j] };
                let (gp, gq) = (g.max(0.0), (-g).max(0.0));
                let reg = 1e-3 * (gp + gq) + p.raa0 * inv_range;
                rows_p[i][j] = (gp + reg) * ux * ux;
                rows_q[i][j] = (gq + reg) * xl * xl;
                r[i] -= rows_p[i][j] / ux + rows_q[i][j] / xl;
            }
        }
        Ok(Subproblem {
            low: self.low.clone(),
            upp: self.upp.clone(),
            alpha,
            beta,
            p: rows_p,
            q: rows_q,
            r,
            c: p.c,
            d: p.d,
        })
    }

    /// One MMA step: f0, df0 objective value and gradient, f and df the
    /// constraint values (feasible when <= 0) and gradients.
    pub fn update(&mut self, p: &MmaParams, f0: f64, df0: &[f64], f: &[f64], df: &[Vec<f64>]) -> Result<MmaStep> {
        let sub = self.subproblem(p, f0, df0, f, df)?;
        let (x_new, y, lambda) = sub.solve_dual();
        let change = x_new.iter().zip(&self.x).fold(0.0f64, |a, (n, o)| a.max((n - o).abs()));
        self.x_old2 = std::mem::replace(&mut self.x_old1, std::mem::replace(&mut self.x, x_new));
        self.iteration += 1;
        Ok(MmaStep { lambda, y, change })
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    fn unit_box(n: usize, x0: f64) -> MmaState {
        MmaState::new(vec![x0; n], vec![0.0; n], vec![1.0; n]).unwrap()
    }

    #[test]
    fn scalar_quadratic() {
        let p = MmaParams::default();
        let mut s = unit_box(1, 0.9);
        for _ in 0..30 {
            let x = s.x[0];
            s.update(&p, (x - 0.3).powi(2), &[2.0 * (x - 0.3)], &[], &[]).unwrap();
        }
        assert!((s.x[0] - 0.3).abs() < 1e-4, "{}", s.x[0]);
    }

    #[test]
    fn linear_with_active_constraint() {
        let p = MmaParams::default();
        let mut s = MmaState::new(vec![0.5, 0.2], vec![0.0; 2], vec![1.0; 2]).unwrap();
        for _ in 0..60 {
            let (a, b) = (s.x[0], s.x[1]);
            s.update(&p, -a - b, &[-1.0, -1.0], &[a + b - 1.0], &[vec![1.0, 1.0]]).unwrap();
        }
        assert!((s.x[0] + s.x[1] - 1.0).abs() < 1e-4, "{:?}", s.x);
    }

    #[test]
    fn box_respected_exactly() {
        let p = MmaParams::default();
        let mut s = unit_box(3, 0.5);
        for _ in 0..20 {
            s.update(&p, 0.0, &[-5.0, 5.0, 0.0], &[], &[]).unwrap();
            assert!(s.x.iter().all(|&v| (0.0..=1.0).contains(&v)));
        }
        assert_eq!(s.x[0], 1.0);
        assert_eq!(s.x[1], 0.0);
    }

    #[test]
    fn approximation_is_first_order_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 12;
        let p = MmaParams::default();
        let mut s = MmaState::new((0..n).map(|_| rng.random_range(0.1..0.9)).collect(), vec![0.0; n], vec![1.0; n]).unwrap();
        // a few steps so the asymptotes are no longer symmetric
        for it in 0..4 {
            let df0: Vec<f64> = (0..n).map(|j| ((j + it) as f64).sin()).collect();
            s.update(&p, 1.0, &df0, &[0.1], &[vec![0.5; n]]).unwrap();
        }
        let f0 = 2.5;
        let df0: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let f = [0.7, -1.2];
        let df: Vec<Vec<f64>> = (0..2).map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let x = s.x.clone();
        let sub = s.subproblem(&p, f0, &df0, &f, &df).unwrap();
        let (val, grad) = sub.approximations(&x);
        assert!((val[0] - f0).abs() < 1e-10);
        assert!((val[1] - f[0]).abs() < 1e-10 && (val[2] - f[1]).abs() < 1e-10);
        for j in 0..n {
            assert!((grad[0][j] - df0[j]).abs() < 1e-10);
            assert!((grad[1][j] - df[0][j]).abs() < 1e-10);
            assert!((grad[2][j] - df[1][j]).abs() < 1e-10);
        }
    }

    #[test]
    fn monotone_steps_widen_gap() {
        let p = MmaParams::default();
        let mut s = unit_box(1, 0.5);
        let mut gaps = Vec::new();
        for _ in 0..3 {
            s.update(&p, 0.0, &[-0.01], &[], &[]).unwrap();
            gaps.push((s.x_old1[0] - s.low[0], s.upp[0] - s.x_old1[0]));
        }
        // third update: x moved the same way twice, so the gap grows by ghincr
        let (l2, u2) = gaps[1];
        let (l3, u3) = gaps[2];
        assert!((l3 - p.ghincr * l2).abs() < 1e-14 && (u3 - p.ghincr * u2).abs() < 1e-14);
    }

    #[test]
    fn oscillation_shrinks_gap() {
        let p = MmaParams::default();
        let mut s = unit_box(1, 0.5);
        s.update(&p, 0.0, &[-1.0], &[], &[]).unwrap();
        s.update(&p, 0.0, &[1.0], &[], &[]).unwrap();
        let before = (s.x_old1[0] - s.low[0], s.upp[0] - s.x_old1[0]);
        s.update(&p, 0.0, &[-1.0], &[], &[]).unwrap();
        let after = (s.x_old1[0] - s.low[0], s.upp[0] - s.x_old1[0]);
        assert!((after.0 - p.ghdecr * before.0).abs() < 1e-14);
        assert!((after.1 - p.ghdecr * before.1).abs() < 1e-14);
    }

    #[test]
    fn infeasible_constraint_uses_artificial_variable() {
        let p = MmaParams::default();
        let mut s = unit_box(2, 0.5);
        // x1 + x2 <= -1 cannot hold on the box
        let mut last = None;
        for _ in 0..30 {
            let (a, b) = (s.x[0], s.x[1]);
            last = Some(s.update(&p, 0.0, &[0.0, 0.0], &[a + b + 1.0], &[vec![1.0, 1.0]]).unwrap());
        }
        assert!(s.x.iter().all(|&v| v < 1e-3));
        assert!(last.unwrap().y[0] > 0.0);
    }

    /// min ½xᵀAx + bᵀx s.t. aᵀx <= c on the unit box, by bisection on the
    /// multiplier with a projected-gradient inner solver.
    fn qp_oracle(a: &DMatrix<f64>, b: &[f64], w: &[f64], c: f64) -> (Vec<f64>, f64) {
        let n = b.len();
        let lmax = a.symmetric_eigenvalues().max();
        let inner = |lam: f64| {
            let mut x = vec![0.5; n];
            for _ in 0..20000 {
                let xv = DVector::from_column_slice(&x);
                let g = a * &xv;
                let mut diff = 0.0f64;
                for j in 0..n {
                    let nx = (x[j] - (g[j] + b[j] + lam * w[j]) / lmax).clamp(0.0, 1.0);
                    diff = diff.max((nx - x[j]).abs());
                    x[j] = nx;
                }
                if diff < 1e-15 {
                    break;
                }
            }
            x
        };
        let cons = |x: &[f64]| x.iter().zip(w).map(|(a, b)| a * b).sum::<f64>() - c;
        let x0 = inner(0.0);
        if cons(&x0) <= 0.0 {
            return (x0, 0.0);
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        while cons(&inner(hi)) > 0.0 {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if cons(&inner(mid)) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let lam = 0.5 * (lo + hi);
        (inner(lam), lam)
    }

    #[test]
    fn random_quadratics_reach_kkt_point() {
        let n = 20;
        let p = MmaParams::default();
        for seed in 0..3u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
            let a = &m * m.transpose() / n as f64 + DMatrix::identity(n, n);
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..1.0)).collect();
            let w: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.5)).collect();
            let c = 4.0;
            let mut s = unit_box(n, 0.5);
            let mut lam = 0.0;
            for _ in 0..400 {
                let xv = DVector::from_column_slice(&s.x);
                let ax = &a * &xv;
                let f0 = 0.5 * xv.dot(&ax) + xv.iter().zip(&b).map(|(x, b)| x * b).sum::<f64>();
                let df0: Vec<f64> = (0..n).map(|j| ax[j] + b[j]).collect();
                let g = s.x.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() - c;
                let step = s.update(&p, f0, &df0, &[g], std::slice::from_ref(&w)).unwrap();
                lam = step.lambda[0];
                if step.change < 1e-12 {
                    break;
                }
            }
            let (x_ref, lam_ref) = qp_oracle(&a, &b, &w, c);
            // projected-gradient KKT residual at the MMA point
            let xv = DVector::from_column_slice(&s.x);
            let ax = &a * &xv;
            let kkt = (0..n)
                .map(|j| {
                    let g = ax[j] + b[j] + lam * w[j];
                    (s.x[j] - (s.x[j] - g).clamp(0.0, 1.0)).abs()
                })
                .fold(0.0, f64::max);
            let viol = (s.x.iter().zip(&w).map(|(x, w)| x * w).sum::<f64>() - c).max(0.0);
            assert!(kkt < 1e-6, "seed {seed}: KKT residual {kkt}");
            assert!(viol < 1e-6, "seed {seed}: violation {viol}");
            let dx = s.x.iter().zip(&x_ref).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            assert!(dx < 1e-5, "seed {seed}: |x - x_oracle| = {dx}");
            assert!((lam - lam_ref).abs() < 1e-4 * (1.0 + lam_ref), "seed {seed}: λ {lam} vs {lam_ref}");
        }
    }

    #[test]
    fn two_constraint_dual_is_consistent() {
        // the primal from the dual solution satisfies complementarity
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = 30;
        let p = MmaParams::default();
        let mut s = unit_box(n, 0.6);
        let df0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..0.2)).collect();
        let df = vec![vec![1.0 / n as f64; n], (0..n).map(|j| if j % 2 == 0 { 0.1 } else { -0.05 }).collect()];
        let sub = s.subproblem(&p, 0.0, &df0, &[0.2, 0.05], &df).unwrap();
        let (x, y, lam) = sub.solve_dual();
        let (val, _) = sub.approximations(&x);
        for i in 0..2 {
            let g = val[i + 1] - y[i];
            assert!(g <= 1e-9, "constraint {i} violated: {g}");
            assert!((lam[i] * g).abs() < 1e-8, "complementarity {i}: {}", lam[i] * g);
        }
    }
}
