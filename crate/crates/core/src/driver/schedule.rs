use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::material::EmiParams;
use crate::regularization::{PenaltyParams, ProjectionParams};

/// Continuation parameters as functions of the design iteration k.
///
/// All periods and thresholds are stated in nominal iterations. With
/// `compression` c the schedule is evaluated at the virtual iteration c·k,
/// so c = 4 runs every update four times as often.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizationSchedule {
    pub compression: f64,
    pub beta_start: f64,
    pub beta_factor: f64,
    pub beta_max: f64,
    pub beta_period: f64,
    pub eta: f64,
    pub emi_initial: EmiParams,
    pub emi_final: EmiParams,
    pub emi_factor: f64,
    pub emi_period: f64,
    /// a_d is set to |ĝ0| at multiples of `a_d_period` in [a_d_start, a_d_end].
    pub a_d_start: f64,
    pub a_d_end: f64,
    pub a_d_period: f64,
    pub alpha_start: f64,
    pub alpha_step: f64,
    pub alpha_min: f64,
    /// α decreases every `alpha_period` iterations after this one.
    pub alpha_after: f64,
    pub alpha_period: f64,
    pub delta: f64,
    /// Relative change of g0 regarded as stationary.
    pub tol: f64,
    /// Consecutive stationary iterations required.
    pub consecutive: usize,
    /// Largest scaled constraint value regarded as fulfilled.
    pub feasibility: f64,
}

impl Default for OptimizationSchedule {
    fn default() -> Self {
        OptimizationSchedule {
            compression: 1.0,
            beta_start: 1.0,
            beta_factor: 1.2,
            beta_max: 20.0,
            beta_period: 10.0,
            eta: 0.5,
            emi_initial: EmiParams::initial(),
            emi_final: EmiParams::terminal(),
            emi_factor: 1.2,
            emi_period: 10.0,
            a_d_start: 200.0,
            a_d_end: 300.0,
            a_d_period: 20.0,
            alpha_start: 0.9,
            alpha_step: 0.1,
            alpha_min: 0.05,
            alpha_after: 200.0,
            alpha_period: 10.0,
            delta: 1e-9,
            tol: 1e-4,
            consecutive: 3,
            feasibility: 1e-3,
        }
    }
}

impl OptimizationSchedule {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            self.compression,
            self.beta_start,
            self.beta_period,
            self.emi_period,
            self.a_d_period,
            self.alpha_period,
            self.tol,
        ];
        if pos.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::Config(format!("schedule periods, rates and tol must be positive: {self:?}")));
        }
        if !(self.beta_factor >= 1.0 && self.emi_factor >= 1.0 && self.beta_max >= self.beta_start) {
            return Err(Error::Config("continuation factors must be >= 1 and beta_max >= beta_start".into()));
        }
        if !(self.alpha_min > 0.0 && self.alpha_min <= self.alpha_start && self.alpha_start <= 1.0 && self.alpha_step >= 0.0) {
            return Err(Error::Config("need 0 < alpha_min <= alpha_start <= 1".into()));
        }
        if self.consecutive == 0 {
            return Err(Error::Config("consecutive must be at least 1".into()));
        }
        for (a, b) in self.emi_initial.as_array().iter().zip(self.emi_final.as_array()) {
            if a.signum() != b.signum() || a.abs() > b.abs() {
                return Err(Error::Config(format!("EMI parameter {a} cannot grow to {b}")));
            }
        }
        ProjectionParams { beta: self.beta_start, eta: self.eta }.validate()?;
        PenaltyParams {
            a_d: 0.0,
            alpha: self.alpha_start,
            delta: self.delta,
        }
        .validate()
    }

    fn virtual_iter(&self, k: usize) -> f64 {
        k as f64 * self.compression
    }

    /// Number of completed periods at iteration k.
    fn steps(&self, k: usize, period: f64) -> i32 {
        // tiny slack so that 2.5·4 counts as 10 whatever the rounding
        ((self.virtual_iter(k) + 1e-9) / period).floor() as i32
    }

    pub fn beta(&self, k: usize) -> f64 {
        (self.beta_start * self.beta_factor.powi(self.steps(k, self.beta_period))).min(self.beta_max)
    }

    pub fn emi(&self, k: usize) -> EmiParams {
        let g = self.emi_factor.powi(self.steps(k, self.emi_period));
        let a = self.emi_initial.as_array();
        let b = self.emi_final.as_array();
        EmiParams::from_array(std::array::from_fn(|i| {
            let v = a[i].abs() * g;
            a[i].signum() * v.min(b[i].abs())
        }))
    }

    pub fn alpha(&self, k: usize) -> f64 {
        let v = self.virtual_iter(k);
        if v <= self.alpha_after {
            return self.alpha_start;
        }
        let n = ((v - self.alpha_after + 1e-9) / self.alpha_period).floor();
        (self.alpha_start - n * self.alpha_step).max(self.alpha_min)
    }

    /// True when a_d is reset to |ĝ0| at iteration k.
    pub fn a_d_update(&self, k: usize) -> bool {
        let now = self.steps(k, self.a_d_period);
        let before = if k == 0 { -1 } else { self.steps(k - 1, self.a_d_period) };
        if now == before {
            return false;
        }
        let mark = now as f64 * self.a_d_period;
        mark >= self.a_d_start - 1e-9 && mark <= self.a_d_end + 1e-9
    }

    /// Iteration at which β and the EMI parameters reach their terminal
    /// values; the convergence test is armed from there on.
    pub fn continuation_done(&self, k: usize) -> bool {
        self.beta(k) >= self.beta_max && self.emi(k) == self.emi_final
    }

    pub fn projection(&self, k: usize) -> ProjectionParams {
        ProjectionParams { beta: self.beta(k), eta: self.eta }
    }

    pub fn penalty(&self, k: usize, a_d: f64) -> PenaltyParams {
        PenaltyParams {
            a_d,
            alpha: self.alpha(k),
            delta: self.delta,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_schedule() {
        let s = OptimizationSchedule::default();
        assert_eq!(s.beta(0), 1.0);
        assert_eq!(s.beta(9), 1.0);
        assert!((s.beta(30) - 1.728).abs() < 1e-12);
        assert!((0..2000).all(|k| s.beta(k) <= 20.0));
        assert_eq!(s.beta(1000), 20.0);
        // cap reached after 17 updates: 1.2^16 = 18.5, 1.2^17 = 22.2
        assert!(s.beta(169) < 20.0 && s.beta(170) == 20.0);
    }

    #[test]
    fn alpha_schedule() {
        let s = OptimizationSchedule::default();
        assert_eq!(s.alpha(200), 0.9);
        assert!((s.alpha(209) - 0.9).abs() < 1e-15);
        assert!((s.alpha(210) - 0.8).abs() < 1e-12);
        assert!((s.alpha(260) - 0.3).abs() < 1e-12);
        assert!((s.alpha(290) - 0.05).abs() < 1e-12);
        assert!((0..2000).all(|k| s.alpha(k) >= 0.05));
    }

    #[test]
    fn emi_schedule() {
        let s = OptimizationSchedule::default();
        assert_eq!(s.emi(0), EmiParams::initial());
        let e = s.emi(10);
        assert!((e.q1_m - 1.2).abs() < 1e-12 && (e.q2_m + 1.2).abs() < 1e-12 && (e.q1_mel - 2.4).abs() < 1e-12);
        // signs preserved, magnitudes capped
        for k in 0..1000 {
            let a = s.emi(k).as_array();
            let f = EmiParams::terminal().as_array();
            for i in 0..6 {
                assert!(a[i].signum() == f[i].signum() && a[i].abs() <= f[i].abs());
            }
        }
        // 1.2^7 = 3.58, 1.2^8 = 4.30
        assert!(s.emi(79).q1_m < 4.0 && s.emi(80).q1_m == 4.0);
        assert!(s.continuation_done(170) && !s.continuation_done(169));
    }

    #[test]
    fn a_d_updates() {
        let s = OptimizationSchedule::default();
        let ks: Vec<usize> = (0..1000).filter(|&k| s.a_d_update(k)).collect();
        assert_eq!(ks, vec![200, 220, 240, 260, 280, 300]);
    }

    #[test]
    fn compressed_schedule() {
        let s = OptimizationSchedule {
            compression: 4.0,
            ..Default::default()
        };
        let ks: Vec<usize> = (0..200).filter(|&k| s.a_d_update(k)).collect();
        assert_eq!(ks, vec![50, 55, 60, 65, 70, 75]);
        // β updates every 2 or 3 iterations
        let jumps: Vec<usize> = (1..40).filter(|&k| s.beta(k) != s.beta(k - 1)).collect();
        assert_eq!(&jumps[..4], &[3, 5, 8, 10]);
        assert!((s.beta(30) - OptimizationSchedule::default().beta(120)).abs() < 1e-12);
        assert!((s.alpha(65) - 0.3).abs() < 1e-12);
    }
}
