use std::path::PathBuf;
use std::time::Instant;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::output::{checkpoint_name, write_vtk};
use super::{build_actuator, Actuator, ProblemConfig};
use crate::error::{Error, Result};
use crate::material::EmiParams;
use crate::mma::MmaState;
use crate::sensitivity::{Evaluation, IterationParams, Pipeline};

/// One design iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub iteration: usize,
    pub g0: f64,
    pub g0_hat: f64,
    pub g0_bar: f64,
    pub g1: f64,
    pub g2: f64,
    pub v1: f64,
    pub v2: f64,
    pub beta: f64,
    pub alpha: f64,
    pub a_d: f64,
    pub newton_iters: usize,
    pub wall_time_s: f64,
}

impl RunRow {
    pub const HEADER: [&'static str; 13] = [
        "iteration",
        "g0",
        "g0_hat",
        "g0_bar",
        "g1",
        "g2",
        "v1",
        "v2",
        "beta",
        "alpha",
        "a_d",
        "newton_iters",
        "wall_time_s",
    ];

    /// Bitwise equality of everything except the wall time.
    pub fn same_values(&self, other: &RunRow) -> bool {
        let bits = |r: &RunRow| {
            [r.g0, r.g0_hat, r.g0_bar, r.g1, r.g2, r.v1, r.v2, r.beta, r.alpha, r.a_d].map(f64::to_bits)
        };
        self.iteration == other.iteration && self.newton_iters == other.newton_iters && bits(self) == bits(other)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub rows: Vec<RunRow>,
}

impl RunRecord {
    pub fn same_values(&self, other: &RunRecord) -> bool {
        self.rows.len() == other.rows.len() && self.rows.iter().zip(&other.rows).all(|(a, b)| a.same_values(b))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Converged,
    IterationCap,
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Overrides the configured iteration cap.
    pub max_iters: Option<usize>,
    /// Overrides the configured checkpoint interval.
    pub checkpoint_every: Option<usize>,
    /// Checkpoints are written below this directory when set.
    pub out_dir: Option<PathBuf>,
}

pub struct RunOutcome {
    pub actuator: Actuator,
    pub record: RunRecord,
    pub stop: StopReason,
    /// Design variables of the final evaluation.
    pub rho1: Vec<f64>,
    pub rho2: Vec<f64>,
    pub last: Evaluation,
    pub params: IterationParams,
}

fn midpoint(a: &EmiParams, b: &EmiParams) -> EmiParams {
    let (x, y) = (a.as_array(), b.as_array());
    EmiParams::from_array(std::array::from_fn(|i| x[i].signum() * (x[i] * y[i]).abs().sqrt()))
}

pub fn run(config: &ProblemConfig, opts: &RunOptions) -> Result<RunOutcome> {
    config.validate()?;
    // sequential dense kernels keep the factorizations reproducible
    faer::set_global_parallelism(faer::Par::Seq);
    let act = build_actuator(config)?;
    let sched = &config.schedule;
    let max_iters = opts.max_iters.unwrap_or(config.max_iters);
    let checkpoint_every = opts.checkpoint_every.unwrap_or(config.checkpoint_every);
    if max_iters == 0 {
        return Err(Error::Config("max_iters must be at least 1".into()));
    }
    let pipe = Pipeline {
        problem: &act.problem,
        filter: &act.filter,
        triplet: config.materials,
        stabilized_electric: config.stabilized_electric,
        objective: act.objective.clone(),
        fractions: config.volume_fractions,
    };
    let n = act.mesh.n_design();
    let x0: Vec<f64> = act.rho1_init.iter().chain(&act.rho2_init).copied().collect();
    let mut mma = MmaState::new(x0, vec![0.0; 2 * n], vec![1.0; 2 * n])?;

    let start = Instant::now();
    let mut record = RunRecord::default();
    let mut a_d = 0.0;
    let mut warm = None;
    let mut prev_g0: Option<f64> = None;
    let mut stationary = 0;
    let mut k = 0;
    loop {
        let (rho1, rho2) = mma.x.split_at(n);
        let mut params = IterationParams {
            projection: sched.projection(k),
            emi: sched.emi(k),
            penalty: sched.penalty(k, a_d),
        };
        let mut eval = match pipe.evaluate_state(rho1, rho2, &params, warm.as_ref()) {
            Ok(e) => e,
            Err(Error::NonConvergence { history }) if k > 0 => {
                let prev_proj = sched.projection(k - 1);
                let prev_emi = sched.emi(k - 1);
                if prev_proj == params.projection && prev_emi == params.emi {
                    return Err(Error::NonConvergence { history });
                }
                warn!("iteration {k}: state solve failed, retrying with half the continuation step");
                params.projection.beta = (prev_proj.beta * params.projection.beta).sqrt();
                params.emi = midpoint(&prev_emi, &params.emi);
                pipe.evaluate_state(rho1, rho2, &params, warm.as_ref())?
            }
            Err(e) => return Err(e),
        };
        if sched.a_d_update(k) {
            a_d = eval.g0_hat.abs();
            params.penalty.a_d = a_d;
        }
        pipe.attach_gradients(&mut eval, &params)?;

        let v = &eval.volumes;
        record.rows.push(RunRow {
            iteration: k,
            g0: eval.g0,
            g0_hat: eval.g0_hat,
            g0_bar: eval.g0_bar,
            g1: v.g1,
            g2: v.g2,
            v1: v.v1,
            v2: v.v2,
            beta: params.projection.beta,
            alpha: params.penalty.alpha,
            a_d,
            newton_iters: eval.state.newton_iters,
            wall_time_s: start.elapsed().as_secs_f64(),
        });
        info!(
            "it {k:4}  g0 {:+.6e}  g0_bar {:+.5e}  g1 {:+.4e}  g2 {:+.4e}  beta {:.3}  newton {}",
            eval.g0, eval.g0_bar, v.g1, v.g2, params.projection.beta, eval.state.newton_iters
        );

        if let Some(p) = prev_g0 {
            if (eval.g0 - p).abs() <= sched.tol * eval.g0.abs() {
                stationary += 1;
            } else {
                stationary = 0;
            }
        }
        prev_g0 = Some(eval.g0);

        if let Some(dir) = &opts.out_dir {
            if checkpoint_every > 0 && k > 0 && k % checkpoint_every == 0 {
                let path = dir.join("checkpoints").join(checkpoint_name(k));
                write_vtk(&act, &eval, &path, false)?;
            }
        }

        let feasible = v.g1 <= sched.feasibility && v.g2 <= sched.feasibility;
        let stop = if sched.continuation_done(k) && stationary >= sched.consecutive && feasible {
            Some(StopReason::Converged)
        } else if k + 1 >= max_iters {
            Some(StopReason::IterationCap)
        } else {
            None
        };
        if let Some(stop) = stop {
            info!("stopped after {} iterations: {stop:?}", k + 1);
            let (rho1, rho2) = mma.x.split_at(n);
            return Ok(RunOutcome {
                rho1: rho1.to_vec(),
                rho2: rho2.to_vec(),
                actuator: act,
                record,
                stop,
                last: eval,
                params,
            });
        }

        let grads = eval.gradients.as_ref().expect("gradients attached");
        let df0: Vec<f64> = grads.d_g0_rho1.iter().chain(&grads.d_g0_rho2).copied().collect();
        let df = vec![
            grads.d_g1_rho1.iter().chain(&grads.d_g1_rho2).copied().collect(),
            grads.d_g2_rho1.iter().chain(&grads.d_g2_rho2).copied().collect(),
        ];
        mma.update(&config.mma, eval.g0_bar, &df0, &[v.g1, v.g2], &df)?;
        warm = Some(eval.state);
        k += 1;
    }
}
