//! Feasible level-set driver around the mirror descent oracle.
//!
//! The constrained problem `min f0 s.t. f1, f2 <= 1 + kappa` is solved by
//! root-finding on the level function
//! `H(r) = min_x max(f0(x) - r, f1(x) - 1 - kappa, f2(x) - 1 - kappa)`:
//! starting from a level `r > f*`, each round asks the oracle for an upper
//! bound `U(r) >= H(r)` and an approximate minimizer, halts once `U(r)` is
//! within tolerance of zero, and otherwise walks the level down by
//! `U / (2 theta)`. Keeping `r` above the optimal value keeps every accepted
//! iterate feasible, which is the whole point of the construction.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::reformulation::{full_objective, ObjectiveValues, PrimalPoint};
use crate::smd::{run_smd, Snapshot, SmdConfig, TrainingProblem};
use crate::vecops;

/// Configuration of the level-set loop.
#[derive(Debug, Clone)]
pub struct SflsConfig {
    /// Starting level; `None` derives one from the solver's start point via
    /// [`init_level`].
    pub r0: Option<f64>,
    /// Halting tolerance: stop once `U(r) >= -eps_opt`.
    pub eps_opt: f64,
    /// Oracle accuracy the caller believes each inner run achieves; used for
    /// audit slacks and reference reporting, not enforced.
    pub eps_oracle: f64,
    /// Confidence split driving the per-round iteration growth.
    pub delta: f64,
    /// Level step damping; 1 is the practical default, larger is theory-safe.
    pub theta: f64,
    pub max_outer: usize,
    /// Base iteration budget `T` of the first oracle call.
    pub oracle_iterations: usize,
}

impl SflsConfig {
    pub fn new(eps_opt: f64, oracle_iterations: usize, max_outer: usize) -> Self {
        Self {
            r0: None,
            eps_opt,
            eps_oracle: eps_opt / 2.0,
            delta: 0.05,
            theta: 1.0,
            max_outer,
            oracle_iterations,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v, lo) in [
            ("eps_opt", self.eps_opt, 0.0),
            ("eps_oracle", self.eps_oracle, 0.0),
        ] {
            if !(v.is_finite() && v > lo) {
                return Err(Error::InvalidConfig {
                    field: name.into(),
                    message: format!("{v} is not a positive real"),
                });
            }
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig {
                field: "delta".into(),
                message: format!("{} is not inside (0, 1)", self.delta),
            });
        }
        if !(self.theta.is_finite() && self.theta >= 1.0) {
            return Err(Error::InvalidConfig {
                field: "theta".into(),
                message: format!("{} is below 1", self.theta),
            });
        }
        if self.max_outer == 0 || self.oracle_iterations == 0 {
            return Err(Error::InvalidConfig {
                field: "max_outer/oracle_iterations".into(),
                message: "iteration budgets must be positive".into(),
            });
        }
        if let Some(r0) = self.r0 {
            if !r0.is_finite() {
                return Err(Error::InvalidConfig {
                    field: "r0".into(),
                    message: format!("{r0} is not finite"),
                });
            }
        }
        Ok(())
    }
}

/// Why the outer loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HaltReason {
    /// `U(r) >= -eps_opt` was reached.
    Tolerance,
    /// The outer budget ran out; the best feasible candidate was returned.
    MaxOuter,
}

/// One row of the level trace.
#[derive(Debug, Clone, Copy)]
pub struct LevelRow {
    pub k: usize,
    pub r: f64,
    pub upper: f64,
    pub oracle_iterations: usize,
    pub wall_ms: u128,
}

/// Tolerance prescriptions evaluated from the first upper bound (standing in
/// for the unknown level-function value at the starting level), at a
/// relative target of 0.1. Logged for reference; the loop runs on the
/// user-set absolute tolerances.
#[derive(Debug, Clone, Copy)]
pub struct ReferenceTolerances {
    /// `U(r0)`, the available estimate of the level function at the start.
    pub level_estimate: f64,
    pub eps_opt: f64,
    pub eps_oracle: f64,
}

impl ReferenceTolerances {
    fn from_first_bound(u0: f64, theta: f64) -> Self {
        const RELATIVE_TARGET: f64 = 0.1;
        Self {
            level_estimate: u0,
            eps_opt: -u0 * RELATIVE_TARGET / theta,
            eps_oracle: -(theta - 1.0) / (2.0 * theta * theta * (theta + 1.0))
                * u0
                * RELATIVE_TARGET,
        }
    }
}

/// Output of the level-set loop.
#[derive(Debug, Clone)]
pub struct SflsResult {
    pub solution: PrimalPoint,
    pub level_trace: Vec<LevelRow>,
    pub halted_by: HaltReason,
    /// Constraint values (including any proximal term) at the solution.
    pub final_feasibility: (f64, f64),
    /// Full objective values (including any proximal term) at the solution.
    pub final_objective: ObjectiveValues,
    pub reference_tolerances: ReferenceTolerances,
    /// Running-average snapshots aggregated across oracle calls, iteration
    /// counts cumulative over the whole run; the averaged point of every
    /// round is always included.
    pub snapshots: Vec<Snapshot>,
}

/// Objective values with the proximal term `rho_hat/2 |x - center|^2` added
/// to every component — the objective the regularized subproblem actually
/// minimizes. With `rho_hat = 0` this is plain [`full_objective`].
pub fn regularized_objective(
    problem: &TrainingProblem,
    x: &PrimalPoint,
    rho_hat: f64,
    center: &PrimalPoint,
) -> ObjectiveValues {
    let mut vals = full_objective(problem.spec, problem.data, x);
    if rho_hat > 0.0 {
        let shift = 0.5 * rho_hat * vecops::dist2_sq(&x.to_flat(), &center.to_flat());
        vals.f0 += shift;
        vals.f1 += shift;
        vals.f2 += shift;
        let budget = 1.0 + problem.spec.kappa();
        vals.feasible = [vals.f1 <= budget, vals.f2 <= budget];
    }
    vals
}

/// A starting level guaranteed to sit above the optimal value: the objective
/// at any point upper-bounds the minimum, so `f0(x_init)` plus a margin of
/// `0.1 |f0| + 0.1` works.
pub fn init_level(vals: &ObjectiveValues) -> f64 {
    vals.f0 + 0.1 * vals.f0.abs() + 0.1
}

/// The level update `r <- r + U / (2 theta)`; `U < 0` moves the level down.
pub fn update_level(r: f64, upper: f64, theta: f64) -> f64 {
    r + upper / (2.0 * theta)
}

/// Per-round iteration budget: grows logarithmically with the round index,
/// mirroring the halving of the per-round confidence share.
fn round_iterations(base: usize, k: usize, delta: f64) -> usize {
    let growth = 1.0 + k as f64 * std::f64::consts::LN_2 / (1.0 / delta).ln();
    (base as f64 * growth).ceil() as usize
}

/// Runs the feasible level-set loop. The proximal settings (`rho_hat`,
/// `prox_center`) of `smd_cfg` carry through to every oracle call and to all
/// objective audits, so the same routine drives both the plain convex solve
/// and the regularized subproblems of the proximal-point outer loop.
pub fn run_sfls(
    problem: &TrainingProblem,
    cfg: &SflsConfig,
    smd_cfg: &SmdConfig,
) -> Result<SflsResult> {
    cfg.validate()?;
    smd_cfg.validate()?;

    let zero = PrimalPoint::zeros(problem.shape);
    let center = smd_cfg.prox_center.clone().unwrap_or_else(|| zero.clone());
    let budget = 1.0 + problem.spec.kappa();

    let mut r = match cfg.r0 {
        Some(r0) => r0,
        None => {
            // The solver starts at the proximal center (or zero), where the
            // proximal term vanishes.
            let start = smd_cfg.prox_center.as_ref().unwrap_or(&zero);
            init_level(&regularized_objective(problem, start, smd_cfg.rho_hat, &center))
        }
    };

    let mut level_trace = Vec::new();
    let mut snapshots: Vec<Snapshot> = Vec::new();
    let mut iteration_offset = 0usize;
    let mut reference: Option<ReferenceTolerances> = None;
    // best candidate seen: feasible ones ranked by objective, infeasible
    // ones by violation (any feasible candidate beats every infeasible one)
    let mut best: Option<(PrimalPoint, ObjectiveValues, bool)> = None;

    for k in 0..cfg.max_outer {
        let iterations = round_iterations(cfg.oracle_iterations, k, cfg.delta);
        let mut round_cfg = smd_cfg.clone();
        round_cfg.iterations = iterations;
        round_cfg.seed = smd_cfg.seed.wrapping_add(k as u64);

        let started = Instant::now();
        let out = run_smd(problem, r, &round_cfg)?;
        let wall_ms = started.elapsed().as_millis();

        level_trace.push(LevelRow {
            k,
            r,
            upper: out.upper_bound,
            oracle_iterations: iterations,
            wall_ms,
        });
        if reference.is_none() {
            reference = Some(ReferenceTolerances::from_first_bound(
                out.upper_bound,
                cfg.theta,
            ));
        }

        for snap in &out.snapshots {
            snapshots.push(Snapshot {
                iteration: iteration_offset + snap.iteration,
                point: snap.point.clone(),
            });
        }
        if smd_cfg.snapshot_every.is_none() {
            // always keep at least the round average
            snapshots.push(Snapshot {
                iteration: iteration_offset + iterations,
                point: out.x_bar.clone(),
            });
        }
        iteration_offset += iterations;

        let vals = regularized_objective(problem, &out.x_bar, smd_cfg.rho_hat, &center);
        let feasible = vals.f1 <= budget && vals.f2 <= budget;
        let better = match &best {
            None => true,
            Some((_, best_vals, best_feasible)) => match (feasible, best_feasible) {
                (true, false) => true,
                (false, true) => false,
                (true, true) => vals.f0 < best_vals.f0,
                (false, false) => {
                    vals.max_violation(problem.spec.kappa())
                        < best_vals.max_violation(problem.spec.kappa())
                }
            },
        };
        if better {
            best = Some((out.x_bar.clone(), vals, feasible));
        }

        if out.upper_bound >= -cfg.eps_opt {
            // When the level has walked below the attainable optimum (an
            // over-eager earlier bound), this round's average is infeasible
            // by construction; the best tracked candidate is the honest
            // answer on this path too.
            let (solution, vals, _) = best.expect("a candidate was just recorded");
            return Ok(SflsResult {
                solution,
                level_trace,
                halted_by: HaltReason::Tolerance,
                final_feasibility: (vals.f1, vals.f2),
                final_objective: vals,
                reference_tolerances: reference.expect("set on the first round"),
                snapshots,
            });
        }
        r = update_level(r, out.upper_bound, cfg.theta);
    }

    let (solution, vals, _) = best.expect("max_outer >= 1 guarantees a candidate");
    Ok(SflsResult {
        solution,
        level_trace,
        halted_by: HaltReason::MaxOuter,
        final_feasibility: (vals.f1, vals.f2),
        final_objective: vals,
        reference_tolerances: reference.expect("set on the first round"),
        snapshots,
    })
}
