//! Proximal-point outer loop for weakly convex scorers.
//!
//! A nonlinear scorer makes the objective and constraints only weakly
//! convex, so the level-set driver cannot be applied directly. Instead, each
//! outer round `s` adds the quadratic `rho_hat/2 |x - center_s|^2` to every
//! objective component — convexifying the subproblem when `rho_hat` exceeds
//! the weak-convexity modulus — solves it with the level-set driver, and
//! moves the center to the subproblem solution. The returned point is drawn
//! uniformly from all centers visited (start included), whose displacement
//! per round is the reported stationarity measure.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::levelset::{run_sfls, SflsConfig};
use crate::model::ParamDomain;
use crate::reformulation::{full_objective, PrimalPoint, ProblemSpec};
use crate::smd::{Snapshot, SmdConfig, TrainingProblem};
use crate::vecops;

/// Configuration of the proximal-point outer loop.
#[derive(Debug, Clone)]
pub struct IqrcConfig {
    /// Strength of the convexifying quadratic. The theory wants it above the
    /// (unknown) weak-convexity modulus; the working default is 1e-5.
    pub rho_hat: f64,
    /// Number of outer rounds `S`.
    pub outer_iterations: usize,
    /// Inner stationarity target; each subproblem is solved to tolerance
    /// `eps_hat^2`.
    pub eps_hat: f64,
    /// Total confidence budget, split evenly across rounds.
    pub delta: f64,
    /// Seed for the final uniform draw of the returned round index.
    pub seed: u64,
}

impl IqrcConfig {
    pub fn new(outer_iterations: usize, eps_hat: f64, seed: u64) -> Self {
        Self {
            rho_hat: 1e-5,
            outer_iterations,
            eps_hat,
            delta: 0.05,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rho_hat.is_finite() && self.rho_hat > 0.0) {
            return Err(Error::InvalidConfig {
                field: "rho_hat".into(),
                message: format!("{} is not a positive real", self.rho_hat),
            });
        }
        if self.outer_iterations == 0 {
            return Err(Error::InvalidConfig {
                field: "outer_iterations".into(),
                message: "at least one outer round is required".into(),
            });
        }
        if !(self.eps_hat.is_finite() && self.eps_hat > 0.0) {
            return Err(Error::InvalidConfig {
                field: "eps_hat".into(),
                message: format!("{} is not a positive real", self.eps_hat),
            });
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidConfig {
                field: "delta".into(),
                message: format!("{} is not inside (0, 1)", self.delta),
            });
        }
        Ok(())
    }
}

/// Per-round diagnostics of the outer loop.
#[derive(Debug, Clone, Copy)]
pub struct RoundRow {
    pub s: usize,
    /// `|center_{s+1} - center_s|_2`, the stationarity proxy.
    pub displacement: f64,
    /// Level-set rounds the inner solve used.
    pub level_rounds: usize,
    /// Total mirror descent iterations the inner solve used.
    pub smd_steps: usize,
    pub wall_ms: u128,
}

/// Whether the configured problem satisfies the checkable sufficient
/// condition for the proximal subproblems to be well-posed: the budget
/// leaves slack at the constant scorer, and the convexifying strength stays
/// below what the domain diameter allows for the weak-convexity modulus.
#[derive(Debug, Clone, Copy)]
pub struct ConditionReport {
    /// `kappa + 1 - 2 c1 c2^2`: positive iff the constant scorer is strictly
    /// feasible.
    pub feasibility_slack: f64,
    pub strictly_feasible: bool,
    /// Squared diameter of the primal domain, `4 (radius^2 + 10 I^2)`.
    pub diameter_sq: f64,
    /// Largest weak-convexity modulus the condition tolerates:
    /// `2 slack / diameter_sq`.
    pub modulus_bound: f64,
    /// Whether `rho_hat` itself sits below that bound (necessary for any
    /// modulus `rho < rho_hat` to satisfy it too).
    pub rho_hat_below_bound: bool,
}

/// Evaluates the sufficient-condition report for a configured problem.
pub fn sufficient_condition_report(
    spec: &ProblemSpec,
    domain: &ParamDomain,
    rho_hat: f64,
) -> ConditionReport {
    let unit = 2.0 * spec.c1() * spec.c2() * spec.c2();
    let slack = spec.kappa() + 1.0 - unit;
    let radius = domain.radius();
    let interval = spec.interval_radius();
    let diameter_sq = 4.0 * (radius * radius + 10.0 * interval * interval);
    let modulus_bound = 2.0 * slack / diameter_sq;
    ConditionReport {
        feasibility_slack: slack,
        strictly_feasible: slack > 0.0,
        diameter_sq,
        modulus_bound,
        rho_hat_below_bound: rho_hat < modulus_bound,
    }
}

/// The inner tolerance prescription
/// `eps_hat = min(1, sqrt((rho_hat - rho)/4) ((G + 2 rho_hat D_x) /
/// sqrt(2 sigma (rho_hat - rho)) + 1)^(-1/2)) eps` for user-supplied
/// smoothness constants; provided as a calculator because none of `rho`,
/// `sigma`, `G` are estimable from data.
pub fn eps_hat_prescription(
    eps: f64,
    rho: f64,
    rho_hat: f64,
    grad_bound: f64,
    sigma: f64,
    d_x: f64,
) -> Result<f64> {
    if !(rho_hat > rho) {
        return Err(Error::InvalidConfig {
            field: "rho_hat".into(),
            message: format!("{rho_hat} must exceed the weak-convexity modulus {rho}"),
        });
    }
    for (name, v) in [("eps", eps), ("sigma", sigma), ("d_x", d_x)] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidConfig {
                field: name.into(),
                message: format!("{v} is not a positive real"),
            });
        }
    }
    if !(grad_bound.is_finite() && grad_bound >= 0.0) {
        return Err(Error::InvalidConfig {
            field: "grad_bound".into(),
            message: format!("{grad_bound} is not a nonnegative real"),
        });
    }
    let gap = rho_hat - rho;
    let inner = (grad_bound + 2.0 * rho_hat * d_x) / (2.0 * sigma * gap).sqrt() + 1.0;
    Ok(((gap / 4.0).sqrt() * inner.powf(-0.5)).min(1.0) * eps)
}

/// Output of the proximal-point loop.
#[derive(Debug, Clone)]
pub struct IqrcResult {
    /// The center at the uniformly drawn round index.
    pub solution: PrimalPoint,
    pub chosen_index: usize,
    pub displacement_trace: Vec<f64>,
    pub rounds: Vec<RoundRow>,
    pub condition_report: ConditionReport,
    /// All centers visited, index 0 being the start; `solution` is
    /// `candidates[chosen_index]`.
    pub candidates: Vec<PrimalPoint>,
    /// Snapshots aggregated across all inner solves, iteration counts
    /// cumulative over the whole run.
    pub snapshots: Vec<Snapshot>,
}

/// Runs the proximal-point outer loop, using the level-set driver on each
/// regularized subproblem. `sfls_cfg` supplies the inner loop shape (budget,
/// level damping); its halting tolerance and confidence are overridden per
/// round by `cfg.eps_hat^2` and `cfg.delta / S`. `smd_cfg` supplies the
/// oracle shape; its proximal fields are overwritten with this loop's center.
pub fn run_iqrc(
    problem: &TrainingProblem,
    cfg: &IqrcConfig,
    sfls_cfg: &SflsConfig,
    smd_cfg: &SmdConfig,
) -> Result<IqrcResult> {
    cfg.validate()?;
    sfls_cfg.validate()?;
    smd_cfg.validate()?;

    let start = PrimalPoint::zeros(problem.shape);
    let start_vals = full_objective(problem.spec, problem.data, &start);
    let eps_sq = cfg.eps_hat * cfg.eps_hat;
    if start_vals.max_violation(problem.spec.kappa()) > eps_sq {
        return Err(Error::InvalidConfig {
            field: "kappa".into(),
            message: format!(
                "the constant scorer violates the constraints by {} (> {eps_sq}); \
                 the loss scales must satisfy 2 c1 c2^2 <= 1 + kappa for a \
                 feasible start",
                start_vals.max_violation(problem.spec.kappa())
            ),
        });
    }

    let s_total = cfg.outer_iterations;
    let mut inner_sfls = sfls_cfg.clone();
    inner_sfls.eps_opt = eps_sq;
    inner_sfls.delta = cfg.delta / s_total as f64;
    inner_sfls.r0 = None; // re-derived per subproblem from its own center

    let mut candidates = Vec::with_capacity(s_total + 1);
    candidates.push(start);
    let mut displacement_trace = Vec::with_capacity(s_total);
    let mut rounds = Vec::with_capacity(s_total);
    let mut snapshots: Vec<Snapshot> = Vec::new();
    let mut iteration_offset = 0usize;

    for s in 0..s_total {
        let center = candidates.last().expect("start is always present").clone();
        let mut inner_smd = smd_cfg.clone();
        inner_smd.rho_hat = cfg.rho_hat;
        inner_smd.prox_center = Some(center.clone());
        inner_smd.seed = smd_cfg
            .seed
            .wrapping_add((s as u64).wrapping_mul(0x9E37_79B9_97F4_A7C5));

        let started = Instant::now();
        let inner = run_sfls(problem, &inner_sfls, &inner_smd)?;
        let wall_ms = started.elapsed().as_millis();

        let next = inner.solution;
        let displacement =
            vecops::dist2_sq(&next.to_flat(), &center.to_flat()).sqrt();
        displacement_trace.push(displacement);
        let smd_steps: usize = inner
            .level_trace
            .iter()
            .map(|row| row.oracle_iterations)
            .sum();
        rounds.push(RoundRow {
            s,
            displacement,
            level_rounds: inner.level_trace.len(),
            smd_steps,
            wall_ms,
        });
        for snap in &inner.snapshots {
            snapshots.push(Snapshot {
                iteration: iteration_offset + snap.iteration,
                point: snap.point.clone(),
            });
        }
        iteration_offset += smd_steps;
        candidates.push(next);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let chosen_index = rng.random_range(0..=s_total);
    let condition_report = sufficient_condition_report(problem.spec, problem.domain, cfg.rho_hat);

    Ok(IqrcResult {
        solution: candidates[chosen_index].clone(),
        chosen_index,
        displacement_trace,
        rounds,
        condition_report,
        candidates,
        snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synthetic_biased_gaussians, Dataset, SyntheticSpec};
    use crate::metrics::FairnessKind;
    use crate::model::ModelShape;
    use crate::reformulation::ProblemSettings;
    use crate::smd::Batching;

    struct Owned {
        data: Dataset,
        spec: ProblemSpec,
        domain: ParamDomain,
        shape: ModelShape,
    }

    fn make_problem(c1: f64, c2: f64, kappa: f64, shape_of: fn(usize) -> ModelShape) -> Owned {
        let data = synthetic_biased_gaussians(
            &SyntheticSpec {
                n: 40,
                feature_dim: 3,
                ..SyntheticSpec::default()
            },
            11,
        )
        .unwrap();
        let shape = shape_of(data.feature_dim());
        let domain = ParamDomain::new(1.0).unwrap();
        let spec = ProblemSpec::build(
            &ProblemSettings::new(c1, c2, kappa, FairnessKind::GroupAuc),
            &data,
            &shape,
            &domain,
        )
        .unwrap();
        Owned { data, spec, domain, shape }
    }

    impl Owned {
        fn problem(&self) -> TrainingProblem<'_> {
            TrainingProblem {
                spec: &self.spec,
                data: &self.data,
                domain: &self.domain,
                shape: self.shape,
            }
        }
    }

    fn quick_configs() -> (IqrcConfig, SflsConfig, SmdConfig) {
        let iqrc = IqrcConfig::new(3, 0.3, 21);
        let mut sfls = SflsConfig::new(0.05, 20, 2);
        sfls.theta = 1.0;
        let mut smd = SmdConfig::new(20, Batching::Full, 5);
        smd.step_scale = Some(20.0);
        (iqrc, sfls, smd)
    }

    #[test]
    fn config_validation() {
        assert!(IqrcConfig::new(3, 0.1, 1).validate().is_ok());
        let mut c = IqrcConfig::new(3, 0.1, 1);
        c.rho_hat = 0.0;
        assert!(c.validate().is_err());
        c = IqrcConfig::new(0, 0.1, 1);
        assert!(c.validate().is_err());
        c = IqrcConfig::new(3, 0.0, 1);
        assert!(c.validate().is_err());
        c = IqrcConfig::new(3, 0.1, 1);
        c.delta = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn infeasible_loss_scales_are_rejected_up_front() {
        // 2 c1 c2^2 = 2.016 > 1 + kappa: even the constant scorer violates
        // the budget, so no feasible start exists.
        let own = make_problem(0.7, 1.2, 0.2, ModelShape::linear);
        let problem = own.problem();
        let (iqrc, sfls, smd) = quick_configs();
        let err = run_iqrc(&problem, &iqrc, &sfls, &smd).unwrap_err();
        match err {
            Error::InvalidConfig { field, .. } => assert_eq!(field, "kappa"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn runs_are_deterministic_and_structurally_complete() {
        let own = make_problem(0.5, 1.0, 0.2, |p| ModelShape::mlp2(p, 2));
        let problem = own.problem();
        let (iqrc, sfls, smd) = quick_configs();
        let a = run_iqrc(&problem, &iqrc, &sfls, &smd).unwrap();
        let b = run_iqrc(&problem, &iqrc, &sfls, &smd).unwrap();
        assert_eq!(a.chosen_index, b.chosen_index);
        assert_eq!(a.solution.to_flat(), b.solution.to_flat());
        assert_eq!(a.displacement_trace.len(), 3);
        assert_eq!(a.rounds.len(), 3);
        assert_eq!(a.candidates.len(), 4);
        for (da, db) in a.displacement_trace.iter().zip(&b.displacement_trace) {
            assert_eq!(da.to_bits(), db.to_bits());
        }
        // displacements are consistent with the candidate sequence
        for (s, d) in a.displacement_trace.iter().enumerate() {
            let want = vecops::dist2_sq(
                &a.candidates[s + 1].to_flat(),
                &a.candidates[s].to_flat(),
            )
            .sqrt();
            assert!((d - want).abs() < 1e-15);
        }
        assert_eq!(
            a.solution.to_flat(),
            a.candidates[a.chosen_index].to_flat()
        );
    }

    #[test]
    fn chosen_index_is_uniform_over_rounds_plus_start() {
        let own = make_problem(0.5, 1.0, 0.2, ModelShape::linear);
        let problem = own.problem();
        let (mut iqrc, mut sfls, mut smd) = quick_configs();
        // keep each run tiny: one outer round of one level round
        iqrc.outer_iterations = 4;
        sfls.max_outer = 1;
        sfls.oracle_iterations = 2;
        smd.iterations = 2;
        let mut counts = [0usize; 5];
        for seed in 0..200 {
            iqrc.seed = seed;
            let out = run_iqrc(&problem, &iqrc, &sfls, &smd).unwrap();
            counts[out.chosen_index] += 1;
        }
        // 200 draws over 5 cells: each expected 40; all should be hit well
        for (i, c) in counts.iter().enumerate() {
            assert!(*c >= 10, "index {i} drawn only {c} times");
        }
    }

    #[test]
    fn condition_report_values() {
        let own = make_problem(0.5, 1.0, 0.2, ModelShape::linear);
        let report = sufficient_condition_report(&own.spec, &own.domain, 1e-5);
        // 2 c1 c2^2 = 1, slack = 0.2
        assert!((report.feasibility_slack - 0.2).abs() < 1e-12);
        assert!(report.strictly_feasible);
        let i = own.spec.interval_radius();
        let want_diam = 4.0 * (1.0 + 10.0 * i * i);
        assert!((report.diameter_sq - want_diam).abs() < 1e-9);
        assert!((report.modulus_bound - 0.4 / want_diam).abs() < 1e-12);
        assert_eq!(report.rho_hat_below_bound, 1e-5 < report.modulus_bound);

        // no slack at kappa = 0 with these scales
        let tight = make_problem(0.5, 1.0, 0.0, ModelShape::linear);
        let r2 = sufficient_condition_report(&tight.spec, &tight.domain, 1e-5);
        assert!((r2.feasibility_slack - 0.0).abs() < 1e-12);
        assert!(!r2.strictly_feasible);
    }

    #[test]
    fn eps_hat_prescription_arithmetic() {
        // gap = 1: sqrt(1/4) ((1 + 2*2*1)/sqrt(2*2*1) + 1)^(-1/2) * eps
        let got = eps_hat_prescription(0.5, 1.0, 2.0, 1.0, 2.0, 1.0).unwrap();
        let inner: f64 = 5.0 / 2.0 + 1.0;
        let want = 0.5 * (0.25f64).sqrt() * inner.powf(-0.5);
        assert!((got - want).abs() < 1e-15);
        // the min with 1 engages for a huge gap
        let capped = eps_hat_prescription(0.5, 0.0, 1e9, 0.0, 1e9, 1e-9).unwrap();
        assert!(capped <= 0.5 + 1e-15);
        // rho_hat must exceed rho
        assert!(eps_hat_prescription(0.5, 2.0, 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn snapshots_accumulate_across_rounds() {
        let own = make_problem(0.5, 1.0, 0.2, ModelShape::linear);
        let problem = own.problem();
        let (iqrc, sfls, smd) = quick_configs();
        let out = run_iqrc(&problem, &iqrc, &sfls, &smd).unwrap();
        // each inner solve contributes >= 1 snapshot per level round
        let level_rounds: usize = out.rounds.iter().map(|r| r.level_rounds).sum();
        assert!(out.snapshots.len() >= level_rounds);
        for pair in out.snapshots.windows(2) {
            assert!(pair[0].iteration <= pair[1].iteration);
        }
    }
}
