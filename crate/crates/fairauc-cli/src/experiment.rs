//! A single training run: solve the constrained problem on the train split,
//! track model snapshots along the way, pick the train-feasible snapshot with
//! the best validation AUC, and evaluate the pick on the test split.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use fairauc::dataset::{split, Dataset};
use fairauc::iqrc::{run_iqrc, sufficient_condition_report, IqrcConfig};
use fairauc::levelset::{run_sfls, SflsConfig, SflsResult};
use fairauc::metrics::{fairness_report_for_scores, MetricReport, METRIC_REPORT_CSV_HEADER};
use fairauc::model::{save_checkpoint, ModelParams};
use fairauc::reformulation::{full_objective, PrimalPoint, ProblemSettings, ProblemSpec};
use fairauc::smd::{warmup_step_scale, Batching, SmdConfig, Snapshot, TrainingProblem};

use crate::config::{BatchSpec, ExperimentConfig, AUDIT_SLACK};

/// Header of `frontier.csv`.
pub const FRONTIER_CSV_HEADER: &str = "kappa,seed,auc,gap,f1,f2,feasible,wall_ms";

/// One sweep point: the test metrics and train residuals of the model a
/// single `(kappa, seed)` run selected.
#[derive(Debug, Clone)]
pub struct FrontierRow {
    pub kappa: f64,
    pub seed: u64,
    /// Test-split AUC of the selected model.
    pub auc: f64,
    /// Test-split fairness gap of the selected model.
    pub gap: f64,
    /// Train-split constraint surrogates at the selected model.
    pub f1: f64,
    pub f2: f64,
    /// Whether the selected model passed the train-split audit
    /// `f_i <= 1 + kappa + AUDIT_SLACK`.
    pub feasible: bool,
    pub wall_ms: u128,
}

impl FrontierRow {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.kappa, self.seed, self.auc, self.gap, self.f1, self.f2, self.feasible, self.wall_ms
        )
    }
}

/// Everything a run leaves behind in memory; the on-disk artifacts live in
/// [`ExperimentOutcome::run_dir`].
#[derive(Debug)]
pub struct ExperimentOutcome {
    pub row: FrontierRow,
    /// The selected model (snapshot with the best validation AUC among
    /// train-feasible ones, or the solver's returned solution if no snapshot
    /// passed the audit).
    pub model: ModelParams,
    pub test_report: MetricReport,
    pub snapshots_considered: usize,
    pub snapshots_feasible: usize,
    pub run_dir: PathBuf,
}

/// Assembles the frozen problem and solver configs for one `(kappa, seed)`
/// point. Shared between single runs and sweep workers.
struct RunContext<'a> {
    spec: ProblemSpec,
    train: &'a Dataset,
    smd: SmdConfig,
    sfls: SflsConfig,
    iqrc: Option<IqrcConfig>,
}

fn build_context<'a>(
    cfg: &ExperimentConfig,
    train: &'a Dataset,
    kappa: f64,
    seed: u64,
) -> Result<(RunContext<'a>, fairauc::model::ModelShape, fairauc::model::ParamDomain)> {
    let shape = cfg.model_shape(train.feature_dim())?;
    let domain = cfg.param_domain()?;
    let settings = ProblemSettings::new(cfg.problem.c1, cfg.problem.c2, kappa, cfg.fairness_kind()?);
    let spec = ProblemSpec::build(&settings, train, &shape, &domain)?;

    let batching = match &cfg.solver.smd.batch {
        BatchSpec::Size(n) => Batching::Minibatch(*n),
        BatchSpec::Named(_) => Batching::Full,
    };
    let mut smd = SmdConfig::new(cfg.solver.smd.iterations, batching, seed);
    smd.snapshot_every = Some(cfg.solver.smd.snapshot_every);

    let mut sfls = SflsConfig::new(
        cfg.solver.sfls.eps_opt,
        cfg.solver.smd.iterations,
        cfg.solver.sfls.max_outer,
    );
    sfls.theta = cfg.solver.sfls.theta;
    sfls.r0 = cfg.solver.sfls.r0;

    let iqrc = match (&cfg.solver.mode[..], &cfg.solver.iqrc) {
        ("weakly_convex", Some(section)) => {
            let mut c = IqrcConfig::new(section.outer_iterations, section.eps_hat, seed);
            c.rho_hat = section.rho_hat;
            c.delta = section.delta;
            Some(c)
        }
        _ => None,
    };

    Ok((RunContext { spec, train, smd, sfls, iqrc }, shape, domain))
}

/// Scores every point of `d` with `model`, in dataset order.
pub fn score_dataset(model: &ModelParams, d: &Dataset) -> Vec<f64> {
    d.points().iter().map(|p| model.score(&p.features)).collect()
}

/// The snapshot-selection rule: audit every tracked snapshot against the
/// original constraints on the train split, and among the feasible ones keep
/// the one with the best validation AUC (earliest snapshot wins ties).
/// Returns `None` when nothing passed the audit.
fn select_snapshot(
    spec: &ProblemSpec,
    train: &Dataset,
    val: &Dataset,
    snapshots: &[Snapshot],
    kind: fairauc::metrics::FairnessKind,
    tie_weight: f64,
) -> Result<(Option<usize>, usize)> {
    let budget = 1.0 + spec.kappa() + AUDIT_SLACK;
    let mut best: Option<(f64, usize)> = None;
    let mut feasible = 0usize;
    for (idx, snap) in snapshots.iter().enumerate() {
        let vals = full_objective(spec, train, &snap.point);
        if vals.f1 <= budget && vals.f2 <= budget {
            feasible += 1;
            let scores = score_dataset(&snap.point.model, val);
            let report = fairness_report_for_scores(val, &scores, kind, tie_weight)?;
            if best.map_or(true, |(auc, _)| report.auc > auc) {
                best = Some((report.auc, idx));
            }
        }
    }
    Ok((best.map(|(_, idx)| idx), feasible))
}

fn write_level_trace(path: &Path, result: &SflsResult) -> Result<()> {
    let mut text = String::from("k,r,upper,oracle_iterations,wall_ms\n");
    for row in &result.level_trace {
        text.push_str(&format!(
            "{},{},{},{},{}\n",
            row.k, row.r, row.upper, row.oracle_iterations, row.wall_ms
        ));
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Runs one experiment end to end and writes its artifacts under
/// `<output.dir>/kappa<k>_seed<s>/`: `checkpoint.txt`, `metrics.csv`, the
/// level trace, and (weakly convex mode) the displacement trace.
pub fn run_experiment(cfg: &ExperimentConfig, kappa: f64, seed: u64) -> Result<ExperimentOutcome> {
    let data = cfg.load_dataset()?;
    let (train, val, test) = split(&data, cfg.split.fractions, cfg.split.seed)?;
    let kind = cfg.fairness_kind()?;
    let tie_weight = cfg.problem.tie_weight;

    let (mut ctx, shape, domain) = build_context(cfg, &train, kappa, seed)?;
    let problem = TrainingProblem {
        spec: &ctx.spec,
        data: &train,
        domain: &domain,
        shape,
    };

    // Resolve the step scale once so that the warm-up damping is identical
    // for every oracle call of this run.
    ctx.smd.step_scale = match cfg.solver.smd.step_scale {
        Some(m) => Some(m),
        None => {
            let start_vals = full_objective(&ctx.spec, &train, &PrimalPoint::zeros(shape));
            let r0 = ctx.sfls.r0.unwrap_or_else(|| fairauc::levelset::init_level(&start_vals));
            let estimate = warmup_step_scale(&problem, r0, &ctx.smd)?;
            Some(cfg.solver.smd.step_scale_multiplier * estimate)
        }
    };

    let run_dir = cfg
        .output
        .dir
        .join(format!("kappa{kappa}_seed{seed}"));
    std::fs::create_dir_all(&run_dir)
        .with_context(|| format!("creating {}", run_dir.display()))?;

    let started = Instant::now();
    let (snapshots, fallback, condition_note) = match &ctx.iqrc {
        None => {
            let result = run_sfls(&problem, &ctx.sfls, &ctx.smd)?;
            write_level_trace(&run_dir.join("level_trace.csv"), &result)?;
            (result.snapshots, result.solution, None)
        }
        Some(iqrc_cfg) => {
            let report = sufficient_condition_report(&ctx.spec, &domain, iqrc_cfg.rho_hat);
            let result = run_iqrc(&problem, iqrc_cfg, &ctx.sfls, &ctx.smd)?;
            let mut text = String::from("s,displacement,level_rounds,smd_steps\n");
            for row in &result.rounds {
                text.push_str(&format!(
                    "{},{},{},{}\n",
                    row.s, row.displacement, row.level_rounds, row.smd_steps
                ));
            }
            let path = run_dir.join("displacement_trace.csv");
            std::fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
            (result.snapshots, result.solution, Some(report))
        }
    };

    let (selected_idx, snapshots_feasible) =
        select_snapshot(&ctx.spec, ctx.train, &val, &snapshots, kind, tie_weight)?;
    let selected = match selected_idx {
        Some(idx) => snapshots[idx].point.clone(),
        None => fallback,
    };
    let wall_ms = started.elapsed().as_millis();

    let train_vals = full_objective(&ctx.spec, &train, &selected);
    let budget = 1.0 + kappa + AUDIT_SLACK;
    let feasible = train_vals.f1 <= budget && train_vals.f2 <= budget;

    let test_scores = score_dataset(&selected.model, &test);
    let test_report = fairness_report_for_scores(&test, &test_scores, kind, tie_weight)?;

    let row = FrontierRow {
        kappa,
        seed,
        auc: test_report.auc,
        gap: test_report.fairness_gap,
        f1: train_vals.f1,
        f2: train_vals.f2,
        feasible,
        wall_ms,
    };

    let checkpoint_path = run_dir.join("checkpoint.txt");
    std::fs::write(&checkpoint_path, save_checkpoint(&selected.model))
        .with_context(|| format!("writing {}", checkpoint_path.display()))?;
    // The constraint audit depends on the interval variables as well as the
    // scorer, so they are stored next to the checkpoint (one per line, exact
    // round-trip formatting).
    let interval_path = run_dir.join("interval.txt");
    let interval_text: String = selected.ab.iter().map(|v| format!("{v:?}\n")).collect();
    std::fs::write(&interval_path, interval_text)
        .with_context(|| format!("writing {}", interval_path.display()))?;

    let mut metrics = format!("{METRIC_REPORT_CSV_HEADER}\n{}\n", test_report.to_csv_row());
    if let Some(report) = condition_note {
        metrics.push_str(&format!(
            "# sufficient condition: strictly_feasible={} slack={} rho_hat_below_bound={}\n",
            report.strictly_feasible, report.feasibility_slack, report.rho_hat_below_bound
        ));
    }
    let metrics_path = run_dir.join("metrics.csv");
    std::fs::write(&metrics_path, metrics)
        .with_context(|| format!("writing {}", metrics_path.display()))?;

    let row_path = run_dir.join("frontier_row.csv");
    std::fs::write(&row_path, format!("{FRONTIER_CSV_HEADER}\n{}\n", row.to_csv_row()))
        .with_context(|| format!("writing {}", row_path.display()))?;

    Ok(ExperimentOutcome {
        row,
        model: selected.model,
        test_report,
        snapshots_considered: snapshots.len(),
        snapshots_feasible,
        run_dir,
    })
}

/// Recomputes the feasibility flag of a stored run from its on-disk
/// artifacts, as an independent cross-check of the frontier row: reload the
/// scorer and interval variables, rebuild the problem, re-audit on the train
/// split.
pub fn audit_checkpoint(cfg: &ExperimentConfig, kappa: f64, run_dir: &Path) -> Result<bool> {
    let text = std::fs::read_to_string(run_dir.join("checkpoint.txt"))
        .with_context(|| format!("reading checkpoint in {}", run_dir.display()))?;
    let model = fairauc::model::load_checkpoint(&text)?;
    let interval_text = std::fs::read_to_string(run_dir.join("interval.txt"))
        .with_context(|| format!("reading interval variables in {}", run_dir.display()))?;
    let mut ab = [0.0; 10];
    let mut lines = interval_text.lines();
    for slot in ab.iter_mut() {
        let line = lines.next().context("interval.txt: expected 10 values")?;
        *slot = line.trim().parse().context("interval.txt: malformed value")?;
    }

    let data = cfg.load_dataset()?;
    let (train, _, _) = split(&data, cfg.split.fractions, cfg.split.seed)?;
    let shape = cfg.model_shape(train.feature_dim())?;
    let domain = cfg.param_domain()?;
    let settings = ProblemSettings::new(cfg.problem.c1, cfg.problem.c2, kappa, cfg.fairness_kind()?);
    let spec = ProblemSpec::build(&settings, &train, &shape, &domain)?;

    let vals = full_objective(&spec, &train, &PrimalPoint { model, ab });
    let budget = 1.0 + kappa + AUDIT_SLACK;
    Ok(vals.f1 <= budget && vals.f2 <= budget)
}
