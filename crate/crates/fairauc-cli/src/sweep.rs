//! The Pareto sweep: run every `(kappa, seed)` grid point, aggregate the
//! frontier statistics per budget, and emit `frontier.csv`,
//! `frontier_summary.csv`, and `frontier.svg`.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::experiment::{audit_checkpoint, run_experiment, FrontierRow, FRONTIER_CSV_HEADER};
use crate::plot::{emit_plot, PlotPoint, PlotSeries};

/// Per-budget mean and standard error over the sweep seeds.
#[derive(Debug, Clone)]
pub struct AggregatedRow {
    pub kappa: f64,
    /// Seeds that finished; the statistics are over these.
    pub runs: usize,
    pub mean_auc: f64,
    pub se_auc: f64,
    pub mean_gap: f64,
    pub se_gap: f64,
    /// Fraction of finished runs whose selected model passed the train audit.
    pub feasible_fraction: f64,
}

/// A failed grid point, kept so the sweep can finish and report it.
#[derive(Debug, Clone)]
pub struct FailedRun {
    pub kappa: f64,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug)]
pub struct SweepOutput {
    pub rows: Vec<FrontierRow>,
    pub failures: Vec<FailedRun>,
    pub aggregated: Vec<AggregatedRow>,
    pub frontier_csv: PathBuf,
    pub summary_csv: PathBuf,
    pub svg: PathBuf,
}

/// Sample mean and standard error of the mean; SE is 0 for a single value.
fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn aggregate(kappas: &[f64], rows: &[FrontierRow]) -> Vec<AggregatedRow> {
    let mut out = Vec::new();
    for &kappa in kappas {
        let group: Vec<&FrontierRow> = rows.iter().filter(|r| r.kappa == kappa).collect();
        if group.is_empty() {
            continue;
        }
        let aucs: Vec<f64> = group.iter().map(|r| r.auc).collect();
        let gaps: Vec<f64> = group.iter().map(|r| r.gap).collect();
        let (mean_auc, se_auc) = mean_se(&aucs);
        let (mean_gap, se_gap) = mean_se(&gaps);
        let feasible = group.iter().filter(|r| r.feasible).count() as f64;
        out.push(AggregatedRow {
            kappa,
            runs: group.len(),
            mean_auc,
            se_auc,
            mean_gap,
            se_gap,
            feasible_fraction: feasible / group.len() as f64,
        });
    }
    out
}

/// Runs the full grid with up to `sweep.workers` concurrent runs. Each grid
/// point owns its seed and writes into its own run directory; failures are
/// recorded and the sweep continues. Aggregation and file emission happen on
/// the calling thread afterwards.
pub fn pareto_sweep(cfg: &ExperimentConfig) -> Result<SweepOutput> {
    let kappas = cfg.problem.kappa.values();
    if kappas.len() < 2 {
        bail!("problem.kappa: a sweep needs at least 2 budgets, got {}", kappas.len());
    }
    let seeds = cfg.sweep.seeds.clone();
    let grid: Vec<(f64, u64)> = kappas
        .iter()
        .flat_map(|&k| seeds.iter().map(move |&s| (k, s)))
        .collect();

    std::fs::create_dir_all(&cfg.output.dir)
        .with_context(|| format!("creating {}", cfg.output.dir.display()))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.sweep.workers)
        .build()
        .context("building the sweep worker pool")?;

    let results: Vec<(f64, u64, Result<FrontierRow>)> = pool.install(|| {
        grid.par_iter()
            .map(|&(kappa, seed)| {
                let result = run_experiment(cfg, kappa, seed).and_then(|out| {
                    // Independent cross-check: the stored flag must be
                    // reproducible from the on-disk artifacts alone.
                    let recomputed = audit_checkpoint(cfg, kappa, &out.run_dir)?;
                    if recomputed != out.row.feasible {
                        bail!(
                            "feasibility flag mismatch for kappa={kappa} seed={seed}: \
                             stored {} vs recomputed {recomputed}",
                            out.row.feasible
                        );
                    }
                    Ok(out.row)
                });
                (kappa, seed, result)
            })
            .collect()
    });

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (kappa, seed, result) in results {
        match result {
            Ok(row) => rows.push(row),
            Err(e) => failures.push(FailedRun {
                kappa,
                seed,
                error: format!("{e:#}"),
            }),
        }
    }
    rows.sort_by(|a, b| (a.kappa, a.seed).partial_cmp(&(b.kappa, b.seed)).unwrap());

    let aggregated = aggregate(&kappas, &rows);

    let frontier_csv = cfg.output.dir.join("frontier.csv");
    let mut text = String::from(FRONTIER_CSV_HEADER);
    text.push('\n');
    for row in &rows {
        text.push_str(&row.to_csv_row());
        text.push('\n');
    }
    std::fs::write(&frontier_csv, text)
        .with_context(|| format!("writing {}", frontier_csv.display()))?;

    let summary_csv = cfg.output.dir.join("frontier_summary.csv");
    let mut text = String::from("kappa,runs,mean_auc,se_auc,mean_gap,se_gap,feasible_fraction\n");
    for row in &aggregated {
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            row.kappa, row.runs, row.mean_auc, row.se_auc, row.mean_gap, row.se_gap,
            row.feasible_fraction
        ));
    }
    std::fs::write(&summary_csv, text)
        .with_context(|| format!("writing {}", summary_csv.display()))?;

    if !failures.is_empty() {
        let errors_csv = cfg.output.dir.join("sweep_errors.csv");
        let mut text = String::from("kappa,seed,error\n");
        for f in &failures {
            text.push_str(&format!("{},{},{:?}\n", f.kappa, f.seed, f.error));
        }
        std::fs::write(&errors_csv, text)
            .with_context(|| format!("writing {}", errors_csv.display()))?;
    }

    let series = PlotSeries {
        label: match cfg.solver.mode.as_str() {
            "weakly_convex" => "iqrc".into(),
            _ => "sfls".into(),
        },
        points: aggregated
            .iter()
            .map(|row| PlotPoint {
                x: row.mean_gap,
                y: row.mean_auc,
                x_err: row.se_gap,
                y_err: row.se_auc,
                tag: format!("kappa={}", row.kappa),
            })
            .collect(),
    };
    let svg = cfg.output.dir.join("frontier.svg");
    std::fs::write(&svg, emit_plot(&[series])?)
        .with_context(|| format!("writing {}", svg.display()))?;

    Ok(SweepOutput {
        rows,
        failures,
        aggregated,
        frontier_csv,
        summary_csv,
        svg,
    })
}
