//! Command-line front end: train scoring models under AUC-based fairness
//! budgets, evaluate and audit checkpoints, sweep budgets into Pareto
//! frontiers, and run the post-processing baseline.

use std::path::{Path, PathBuf};

use anyhow::{ensure, Context, Result};
use clap::{Args, Parser, Subcommand};
use fairauc::dataset::{split, Dataset};
use fairauc::metrics::{fairness_report_for_scores, METRIC_REPORT_CSV_HEADER};
use fairauc::model::{load_checkpoint, ModelParams};

use fairauc_cli::config::ExperimentConfig;
use fairauc_cli::experiment::{run_experiment, score_dataset, FRONTIER_CSV_HEADER};
use fairauc_cli::postprocess::post_process_baseline;
use fairauc_cli::sweep::pareto_sweep;

/// Budget used when the post-processing baseline trains its own scorer: large
/// enough that the constraints never bind.
const UNCONSTRAINED_KAPPA: f64 = 1e6;

#[derive(Parser)]
#[command(
    name = "fairauc",
    version,
    about = "Train and evaluate AUC-fair scoring models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Run seed; replaces the configured seed list.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory (beats FAIRAUC_OUT_DIR, which beats the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Sweep worker count (beats FAIRAUC_WORKERS, which beats the config).
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one model at the first configured budget and report the frontier row.
    Train(Common),
    /// Score the test split with a saved checkpoint and print its metric report.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Model checkpoint file.
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Run every configured (budget, seed) pair and write the frontier files.
    Sweep(Common),
    /// Grid-search a protected-group affine score transform; trains an
    /// unconstrained scorer first unless a checkpoint is given.
    Postprocess {
        #[command(flatten)]
        common: Common,
        /// Reuse this checkpoint instead of training.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Print metric reports (train/val/test) for a checkpoint; writes nothing.
    Audit {
        #[command(flatten)]
        common: Common,
        /// Model checkpoint file.
        #[arg(long)]
        checkpoint: PathBuf,
    },
}

/// Loads the config (environment overrides applied inside) and then lets
/// command-line flags win over both.
fn load_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
    if let Some(workers) = common.workers {
        ensure!(workers > 0, "--workers must be positive");
        cfg.sweep.workers = workers;
    }
    if let Some(seed) = common.seed {
        cfg.sweep.seeds = vec![seed];
    }
    Ok(cfg)
}

fn first_kappa(cfg: &ExperimentConfig) -> f64 {
    cfg.problem.kappa.values()[0]
}

fn first_seed(cfg: &ExperimentConfig) -> u64 {
    cfg.sweep.seeds[0]
}

fn load_model(path: &Path, expected_dim: usize) -> Result<ModelParams> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading checkpoint {}", path.display()))?;
    let model = load_checkpoint(&text)?;
    ensure!(
        model.shape().input_dim == expected_dim,
        "checkpoint expects {} features but the dataset has {}",
        model.shape().input_dim,
        expected_dim
    );
    Ok(model)
}

fn report_line(split_name: &str, report_csv: &str) -> String {
    format!("{split_name},{report_csv}")
}

fn splits(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset, Dataset)> {
    let data = cfg.load_dataset()?;
    Ok(split(&data, cfg.split.fractions, cfg.split.seed)?)
}

fn cmd_train(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let kappa = first_kappa(&cfg);
    let seed = first_seed(&cfg);
    let outcome = run_experiment(&cfg, kappa, seed)?;
    println!("{FRONTIER_CSV_HEADER}");
    println!("{}", outcome.row.to_csv_row());
    println!(
        "snapshots: {} tracked, {} feasible; artifacts in {}",
        outcome.snapshots_considered,
        outcome.snapshots_feasible,
        outcome.run_dir.display()
    );
    Ok(())
}

fn cmd_evaluate(common: &Common, checkpoint: &Path) -> Result<()> {
    let cfg = load_config(common)?;
    let (_, _, test) = splits(&cfg)?;
    let model = load_model(checkpoint, test.feature_dim())?;
    let report = fairness_report_for_scores(
        &test,
        &score_dataset(&model, &test),
        cfg.fairness_kind()?,
        cfg.problem.tie_weight,
    )?;
    std::fs::create_dir_all(&cfg.output.dir)?;
    let path = cfg.output.dir.join("evaluation.csv");
    std::fs::write(
        &path,
        format!("split,{METRIC_REPORT_CSV_HEADER}\n{}\n", report_line("test", &report.to_csv_row())),
    )?;
    println!("split,{METRIC_REPORT_CSV_HEADER}");
    println!("{}", report_line("test", &report.to_csv_row()));
    println!("written to {}", path.display());
    Ok(())
}

fn cmd_sweep(common: &Common) -> Result<()> {
    let cfg = load_config(common)?;
    let output = pareto_sweep(&cfg)?;
    println!("{FRONTIER_CSV_HEADER}");
    for row in &output.rows {
        println!("{}", row.to_csv_row());
    }
    if !output.failures.is_empty() {
        eprintln!("{} run(s) failed; see {}", output.failures.len(), output.summary_csv.display());
        for f in &output.failures {
            eprintln!("  kappa={} seed={}: {}", f.kappa, f.seed, f.error);
        }
    }
    println!(
        "frontier: {}\nsummary: {}\nplot: {}",
        output.frontier_csv.display(),
        output.summary_csv.display(),
        output.svg.display()
    );
    Ok(())
}

fn cmd_postprocess(common: &Common, checkpoint: Option<&Path>) -> Result<()> {
    let cfg = load_config(common)?;
    let kappa = first_kappa(&cfg);
    let seed = first_seed(&cfg);
    let (_, val, test) = splits(&cfg)?;
    let model = match checkpoint {
        Some(path) => load_model(path, val.feature_dim())?,
        None => {
            println!("no checkpoint given; training an unconstrained scorer first");
            run_experiment(&cfg, UNCONSTRAINED_KAPPA, seed)?.model
        }
    };
    let outcome = post_process_baseline(
        &model,
        &val,
        &test,
        cfg.fairness_kind()?,
        cfg.problem.tie_weight,
        kappa,
        seed,
    )?;
    std::fs::create_dir_all(&cfg.output.dir)?;
    let path = cfg.output.dir.join("postprocess.csv");
    let mut text = String::from("scale,shift,feasible,candidates\n");
    text.push_str(&format!(
        "{},{},{},{}\n",
        outcome.omega1, outcome.omega2, outcome.feasible, outcome.candidates
    ));
    text.push_str(&format!("split,{METRIC_REPORT_CSV_HEADER}\n"));
    text.push_str(&format!("{}\n", report_line("val", &outcome.val_report.to_csv_row())));
    text.push_str(&format!("{}\n", report_line("test", &outcome.test_report.to_csv_row())));
    std::fs::write(&path, &text)?;
    println!(
        "chose scale={} shift={} (feasible: {}) over {} candidates",
        outcome.omega1, outcome.omega2, outcome.feasible, outcome.candidates
    );
    println!("{FRONTIER_CSV_HEADER}");
    println!("{}", outcome.row.to_csv_row());
    println!("written to {}", path.display());
    Ok(())
}

fn cmd_audit(common: &Common, checkpoint: &Path) -> Result<()> {
    let cfg = load_config(common)?;
    let (train, val, test) = splits(&cfg)?;
    let model = load_model(checkpoint, train.feature_dim())?;
    let kind = cfg.fairness_kind()?;
    println!("split,{METRIC_REPORT_CSV_HEADER}");
    for (name, d) in [("train", &train), ("val", &val), ("test", &test)] {
        let report =
            fairness_report_for_scores(d, &score_dataset(&model, d), kind, cfg.problem.tie_weight)?;
        println!("{}", report_line(name, &report.to_csv_row()));
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Train(common) => cmd_train(common),
        Command::Evaluate { common, checkpoint } => cmd_evaluate(common, checkpoint),
        Command::Sweep(common) => cmd_sweep(common),
        Command::Postprocess { common, checkpoint } => {
            cmd_postprocess(common, checkpoint.as_deref())
        }
        Command::Audit { common, checkpoint } => cmd_audit(common, checkpoint),
    }
}
