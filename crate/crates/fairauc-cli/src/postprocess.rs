//! Score post-processing baseline: leave the trained scorer untouched and
//! instead rescale and shift only the protected group's scores, picking the
//! affine transform from an exhaustive grid by validation metrics.

use std::time::Instant;

use anyhow::{ensure, Result};
use fairauc::dataset::Dataset;
use fairauc::metrics::{fairness_report_for_scores, FairnessKind, MetricReport};
use fairauc::model::ModelParams;

use crate::experiment::FrontierRow;

/// Scale grid: 0 to 5 in steps of 0.05 (101 values, `1.0` exactly on it).
pub fn scale_grid() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 20.0).collect()
}

/// Shift grid: −3 to 3 in steps of 0.1 (61 values, `0.0` exactly on it).
pub fn shift_grid() -> Vec<f64> {
    (0..=60).map(|j| (j as f64 - 30.0) / 10.0).collect()
}

/// Applies `s ↦ omega1·s + omega2` to protected points only. Unprotected
/// scores are copied bit-for-bit.
pub fn transform_scores(scores: &[f64], d: &Dataset, omega1: f64, omega2: f64) -> Vec<f64> {
    scores
        .iter()
        .zip(d.points())
        .map(|(s, p)| {
            if p.sensitive == 1 {
                omega1 * s + omega2
            } else {
                *s
            }
        })
        .collect()
}

/// The chosen transform and its evaluation.
#[derive(Debug, Clone)]
pub struct PostProcessOutcome {
    pub omega1: f64,
    pub omega2: f64,
    /// Whether any grid point met the validation gap budget.
    pub feasible: bool,
    pub val_report: MetricReport,
    pub test_report: MetricReport,
    /// Grid points evaluated (always the full grid).
    pub candidates: usize,
    pub row: FrontierRow,
}

/// Grid-searches the protected-group affine transform.
///
/// Every (scale, shift) pair is scored on the validation split; among those
/// with fairness gap ≤ `kappa` the one with the highest AUC wins, ties broken
/// by smaller gap and then by smaller distance `‖(scale−1, shift)‖` from the
/// identity. If nothing meets the budget the smallest-gap point is returned
/// with `feasible = false`. The winner is then evaluated on the test split.
///
/// The frontier row's `f1`/`f2` columns hold surrogate constraint values of a
/// weight-space model; they do not apply to a score-space transform and are
/// reported as NaN.
pub fn post_process_baseline(
    model: &ModelParams,
    val: &Dataset,
    test: &Dataset,
    kind: FairnessKind,
    tie_weight: f64,
    kappa: f64,
    seed: u64,
) -> Result<PostProcessOutcome> {
    ensure!(
        kappa.is_finite() && kappa >= 0.0,
        "kappa: {kappa} is not a nonnegative finite budget"
    );
    let started = Instant::now();
    let base_val: Vec<f64> = val.points().iter().map(|p| model.score(&p.features)).collect();
    let base_test: Vec<f64> = test.points().iter().map(|p| model.score(&p.features)).collect();

    // (omega1, omega2, auc, gap, squared distance from the identity)
    let mut best_feasible: Option<(f64, f64, f64, f64, f64)> = None;
    let mut best_gap: Option<(f64, f64, f64, f64, f64)> = None;
    let mut candidates = 0usize;
    for &w1 in &scale_grid() {
        for &w2 in &shift_grid() {
            candidates += 1;
            let scores = transform_scores(&base_val, val, w1, w2);
            let report = fairness_report_for_scores(val, &scores, kind, tie_weight)?;
            let dist = (w1 - 1.0) * (w1 - 1.0) + w2 * w2;
            let entry = (w1, w2, report.auc, report.fairness_gap, dist);
            if report.fairness_gap <= kappa {
                let better = match &best_feasible {
                    None => true,
                    Some(b) => {
                        entry.2 > b.2
                            || (entry.2 == b.2 && entry.3 < b.3)
                            || (entry.2 == b.2 && entry.3 == b.3 && entry.4 < b.4)
                    }
                };
                if better {
                    best_feasible = Some(entry);
                }
            }
            let better_gap = match &best_gap {
                None => true,
                Some(b) => {
                    entry.3 < b.3
                        || (entry.3 == b.3 && entry.2 > b.2)
                        || (entry.3 == b.3 && entry.2 == b.2 && entry.4 < b.4)
                }
            };
            if better_gap {
                best_gap = Some(entry);
            }
        }
    }

    let feasible = best_feasible.is_some();
    let (w1, w2, ..) = best_feasible
        .or(best_gap)
        .expect("the grid is never empty");
    let val_report =
        fairness_report_for_scores(val, &transform_scores(&base_val, val, w1, w2), kind, tie_weight)?;
    let test_report = fairness_report_for_scores(
        test,
        &transform_scores(&base_test, test, w1, w2),
        kind,
        tie_weight,
    )?;
    let row = FrontierRow {
        kappa,
        seed,
        auc: test_report.auc,
        gap: test_report.fairness_gap,
        f1: f64::NAN,
        f2: f64::NAN,
        feasible,
        wall_ms: started.elapsed().as_millis(),
    };
    Ok(PostProcessOutcome {
        omega1: w1,
        omega2: w2,
        feasible,
        val_report,
        test_report,
        candidates,
        row,
    })
}
