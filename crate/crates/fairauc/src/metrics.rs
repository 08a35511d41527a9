//! Evaluation metrics: pairwise ranking quality (AUC) over arbitrary group
//! pairs, and the gap between two such pair-AUCs that the fairness notions
//! here are built on.
//!
//! Every supported fairness notion compares the scores of one group pair
//! (G1, G1') against a second pair (G2, G2'): the reported gap is
//! `|AUC(G1, G1') - AUC(G2, G2')|`. Pairs where both groups are the whole
//! space give AUC exactly 1/2, which recovers one-sided notions such as the
//! group-AUC deviation from 1/2.

use crate::dataset::{Dataset, GroupSelector, LabelFilter, SensitiveFilter};
use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Evaluation tie handling: a tied pair counts this much of a win.
pub const DEFAULT_TIE_WEIGHT: f64 = 0.5;

/// The supported AUC-based fairness notions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FairnessKind {
    /// Scores of the protected group vs the unprotected group, compared to
    /// chance level.
    GroupAuc,
    /// Cross-group positive-vs-negative ranking, one direction per pair.
    InterGroupPairwise,
    /// Within-group positive-vs-negative ranking, protected vs unprotected.
    IntraGroupPairwise,
    /// Protected positives vs all positives, compared to chance level.
    AegPositive,
    /// Protected negatives vs all negatives, compared to chance level.
    AegNegative,
    /// Positives vs protected negatives against protected positives vs
    /// negatives.
    BpsnBnsp,
}

impl FairnessKind {
    pub const ALL: [FairnessKind; 6] = [
        FairnessKind::GroupAuc,
        FairnessKind::InterGroupPairwise,
        FairnessKind::IntraGroupPairwise,
        FairnessKind::AegPositive,
        FairnessKind::AegNegative,
        FairnessKind::BpsnBnsp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            FairnessKind::GroupAuc => "group_auc",
            FairnessKind::InterGroupPairwise => "inter_group_pairwise",
            FairnessKind::IntraGroupPairwise => "intra_group_pairwise",
            FairnessKind::AegPositive => "aeg_positive",
            FairnessKind::AegNegative => "aeg_negative",
            FairnessKind::BpsnBnsp => "bpsn_bnsp",
        }
    }
}

impl std::fmt::Display for FairnessKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FairnessKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FairnessKind::ALL
            .iter()
            .find(|k| k.name() == s)
            .copied()
            .ok_or_else(|| Error::InvalidConfig {
                field: "fairness".into(),
                message: format!(
                    "unknown kind {s:?}; expected one of {:?}",
                    FairnessKind::ALL.map(|k| k.name())
                ),
            })
    }
}

/// The two group pairs `(G1, G1', G2, G2')` whose AUC difference a fairness
/// notion measures.
pub fn group_pairs_for(kind: FairnessKind) -> [GroupSelector; 4] {
    use LabelFilter::{Negative, Positive};
    use SensitiveFilter::{Protected, Unprotected};
    let g = GroupSelector::new;
    match kind {
        FairnessKind::GroupAuc => [
            g(LabelFilter::Any, Protected),
            g(LabelFilter::Any, Unprotected),
            GroupSelector::everyone(),
            GroupSelector::everyone(),
        ],
        FairnessKind::InterGroupPairwise => [
            g(Positive, Protected),
            g(Negative, Unprotected),
            g(Positive, Unprotected),
            g(Negative, Protected),
        ],
        FairnessKind::IntraGroupPairwise => [
            g(Positive, Protected),
            g(Negative, Protected),
            g(Positive, Unprotected),
            g(Negative, Unprotected),
        ],
        FairnessKind::AegPositive => [
            g(Positive, Protected),
            g(Positive, SensitiveFilter::Any),
            GroupSelector::everyone(),
            GroupSelector::everyone(),
        ],
        FairnessKind::AegNegative => [
            g(Negative, Protected),
            g(Negative, SensitiveFilter::Any),
            GroupSelector::everyone(),
            GroupSelector::everyone(),
        ],
        FairnessKind::BpsnBnsp => [
            g(Positive, SensitiveFilter::Any),
            g(Negative, Protected),
            g(Positive, Protected),
            g(Negative, SensitiveFilter::Any),
        ],
    }
}

/// Exact win/tie pair counts between the two membership sides.
///
/// A point may belong to both sides; the pair enumeration then includes it on
/// each side (self-pairs tie by definition). Counting first and applying the
/// tie weight once keeps the result identical to a literal double loop for
/// any tie weight.
fn pair_counts(scores: &[f64], membership: &[(bool, bool)]) -> (f64, f64, usize, usize) {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    let n_g = membership.iter().filter(|m| m.0).count();
    let n_gp = membership.iter().filter(|m| m.1).count();

    let mut wins = 0.0f64; // pairs with the G-side score strictly larger
    let mut ties = 0.0f64; // pairs with equal scores (self-pairs included)
    let mut gp_below = 0.0f64; // G'-members with strictly smaller score
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let mut g_here = 0.0f64;
        let mut gp_here = 0.0f64;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            let m = membership[order[j]];
            if m.0 {
                g_here += 1.0;
            }
            if m.1 {
                gp_here += 1.0;
            }
            j += 1;
        }
        wins += g_here * gp_below;
        ties += g_here * gp_here;
        gp_below += gp_here;
        i = j;
    }
    (wins, ties, n_g, n_gp)
}

/// Tie-aware pairwise ranking accuracy between two (possibly overlapping)
/// groups of scored points.
///
/// `membership[i] = (in_g, in_g')`. The value is the fraction of ordered
/// pairs (i in G, j in G') with `score_i > score_j`, counting ties at
/// `tie_weight`. Both groups must be nonempty and `tie_weight` must lie in
/// [0, 1].
pub fn empirical_auc(scores: &[f64], membership: &[(bool, bool)], tie_weight: f64) -> Result<f64> {
    if scores.len() != membership.len() {
        return Err(Error::LengthMismatch {
            expected: scores.len(),
            got: membership.len(),
            context: "membership flags vs scores",
        });
    }
    if !(0.0..=1.0).contains(&tie_weight) {
        return Err(Error::InvalidConfig {
            field: "tie_weight".into(),
            message: format!("{tie_weight} is not in [0, 1]"),
        });
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidConfig {
            field: "scores".into(),
            message: "scores must be finite".into(),
        });
    }
    let (wins, ties, n_g, n_gp) = pair_counts(scores, membership);
    if n_g == 0 {
        return Err(Error::EmptyGroup {
            selector: "left group of the AUC pair".into(),
        });
    }
    if n_gp == 0 {
        return Err(Error::EmptyGroup {
            selector: "right group of the AUC pair".into(),
        });
    }
    Ok((wins + tie_weight * ties) / (n_g as f64 * n_gp as f64))
}

/// A full fairness evaluation of one scorer on one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub kind: FairnessKind,
    /// Ranking accuracy of positives over negatives.
    pub auc: f64,
    /// `|AUC(G1, G1') - AUC(G2, G2')|`.
    pub fairness_gap: f64,
    /// AUC(G1, G1') and AUC(G2, G2').
    pub per_pair_aucs: [f64; 2],
    /// |G1|, |G1'|, |G2|, |G2'| in the evaluated dataset.
    pub group_sizes: [usize; 4],
}

/// CSV header matching [`MetricReport::to_csv_row`].
pub const METRIC_REPORT_CSV_HEADER: &str = "kind,auc,gap,auc_pair1,auc_pair2,n1,n1p,n2,n2p";

impl MetricReport {
    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.kind,
            self.auc,
            self.fairness_gap,
            self.per_pair_aucs[0],
            self.per_pair_aucs[1],
            self.group_sizes[0],
            self.group_sizes[1],
            self.group_sizes[2],
            self.group_sizes[3],
        )
    }
}

/// Evaluates a fairness notion on precomputed scores (aligned with the
/// dataset's point order).
pub fn fairness_report_for_scores(
    d: &Dataset,
    scores: &[f64],
    kind: FairnessKind,
    tie_weight: f64,
) -> Result<MetricReport> {
    if scores.len() != d.len() {
        return Err(Error::LengthMismatch {
            expected: d.len(),
            got: scores.len(),
            context: "scores vs dataset",
        });
    }
    let pairs = group_pairs_for(kind);
    let member = |sel: &GroupSelector| -> Vec<bool> {
        d.points().iter().map(|p| sel.matches(p)).collect()
    };
    let sides: Vec<Vec<bool>> = pairs.iter().map(member).collect();
    let group_sizes = [
        sides[0].iter().filter(|b| **b).count(),
        sides[1].iter().filter(|b| **b).count(),
        sides[2].iter().filter(|b| **b).count(),
        sides[3].iter().filter(|b| **b).count(),
    ];
    for (i, sel) in pairs.iter().enumerate() {
        if group_sizes[i] == 0 {
            return Err(Error::EmptyGroup {
                selector: sel.to_string(),
            });
        }
    }

    let pair_auc = |a: &[bool], b: &[bool]| -> Result<f64> {
        let membership: Vec<(bool, bool)> =
            a.iter().zip(b).map(|(&x, &y)| (x, y)).collect();
        empirical_auc(scores, &membership, tie_weight)
    };
    let auc1 = pair_auc(&sides[0], &sides[1])?;
    let auc2 = pair_auc(&sides[2], &sides[3])?;

    let pos = member(&GroupSelector::positives());
    let neg = member(&GroupSelector::negatives());
    if !pos.iter().any(|b| *b) {
        return Err(Error::EmptyGroup {
            selector: GroupSelector::positives().to_string(),
        });
    }
    if !neg.iter().any(|b| *b) {
        return Err(Error::EmptyGroup {
            selector: GroupSelector::negatives().to_string(),
        });
    }
    let auc = pair_auc(&pos, &neg)?;

    Ok(MetricReport {
        kind,
        auc,
        fairness_gap: (auc1 - auc2).abs(),
        per_pair_aucs: [auc1, auc2],
        group_sizes,
    })
}

/// Scores every point with the model, then evaluates the fairness notion.
pub fn fairness_gap(
    d: &Dataset,
    m: &ModelParams,
    kind: FairnessKind,
    tie_weight: f64,
) -> Result<MetricReport> {
    let scores: Vec<f64> = d.points().iter().map(|p| m.score(&p.features)).collect();
    fairness_report_for_scores(d, &scores, kind, tie_weight)
}
