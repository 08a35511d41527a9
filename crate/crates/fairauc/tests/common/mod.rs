//! Shared fixtures for the solver integration tests: small synthetic
//! datasets with known structure and an owned problem bundle that hands out
//! borrowed `TrainingProblem` views.

use fairauc::dataset::{DataPoint, Dataset};
use fairauc::metrics::FairnessKind;
use fairauc::model::{ModelShape, ParamDomain};
use fairauc::reformulation::{ProblemSettings, ProblemSpec};
use fairauc::smd::TrainingProblem;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Linearly separable 3-feature data with only mild group structure: the
/// first feature carries the label, the rest are noise and a weak group
/// direction. Constraints stay slack for moderate budgets.
pub fn separable(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|i| {
            let label: i8 = if i % 2 == 0 { 1 } else { -1 };
            let sensitive: i8 = if i % 3 == 0 { 1 } else { -1 };
            let l = label as f64;
            let g = sensitive as f64;
            DataPoint {
                features: vec![
                    0.9 * l + 0.15 * rng.random_range(-1.0..1.0),
                    0.3 * rng.random_range(-1.0..1.0),
                    0.2 * g + 0.2 * rng.random_range(-1.0..1.0),
                ],
                label,
                sensitive,
            }
        })
        .collect();
    Dataset::new(points, 3).unwrap()
}

/// Data where ranking accuracy and group parity fight: the unprotected
/// group's dominant feature carries most of the label signal, so an accurate
/// scorer separates the groups and the fairness constraints bind.
pub fn biased(n: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n)
        .map(|i| {
            let label: i8 = if rng.random_range(0.0..1.0) < 0.5 { 1 } else { -1 };
            let sensitive: i8 = if i % 3 == 0 { 1 } else { -1 };
            let l = label as f64;
            let prot = if sensitive == 1 { 1.0 } else { 0.0 };
            DataPoint {
                features: vec![
                    (1.0 - prot) * (0.6 + 0.4 * l) + 0.1 * rng.random_range(-1.0..1.0),
                    0.3 * l * prot + 0.2 * rng.random_range(-1.0..1.0),
                    0.15 * rng.random_range(-1.0..1.0),
                ],
                label,
                sensitive,
            }
        })
        .collect();
    Dataset::new(points, 3).unwrap()
}

/// A dataset plus everything a `TrainingProblem` borrows.
pub struct Owned {
    pub data: Dataset,
    pub spec: ProblemSpec,
    pub domain: ParamDomain,
    pub shape: ModelShape,
}

impl Owned {
    pub fn problem(&self) -> TrainingProblem<'_> {
        TrainingProblem {
            spec: &self.spec,
            data: &self.data,
            domain: &self.domain,
            shape: self.shape,
        }
    }
}

/// Freezes a group-AUC-constrained problem over `data`.
pub fn problem_on(data: Dataset, c1: f64, c2: f64, kappa: f64, radius: f64, shape: ModelShape) -> Owned {
    let domain = ParamDomain::new(radius).unwrap();
    let settings = ProblemSettings::new(c1, c2, kappa, FairnessKind::GroupAuc);
    let spec = ProblemSpec::build(&settings, &data, &shape, &domain).unwrap();
    Owned {
        data,
        spec,
        domain,
        shape,
    }
}
