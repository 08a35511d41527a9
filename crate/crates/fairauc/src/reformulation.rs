//! The saddle-point reformulation of AUC training under AUC-based fairness
//! constraints.
//!
//! Training minimizes a pairwise quadratic surrogate of the AUC loss subject
//! to two surrogate fairness constraints. Each pairwise expectation
//! `E[c1 (h(x) - h(x') - c2)^2 | x in G, x' in G']` is rewritten — via the
//! classic square-loss decomposition — as a min-max over three scalars
//! (a, b, alpha) of expectations of *per-sample* kernels, which is what makes
//! unbiased minibatch gradients possible without touching O(n^2) pairs.
//!
//! Five group pairs are tracked, in a fixed order: the accuracy pair
//! (positives, negatives), then the four pairs that make up the two fairness
//! constraints. With `y = (simplex weights, scaled alphas)` the whole
//! constrained problem becomes `min_x max_y phi(x, y) - d_y(y)` plus a level
//! parameter `r`; this module provides the kernels, the assembled `phi`, its
//! exact gradients, and the full-batch objective values.

use crate::dataset::{DataPoint, Dataset, GroupSelector};
use crate::error::{Error, Result};
use crate::metrics::{group_pairs_for, FairnessKind};
use crate::model::{score_bound, ModelParams, ModelShape, ParamDomain};
use crate::vecops;

/// Number of tracked group pairs: accuracy plus four constraint pairs.
pub const PAIR_COUNT: usize = 5;

/// Which simplex coordinate weights each pair: the accuracy pair rides on
/// coordinate 0, the first constraint's two pairs on coordinate 1, the second
/// constraint's two pairs on coordinate 2.
pub const ALPHA_GROUP: [usize; PAIR_COUNT] = [0, 1, 1, 2, 2];

/// A full primal iterate: the scorer plus the five (a, b) center pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct PrimalPoint {
    pub model: ModelParams,
    /// Laid out as `[a0, b0, a1, b1, ..., a4, b4]`.
    pub ab: [f64; 2 * PAIR_COUNT],
}

impl PrimalPoint {
    /// The all-zero point: a constant scorer with centered (a, b).
    pub fn zeros(shape: ModelShape) -> Self {
        Self {
            model: ModelParams::zeros(shape),
            ab: [0.0; 2 * PAIR_COUNT],
        }
    }

    pub fn a(&self, i: usize) -> f64 {
        self.ab[2 * i]
    }

    pub fn b(&self, i: usize) -> f64 {
        self.ab[2 * i + 1]
    }

    /// Total flat length: model weights then the ten (a, b) entries.
    pub fn flat_len(&self) -> usize {
        self.model.weights().len() + 2 * PAIR_COUNT
    }

    /// Flattens to `[weights..., ab...]` — the layout `grad_x_phi` uses.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.flat_len());
        out.extend_from_slice(self.model.weights());
        out.extend_from_slice(&self.ab);
        out
    }

    /// Rebuilds a point from the flat layout.
    pub fn from_flat(shape: ModelShape, flat: &[f64]) -> Result<Self> {
        let wlen = shape.weight_len();
        if flat.len() != wlen + 2 * PAIR_COUNT {
            return Err(Error::LengthMismatch {
                expected: wlen + 2 * PAIR_COUNT,
                got: flat.len(),
                context: "flat primal vector",
            });
        }
        let model = ModelParams::from_weights(shape, flat[..wlen].to_vec())?;
        let mut ab = [0.0; 2 * PAIR_COUNT];
        ab.copy_from_slice(&flat[wlen..]);
        Ok(Self { model, ab })
    }
}

/// A dual iterate: simplex weights over the three objective components and
/// the five scaled alphas (each bounded by its simplex weight times the
/// interval radius).
#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint {
    pub simplex: [f64; 3],
    pub alpha: [f64; PAIR_COUNT],
}

impl DualPoint {
    /// The canonical start: uniform simplex, zero alphas.
    pub fn initial() -> Self {
        Self {
            simplex: [1.0 / 3.0; 3],
            alpha: [0.0; PAIR_COUNT],
        }
    }

    /// The unscaled alpha `alpha_i / simplex_{group(i)}`, with 0/0 = 0.
    pub fn ratio(&self, i: usize) -> f64 {
        let w = self.simplex[ALPHA_GROUP[i]];
        if w == 0.0 {
            0.0
        } else {
            self.alpha[i] / w
        }
    }

    /// Checks simplex and scaled-interval membership within `tol`.
    pub fn check_membership(&self, interval_radius: f64, tol: f64) -> Result<()> {
        let sum: f64 = self.simplex.iter().sum();
        if (sum - 1.0).abs() > tol || self.simplex.iter().any(|v| *v < -tol) {
            return Err(Error::InvalidDualPoint(format!(
                "simplex {:?} does not sum to 1 within {tol}",
                self.simplex
            )));
        }
        for i in 0..PAIR_COUNT {
            let cap = self.simplex[ALPHA_GROUP[i]] * interval_radius;
            if self.alpha[i].abs() > cap + tol {
                return Err(Error::InvalidDualPoint(format!(
                    "alpha[{i}] = {} exceeds its scaled bound {cap}",
                    self.alpha[i]
                )));
            }
        }
        Ok(())
    }
}

/// Scalar settings of the training problem.
#[derive(Debug, Clone)]
pub struct ProblemSettings {
    /// Scale of the quadratic pairwise loss.
    pub c1: f64,
    /// Margin of the quadratic pairwise loss.
    pub c2: f64,
    /// Fairness budget: each constraint requires its surrogate value <= 1 + kappa.
    pub kappa: f64,
    pub kind: FairnessKind,
    /// Override for the (a, b, alpha) interval radius; `None` computes
    /// `2 * score_bound + 1`.
    pub interval_radius: Option<f64>,
}

impl ProblemSettings {
    pub fn new(c1: f64, c2: f64, kappa: f64, kind: FairnessKind) -> Self {
        Self {
            c1,
            c2,
            kappa,
            kind,
            interval_radius: None,
        }
    }
}

/// A frozen training problem: loss scales, budget, the five group pairs in
/// canonical order, their empirical probabilities, and the interval radius.
///
/// Pair order: `(positives, negatives)`, `(G1', G1)`, `(G2, G2')`,
/// `(G2', G2)`, `(G1, G1')` — the first constraint sums pairs 1 and 2, the
/// second sums pairs 3 and 4.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    c1: f64,
    c2: f64,
    kappa: f64,
    kind: FairnessKind,
    pair_table: [(GroupSelector, GroupSelector); PAIR_COUNT],
    probs: [(f64, f64); PAIR_COUNT],
    interval_radius: f64,
}

impl ProblemSpec {
    /// Freezes a problem against a dataset: the group probabilities are the
    /// empirical frequencies in `d` (every referenced group must be
    /// populated), and the interval radius defaults to `2 * score_bound + 1`
    /// for the given model shape and weight domain.
    pub fn build(
        settings: &ProblemSettings,
        d: &Dataset,
        shape: &ModelShape,
        dom: &ParamDomain,
    ) -> Result<Self> {
        if !(settings.c1.is_finite() && settings.c1 > 0.0) {
            return Err(Error::InvalidConfig {
                field: "c1".into(),
                message: format!("{} is not a positive real", settings.c1),
            });
        }
        if !(settings.c2.is_finite() && settings.c2 >= 0.0) {
            return Err(Error::InvalidConfig {
                field: "c2".into(),
                message: format!("{} is not a nonnegative real", settings.c2),
            });
        }
        if !(settings.kappa.is_finite() && settings.kappa >= 0.0) {
            return Err(Error::InvalidConfig {
                field: "kappa".into(),
                message: format!("{} is not a nonnegative real", settings.kappa),
            });
        }

        let [g1, g1p, g2, g2p] = group_pairs_for(settings.kind);
        let pair_table = [
            (GroupSelector::positives(), GroupSelector::negatives()),
            (g1p, g1),
            (g2, g2p),
            (g2p, g2),
            (g1, g1p),
        ];

        let mut probs = [(0.0, 0.0); PAIR_COUNT];
        for (i, (g, gp)) in pair_table.iter().enumerate() {
            let pg = crate::dataset::group_probability(d, g);
            let pgp = crate::dataset::group_probability(d, gp);
            if pg == 0.0 {
                return Err(Error::EmptyGroup {
                    selector: g.to_string(),
                });
            }
            if pgp == 0.0 {
                return Err(Error::EmptyGroup {
                    selector: gp.to_string(),
                });
            }
            probs[i] = (pg, pgp);
        }

        let bound = score_bound(shape, dom, d);
        let interval_radius = match settings.interval_radius {
            Some(i) => {
                if !(i.is_finite() && i > 0.0) {
                    return Err(Error::InvalidConfig {
                        field: "interval_radius".into(),
                        message: format!("{i} is not a positive real"),
                    });
                }
                if i < 2.0 * bound {
                    return Err(Error::InvalidConfig {
                        field: "interval_radius".into(),
                        message: format!(
                            "{i} is below twice the score bound {bound}; the optimal \
                             centers and slopes would be clipped"
                        ),
                    });
                }
                i
            }
            None => 2.0 * bound + 1.0,
        };

        Ok(Self {
            c1: settings.c1,
            c2: settings.c2,
            kappa: settings.kappa,
            kind: settings.kind,
            pair_table,
            probs,
            interval_radius,
        })
    }

    pub fn c1(&self) -> f64 {
        self.c1
    }

    pub fn c2(&self) -> f64 {
        self.c2
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn kind(&self) -> FairnessKind {
        self.kind
    }

    pub fn interval_radius(&self) -> f64 {
        self.interval_radius
    }

    pub fn pair(&self, i: usize) -> (&GroupSelector, &GroupSelector) {
        (&self.pair_table[i].0, &self.pair_table[i].1)
    }

    pub fn pair_probs(&self, i: usize) -> (f64, f64) {
        self.probs[i]
    }

    /// Both membership indicators of one sample for pair `i`.
    fn membership(&self, z: &DataPoint, i: usize) -> (bool, bool) {
        (
            self.pair_table[i].0.matches(z),
            self.pair_table[i].1.matches(z),
        )
    }
}

/// The per-sample min kernel of pair `i`: its dataset mean over `z`, at the
/// optimal centers, reproduces the pair's quadratic loss up to the alpha
/// term.
pub fn sample_f(spec: &ProblemSpec, x: &PrimalPoint, z: &DataPoint, i: usize) -> f64 {
    let h = x.model.score(&z.features);
    sample_f_with_score(spec, x, z, i, h)
}

fn sample_f_with_score(spec: &ProblemSpec, x: &PrimalPoint, z: &DataPoint, i: usize, h: f64) -> f64 {
    let (c1, c2) = (spec.c1, spec.c2);
    let (pg, pgp) = spec.probs[i];
    let (in_g, in_gp) = spec.membership(z, i);
    let mut v = c1 * c2 * c2;
    if in_g {
        let d = h - x.a(i);
        v += (-2.0 * c1 * c2 * h + c1 * d * d) / pg;
    }
    if in_gp {
        let d = h - x.b(i);
        v += (2.0 * c1 * c2 * h + c1 * d * d) / pgp;
    }
    v
}

/// The per-sample max kernel of pair `i`: its dataset mean is twice the loss
/// scale times the difference of conditional mean scores.
pub fn sample_g(spec: &ProblemSpec, m: &ModelParams, z: &DataPoint, i: usize) -> f64 {
    let h = m.score(&z.features);
    sample_g_with_score(spec, z, i, h)
}

fn sample_g_with_score(spec: &ProblemSpec, z: &DataPoint, i: usize, h: f64) -> f64 {
    let (pg, pgp) = spec.probs[i];
    let (in_g, in_gp) = spec.membership(z, i);
    let mut v = 0.0;
    if in_g {
        v += 2.0 * spec.c1 * h / pg;
    }
    if in_gp {
        v -= 2.0 * spec.c1 * h / pgp;
    }
    v
}

/// All ten kernels of one sample, sharing a single score evaluation.
pub(crate) fn sample_kernels(
    spec: &ProblemSpec,
    x: &PrimalPoint,
    z: &DataPoint,
) -> (f64, [f64; PAIR_COUNT], [f64; PAIR_COUNT]) {
    let h = x.model.score(&z.features);
    let mut f = [0.0; PAIR_COUNT];
    let mut g = [0.0; PAIR_COUNT];
    for i in 0..PAIR_COUNT {
        f[i] = sample_f_with_score(spec, x, z, i, h);
        g[i] = sample_g_with_score(spec, z, i, h);
    }
    (h, f, g)
}

/// Assembles the three objective components from raw pair kernels:
/// `(accuracy - r, constraint1 - 1 - kappa, constraint2 - 1 - kappa)`.
pub(crate) fn assemble_components(spec: &ProblemSpec, f: &[f64; PAIR_COUNT], r: f64) -> [f64; 3] {
    [
        f[0] - r,
        f[1] + f[2] - 1.0 - spec.kappa,
        f[3] + f[4] - 1.0 - spec.kappa,
    ]
}

/// The level-shifted min-kernel vector of one sample.
pub fn f_vector(spec: &ProblemSpec, x: &PrimalPoint, z: &DataPoint, r: f64) -> [f64; 3] {
    let (_, f, _) = sample_kernels(spec, x, z);
    assemble_components(spec, &f, r)
}

/// The max-kernel vector of one sample, in canonical pair order.
pub fn g_vector(spec: &ProblemSpec, m: &ModelParams, z: &DataPoint) -> [f64; PAIR_COUNT] {
    let h = m.score(&z.features);
    let mut g = [0.0; PAIR_COUNT];
    for (i, gi) in g.iter_mut().enumerate() {
        *gi = sample_g_with_score(spec, z, i, h);
    }
    g
}

/// The per-sample saddle integrand: `y.simplex . f_vector + y.alpha . g_vector`.
pub fn phi(spec: &ProblemSpec, x: &PrimalPoint, y: &DualPoint, z: &DataPoint, r: f64) -> f64 {
    let fv = f_vector(spec, x, z, r);
    let gv = g_vector(spec, &x.model, z);
    vecops::dot(&y.simplex, &fv) + vecops::dot(&y.alpha, &gv)
}

/// `out += scale * d phi / d x` for one sample, in the flat layout
/// `[weights..., a0, b0, ..., a4, b4]`.
pub(crate) fn accumulate_grad_x(
    spec: &ProblemSpec,
    x: &PrimalPoint,
    y: &DualPoint,
    z: &DataPoint,
    scale: f64,
    out: &mut [f64],
) {
    let h = x.model.score(&z.features);
    let wlen = x.model.weights().len();
    let (c1, c2) = (spec.c1, spec.c2);
    let mut dphi_dh = 0.0;
    for i in 0..PAIR_COUNT {
        let (pg, pgp) = spec.probs[i];
        let (in_g, in_gp) = spec.membership(z, i);
        let wy = y.simplex[ALPHA_GROUP[i]];
        if in_g {
            dphi_dh += wy * (-2.0 * c1 * c2 + 2.0 * c1 * (h - x.a(i))) / pg
                + y.alpha[i] * 2.0 * c1 / pg;
            out[wlen + 2 * i] += scale * wy * (-2.0) * c1 * (h - x.a(i)) / pg;
        }
        if in_gp {
            dphi_dh += wy * (2.0 * c1 * c2 + 2.0 * c1 * (h - x.b(i))) / pgp
                - y.alpha[i] * 2.0 * c1 / pgp;
            out[wlen + 2 * i + 1] += scale * wy * (-2.0) * c1 * (h - x.b(i)) / pgp;
        }
    }
    x.model
        .accumulate_score_gradient(&z.features, scale * dphi_dh, &mut out[..wlen]);
}

/// Gradient of `phi` in the primal variables for one sample, flat layout.
pub fn grad_x_phi(
    spec: &ProblemSpec,
    x: &PrimalPoint,
    y: &DualPoint,
    z: &DataPoint,
    _r: f64,
) -> Vec<f64> {
    let mut out = vec![0.0; x.flat_len()];
    accumulate_grad_x(spec, x, y, z, 1.0, &mut out);
    out
}

/// Gradient of `phi` in the dual variables for one sample: `phi` is linear in
/// `y`, so this is just `(f_vector, g_vector)` and does not depend on `y`.
pub fn grad_y_phi(
    spec: &ProblemSpec,
    x: &PrimalPoint,
    z: &DataPoint,
    r: f64,
) -> ([f64; 3], [f64; PAIR_COUNT]) {
    let (_, f, g) = sample_kernels(spec, x, z);
    (assemble_components(spec, &f, r), g)
}

/// Full-batch objective values: the surrogate AUC loss and the two
/// constraint surrogates, each with its inner alpha maximization solved in
/// closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveValues {
    pub f0: f64,
    pub f1: f64,
    pub f2: f64,
    /// `f1 <= 1 + kappa` and `f2 <= 1 + kappa`.
    pub feasible: [bool; 2],
}

impl ObjectiveValues {
    /// The level-set integrand `max(f0 - r, f1 - 1 - kappa, f2 - 1 - kappa)`.
    pub fn level_penalty(&self, r: f64, kappa: f64) -> f64 {
        (self.f0 - r)
            .max(self.f1 - 1.0 - kappa)
            .max(self.f2 - 1.0 - kappa)
    }

    /// Largest constraint violation, 0 when feasible.
    pub fn max_violation(&self, kappa: f64) -> f64 {
        (self.f1 - 1.0 - kappa).max(self.f2 - 1.0 - kappa).max(0.0)
    }
}

/// Mean kernels of one pair over a dataset, with the inner maximization over
/// alpha solved exactly: `mean_f + alpha* mean_g - alpha*^2` at
/// `alpha* = clamp(mean_g / 2)`.
pub fn pair_contribution(spec: &ProblemSpec, d: &Dataset, x: &PrimalPoint, i: usize) -> f64 {
    let mut mean_f = 0.0;
    let mut mean_g = 0.0;
    for z in d.points() {
        let h = x.model.score(&z.features);
        mean_f += sample_f_with_score(spec, x, z, i, h);
        mean_g += sample_g_with_score(spec, z, i, h);
    }
    mean_f /= d.len() as f64;
    mean_g /= d.len() as f64;
    let alpha = vecops::clamp_sym(mean_g / 2.0, spec.interval_radius);
    mean_f + alpha * mean_g - alpha * alpha
}

/// Evaluates the three objective components over a full dataset.
pub fn full_objective(spec: &ProblemSpec, d: &Dataset, x: &PrimalPoint) -> ObjectiveValues {
    let n = d.len() as f64;
    let mut mean_f = [0.0; PAIR_COUNT];
    let mut mean_g = [0.0; PAIR_COUNT];
    for z in d.points() {
        let (_, f, g) = sample_kernels(spec, x, z);
        for i in 0..PAIR_COUNT {
            mean_f[i] += f[i];
            mean_g[i] += g[i];
        }
    }
    let mut contribution = [0.0; PAIR_COUNT];
    for i in 0..PAIR_COUNT {
        mean_f[i] /= n;
        mean_g[i] /= n;
        let alpha = vecops::clamp_sym(mean_g[i] / 2.0, spec.interval_radius);
        contribution[i] = mean_f[i] + alpha * mean_g[i] - alpha * alpha;
    }
    let f0 = contribution[0];
    let f1 = contribution[1] + contribution[2];
    let f2 = contribution[3] + contribution[4];
    ObjectiveValues {
        f0,
        f1,
        f2,
        feasible: [f1 <= 1.0 + spec.kappa, f2 <= 1.0 + spec.kappa],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synthetic_biased_gaussians, DataPoint, SyntheticSpec};
    use crate::model::ModelKind;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fixture(n: usize, seed: u64) -> Dataset {
        let spec = SyntheticSpec {
            n,
            feature_dim: 3,
            ..SyntheticSpec::default()
        };
        synthetic_biased_gaussians(&spec, seed).unwrap()
    }

    fn build_spec(c1: f64, c2: f64, kappa: f64, kind: FairnessKind, d: &Dataset) -> ProblemSpec {
        let shape = ModelShape::linear(d.feature_dim());
        let dom = ParamDomain::new(2.0).unwrap();
        ProblemSpec::build(&ProblemSettings::new(c1, c2, kappa, kind), d, &shape, &dom).unwrap()
    }

    fn random_linear_point<R: Rng>(d: &Dataset, scale: f64, rng: &mut R) -> PrimalPoint {
        let w: Vec<f64> = (0..d.feature_dim())
            .map(|_| rng.random_range(-scale..scale))
            .collect();
        let mut ab = [0.0; 10];
        for v in ab.iter_mut() {
            *v = rng.random_range(-1.0..1.0);
        }
        PrimalPoint {
            model: ModelParams::from_weights(ModelShape::linear(d.feature_dim()), w).unwrap(),
            ab,
        }
    }

    /// Empirical conditional mean of `f(z)` over a group.
    fn cond_mean(d: &Dataset, sel: &GroupSelector, f: impl Fn(&DataPoint) -> f64) -> f64 {
        let vals: Vec<f64> = d
            .points()
            .iter()
            .filter(|z| sel.matches(z))
            .map(|z| f(z))
            .collect();
        vals.iter().sum::<f64>() / vals.len() as f64
    }

    #[test]
    fn constant_scorer_collapses_the_kernels() {
        let d = fixture(60, 1);
        let spec = build_spec(0.5, 1.0, 0.2, FairnessKind::GroupAuc, &d);
        let x = PrimalPoint::zeros(ModelShape::linear(d.feature_dim()));
        for z in d.points().iter().take(10) {
            for i in 0..PAIR_COUNT {
                assert_eq!(sample_f(&spec, &x, z, i), 0.5); // c1 * c2^2
                assert_eq!(sample_g(&spec, &x.model, z, i), 0.0);
            }
        }
    }

    #[test]
    fn component_vector_of_the_constant_scorer() {
        let d = fixture(60, 2);
        let spec = build_spec(0.5, 1.0, 0.2, FairnessKind::GroupAuc, &d);
        let x = PrimalPoint::zeros(ModelShape::linear(d.feature_dim()));
        let fv = f_vector(&spec, &x, d.point(0), 0.0);
        assert_eq!(fv[0], 0.5);
        assert!((fv[1] - -0.2).abs() < 1e-15);
        assert!((fv[2] - -0.2).abs() < 1e-15);
    }

    #[test]
    fn level_shift_moves_only_the_first_component() {
        let d = fixture(40, 3);
        let spec = build_spec(0.5, 1.0, 0.1, FairnessKind::IntraGroupPairwise, &d);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_linear_point(&d, 1.0, &mut rng);
        let z = d.point(7);
        let a = f_vector(&spec, &x, z, 0.25);
        let b = f_vector(&spec, &x, z, 1.25);
        assert_eq!(a[0] - b[0], 1.0);
        assert_eq!(a[1], b[1]);
        assert_eq!(a[2], b[2]);
    }

    #[test]
    fn mean_min_kernel_matches_conditional_expectations() {
        // Dataset mean of the min kernel must equal its grouped closed form
        // because the indicator/probability ratios average to conditional
        // expectations under the empirical distribution.
        let d = fixture(80, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for kind in [FairnessKind::GroupAuc, FairnessKind::InterGroupPairwise] {
            let spec = build_spec(0.7, 0.9, 0.3, kind, &d);
            let x = random_linear_point(&d, 1.5, &mut rng);
            for i in 0..PAIR_COUNT {
                let mean: f64 = d
                    .points()
                    .iter()
                    .map(|z| sample_f(&spec, &x, z, i))
                    .sum::<f64>()
                    / d.len() as f64;
                let (g, gp) = spec.pair(i);
                let h = |z: &DataPoint| x.model.score(&z.features);
                let want = spec.c1() * spec.c2() * spec.c2()
                    - 2.0 * spec.c1() * spec.c2() * cond_mean(&d, g, h)
                    + 2.0 * spec.c1() * spec.c2() * cond_mean(&d, gp, h)
                    + spec.c1() * cond_mean(&d, g, |z| (h(z) - x.a(i)).powi(2))
                    + spec.c1() * cond_mean(&d, gp, |z| (h(z) - x.b(i)).powi(2));
                assert!(
                    (mean - want).abs() < 1e-12,
                    "{kind} pair {i}: {mean} vs {want}"
                );
            }
        }
    }

    #[test]
    fn mean_max_kernel_matches_conditional_mean_difference() {
        let d = fixture(80, 7);
        let spec = build_spec(0.5, 1.0, 0.2, FairnessKind::BpsnBnsp, &d);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_linear_point(&d, 1.5, &mut rng);
        let h = |z: &DataPoint| x.model.score(&z.features);
        for i in 0..PAIR_COUNT {
            let mean: f64 = d
                .points()
                .iter()
                .map(|z| sample_g(&spec, &x.model, z, i))
                .sum::<f64>()
                / d.len() as f64;
            let (g, gp) = spec.pair(i);
            let want = 2.0 * spec.c1() * (cond_mean(&d, g, h) - cond_mean(&d, gp, h));
            assert!((mean - want).abs() < 1e-12, "pair {i}: {mean} vs {want}");
        }
    }

    #[test]
    fn per_sample_max_kernel_case_enumeration() {
        // One point per (label, sensitive) cell, scored by its first feature.
        let pts = vec![
            DataPoint { features: vec![1.0], label: 1, sensitive: 1 },
            DataPoint { features: vec![2.0], label: 1, sensitive: -1 },
            DataPoint { features: vec![3.0], label: -1, sensitive: 1 },
            DataPoint { features: vec![4.0], label: -1, sensitive: -1 },
        ];
        let d = Dataset::new(pts, 1).unwrap();
        let spec = build_spec(0.5, 1.0, 0.2, FairnessKind::GroupAuc, &d);
        let m = ModelParams::from_weights(ModelShape::linear(1), vec![1.0]).unwrap();
        // pair 1 = (unprotected, protected): P = (0.5, 0.5).
        // protected-only point: -2*c1*h/0.5 = -2.0 at h = 1.
        assert_eq!(sample_g(&spec, &m, d.point(0), 1), -2.0);
        // unprotected-only point: +2*c1*h/0.5 = 4.0 at h = 2.
        assert_eq!(sample_g(&spec, &m, d.point(1), 1), 4.0);
        // pair 2 = (everyone, everyone): indicators cancel at equal probs.
        for z in d.points() {
            assert_eq!(sample_g(&spec, &m, z, 2), 0.0);
        }
    }

    #[test]
    fn phi_at_a_vertex_reduces_to_one_component() {
        let d = fixture(30, 9);
        let spec = build_spec(0.5, 1.0, 0.2, FairnessKind::GroupAuc, &d);
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let x = random_linear_point(&d, 1.0, &mut rng);
        let y = DualPoint {
            simplex: [1.0, 0.0, 0.0],
            alpha: [0.0; 5],
        };
        let z = d.point(3);
        let r = 0.7;
        assert_eq!(phi(&spec, &x, &y, z, r), f_vector(&spec, &x, z, r)[0]);
    }

    #[test]
    fn phi_is_linear_in_the_dual() {
        let d = fixture(30, 11);
        let spec = build_spec(0.5, 1.0, 0.2, FairnessKind::AegPositive, &d);
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = random_linear_point(&d, 1.0, &mut rng);
        let z = d.point(5);
        let r = 0.3;
        let y1 = DualPoint {
            simplex: [0.5, 0.25, 0.25],
            alpha: [0.1, -0.05, 0.0, 0.02, 0.01],
        };
        let y2 = DualPoint {
            simplex: [0.2, 0.3, 0.5],
            alpha: [-0.02, 0.0, 0.07, -0.01, 0.04],
        };
        let mid = DualPoint {
            simplex: [
                (y1.simplex[0] + y2.simplex[0]) / 2.0,
                (y1.simplex[1] + y2.simplex[1]) / 2.0,
                (y1.simplex[2] + y2.simplex[2]) / 2.0,
            ],
            alpha: std::array::from_fn(|i| (y1.alpha[i] + y2.alpha[i]) / 2.0),
        };
        let lhs = phi(&spec, &x, &mid, z, r);
        let rhs = (phi(&spec, &x, &y1, z, r) + phi(&spec, &x, &y2, z, r)) / 2.0;
        assert!((lhs - rhs).abs() < 1e-12);
    }

    fn phi_of_flat(
        spec: &ProblemSpec,
        shape: ModelShape,
        flat: &[f64],
        y: &DualPoint,
        z: &DataPoint,
        r: f64,
    ) -> f64 {
        let x = PrimalPoint::from_flat(shape, flat).unwrap();
        phi(spec, &x, y, z, r)
    }

    #[test]
    fn primal_gradient_matches_central_differences() {
        let d = fixture(40, 13);
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for trial in 0..50 {
            let kind = FairnessKind::ALL[trial % 6];
            let spec = build_spec(0.5, 1.0, 0.2, kind, &d);
            let shape = if trial % 2 == 0 {
                ModelShape::linear(d.feature_dim())
            } else {
                ModelShape::mlp2(d.feature_dim(), 3)
            };
            let x = if shape.kind == ModelKind::Linear {
                random_linear_point(&d, 1.0, &mut rng)
            } else {
                let mut ab = [0.0; 10];
                for v in ab.iter_mut() {
                    *v = rng.random_range(-1.0..1.0);
                }
                PrimalPoint {
                    model: ModelParams::random(shape, &mut rng),
                    ab,
                }
            };
            let y = DualPoint {
                simplex: [0.5, 0.3, 0.2],
                alpha: std::array::from_fn(|_| rng.random_range(-0.2..0.2)),
            };
            let z = d.point(rng.random_range(0..d.len()));
            let r = rng.random_range(-0.5..0.5);

            let got = grad_x_phi(&spec, &x, &y, z, r);
            let flat = x.to_flat();
            let mut want = vec![0.0; flat.len()];
            let h = 1e-6;
            for k in 0..flat.len() {
                let mut plus = flat.clone();
                plus[k] += h;
                let mut minus = flat.clone();
                minus[k] -= h;
                want[k] = (phi_of_flat(&spec, shape, &plus, &y, z, r)
                    - phi_of_flat(&spec, shape, &minus, &y, z, r))
                    / (2.0 * h);
            }
            let num = (0..flat.len())
                .map(|k| (got[k] - want[k]).powi(2))
                .sum::<f64>()
                .sqrt();
            let den = vecops::norm2(&want).max(1.0);
            assert!(num / den < 1e-5, "trial {trial}: rel err {}", num / den);
        }
    }

    #[test]
    fn vertex_gradient_touches_only_the_first_center_pair() {
        let d = fixture(40, 15);
        let spec = build_spec(0.5, 1.0, 0.2, FairnessKind::GroupAuc, &d);
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let x = random_linear_point(&d, 1.0, &mut rng);
        let y = DualPoint {
            simplex: [1.0, 0.0, 0.0],
            alpha: [0.0; 5],
        };
        let z = d.point(2);
        let g = grad_x_phi(&spec, &x, &y, z, 0.0);
        let wlen = x.model.weights().len();
        let h = x.model.score(&z.features);
        let (pg, pgp) = spec.pair_probs(0);
        // pair 0 centers: active side depends on the label.
        let want_a = if z.label == 1 {
            -2.0 * spec.c1() * (h - x.a(0)) / pg
        } else {
            0.0
        };
        let want_b = if z.label == -1 {
            -2.0 * spec.c1() * (h - x.b(0)) / pgp
        } else {
            0.0
        };
        assert!((g[wlen] - want_a).abs() < 1e-12);
        assert!((g[wlen + 1] - want_b).abs() < 1e-12);
        for i in 1..PAIR_COUNT {
            assert_eq!(g[wlen + 2 * i], 0.0);
            assert_eq!(g[wlen + 2 * i + 1], 0.0);
        }
    }

    #[test]
    fn constant_scorer_has_zero_weight_gradient_under_zero_alphas() {
        // With h == 0, matched centers, and c2 terms cancelling between the
        // G and G' sides only when the probabilities match, pick the
        // everyone/everyone pair via a vertex on component 2 of group_auc.
        let d = fixture(40, 17);
        let spec = build_spec(0.5, 1.0, 0.2, FairnessKind::GroupAuc, &d);
        let x = PrimalPoint::zeros(ModelShape::linear(d.feature_dim()));
        let y = DualPoint {
            simplex: [0.0, 0.0, 1.0],
            alpha: [0.0; 5],
        };
        // component 2 sums pairs 3 (everyone, everyone) and 4 (prot, unprot):
        // dphi/dh = wy * (-2 c1 c2 + 0)/pg + wy * (2 c1 c2 + 0)/pgp per pair;
        // pair 3 has pg = pgp = 1 so it cancels; pair 4 cancels only pointwise
        // when a point is in exactly one group. Just verify against the
        // analytic sum rather than zero:
        let z = d.point(0);
        let g = grad_x_phi(&spec, &x, &y, z, 0.0);
        let mut dphi_dh = 0.0;
        for i in [3usize, 4] {
            let (pg, pgp) = spec.pair_probs(i);
            let (in_g, in_gp) = (spec.pair(i).0.matches(z), spec.pair(i).1.matches(z));
            if in_g {
                dphi_dh += -2.0 * spec.c1() * spec.c2() / pg;
            }
            if in_gp {
                dphi_dh += 2.0 * spec.c1() * spec.c2() / pgp;
            }
        }
        for (k, feat) in z.features.iter().enumerate() {
            assert!((g[k] - dphi_dh * feat).abs() < 1e-12);
        }
    }

    #[test]
    fn dual_gradient_is_the_component_pair_and_ignores_y() {
        let d = fixture(30, 18);
        let spec = build_spec(0.5, 1.0, 0.2, FairnessKind::GroupAuc, &d);
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let x = random_linear_point(&d, 1.0, &mut rng);
        let z = d.point(1);
        let r = 0.4;
        let (fv, gv) = grad_y_phi(&spec, &x, z, r);
        assert_eq!(fv, f_vector(&spec, &x, z, r));
        assert_eq!(gv, g_vector(&spec, &x.model, z));
        // Linearity: evaluating phi along y recovers the same slopes.
        let y = DualPoint {
            simplex: [0.2, 0.5, 0.3],
            alpha: [0.1, 0.0, -0.1, 0.05, 0.0],
        };
        let recomputed = vecops::dot(&y.simplex, &fv) + vecops::dot(&y.alpha, &gv);
        assert!((recomputed - phi(&spec, &x, &y, z, r)).abs() < 1e-12);
    }

    #[test]
    fn constant_scorer_objective_values_and_feasibility() {
        let d = fixture(60, 20);
        for (c1, c2) in [(0.5, 1.0), (0.3, 1.0), (0.5, 0.8)] {
            let spec = build_spec(c1, c2, 0.2, FairnessKind::GroupAuc, &d);
            let x = PrimalPoint::zeros(ModelShape::linear(d.feature_dim()));
            let vals = full_objective(&spec, &d, &x);
            let unit = c1 * c2 * c2;
            assert!((vals.f0 - unit).abs() < 1e-12);
            assert!((vals.f1 - 2.0 * unit).abs() < 1e-12);
            assert!((vals.f2 - 2.0 * unit).abs() < 1e-12);
            // strictly feasible whenever 2 c1 c2^2 < 1 + kappa
            assert_eq!(vals.feasible, [2.0 * unit <= 1.2, 2.0 * unit <= 1.2]);
        }
    }

    /// Literal pairwise double sum: the quantity the min-max collapse must
    /// reproduce at the optimal centers.
    fn pairwise_loss(
        d: &Dataset,
        spec: &ProblemSpec,
        x: &PrimalPoint,
        g: &GroupSelector,
        gp: &GroupSelector,
    ) -> f64 {
        let mut acc = 0.0;
        let mut count = 0usize;
        for z in d.points().iter().filter(|z| g.matches(z)) {
            for zp in d.points().iter().filter(|z| gp.matches(z)) {
                let diff =
                    x.model.score(&z.features) - x.model.score(&zp.features) - spec.c2();
                acc += spec.c1() * diff * diff;
                count += 1;
            }
        }
        acc / count as f64
    }

    #[test]
    fn min_max_collapse_matches_the_pairwise_double_sum() {
        // Exact only at c1 = 1: the alpha term of the collapsed form scales
        // as c1^2 while the pairwise loss scales as c1.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for trial in 0..20 {
            let d = fixture(20, 100 + trial);
            let kind = FairnessKind::ALL[(trial % 6) as usize];
            let c2 = rng.random_range(0.5..1.5);
            let spec = build_spec(1.0, c2, 0.2, kind, &d);
            let mut x = random_linear_point(&d, 1.0, &mut rng);
            // optimal centers: conditional mean scores per pair
            let h = |z: &DataPoint| x.model.score(&z.features);
            for i in 0..PAIR_COUNT {
                let (g, gp) = spec.pair(i);
                x.ab[2 * i] = cond_mean(&d, g, h);
                x.ab[2 * i + 1] = cond_mean(&d, gp, h);
            }
            for i in 0..PAIR_COUNT {
                let (g, gp) = spec.pair(i);
                let got = pair_contribution(&spec, &d, &x, i);
                let want = pairwise_loss(&d, &spec, &x, g, gp);
                assert!(
                    (got - want).abs() < 1e-10,
                    "trial {trial} pair {i}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn objective_components_are_convex_in_the_linear_primal() {
        let d = fixture(20, 23);
        let spec = build_spec(0.5, 1.0, 0.2, FairnessKind::GroupAuc, &d);
        let mut rng = ChaCha8Rng::seed_from_u64(24);
        for trial in 0..1000 {
            let xa = random_linear_point(&d, 1.5, &mut rng);
            let xb = random_linear_point(&d, 1.5, &mut rng);
            let mid = {
                let fa = xa.to_flat();
                let fb = xb.to_flat();
                let flat: Vec<f64> = fa.iter().zip(&fb).map(|(p, q)| (p + q) / 2.0).collect();
                PrimalPoint::from_flat(xa.model.shape(), &flat).unwrap()
            };
            let va = full_objective(&spec, &d, &xa);
            let vb = full_objective(&spec, &d, &xb);
            let vm = full_objective(&spec, &d, &mid);
            for (m, a, b) in [
                (vm.f0, va.f0, vb.f0),
                (vm.f1, va.f1, vb.f1),
                (vm.f2, va.f2, vb.f2),
            ] {
                assert!(m <= (a + b) / 2.0 + 1e-12, "trial {trial}: {m} > avg");
            }
        }
    }

    #[test]
    fn canonical_pair_order() {
        let d = fixture(60, 25);
        let spec = build_spec(0.5, 1.0, 0.2, FairnessKind::GroupAuc, &d);
        let [g1, g1p, g2, g2p] = group_pairs_for(FairnessKind::GroupAuc);
        assert_eq!(
            spec.pair(0),
            (&GroupSelector::positives(), &GroupSelector::negatives())
        );
        assert_eq!(spec.pair(1), (&g1p, &g1));
        assert_eq!(spec.pair(2), (&g2, &g2p));
        assert_eq!(spec.pair(3), (&g2p, &g2));
        assert_eq!(spec.pair(4), (&g1, &g1p));
    }

    #[test]
    fn empty_group_fails_problem_construction() {
        let pts = vec![
            DataPoint { features: vec![1.0], label: 1, sensitive: -1 },
            DataPoint { features: vec![2.0], label: -1, sensitive: -1 },
        ];
        let d = Dataset::new(pts, 1).unwrap();
        let shape = ModelShape::linear(1);
        let dom = ParamDomain::new(1.0).unwrap();
        let err = ProblemSpec::build(
            &ProblemSettings::new(0.5, 1.0, 0.2, FairnessKind::GroupAuc),
            &d,
            &shape,
            &dom,
        )
        .unwrap_err();
        match err {
            Error::EmptyGroup { selector } => assert_eq!(selector, "protected"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn interval_radius_default_and_floor() {
        let d = fixture(40, 26);
        let shape = ModelShape::linear(d.feature_dim());
        let dom = ParamDomain::new(2.0).unwrap();
        let bound = score_bound(&shape, &dom, &d);
        let spec = ProblemSpec::build(
            &ProblemSettings::new(0.5, 1.0, 0.2, FairnessKind::GroupAuc),
            &d,
            &shape,
            &dom,
        )
        .unwrap();
        assert!((spec.interval_radius() - (2.0 * bound + 1.0)).abs() < 1e-12);

        let mut settings = ProblemSettings::new(0.5, 1.0, 0.2, FairnessKind::GroupAuc);
        settings.interval_radius = Some(bound); // below the 2x floor
        assert!(matches!(
            ProblemSpec::build(&settings, &d, &shape, &dom).unwrap_err(),
            Error::InvalidConfig { .. }
        ));
    }

    #[test]
    fn negative_budget_is_rejected() {
        let d = fixture(40, 27);
        let shape = ModelShape::linear(d.feature_dim());
        let dom = ParamDomain::new(2.0).unwrap();
        let err = ProblemSpec::build(
            &ProblemSettings::new(0.5, 1.0, -0.1, FairnessKind::GroupAuc),
            &d,
            &shape,
            &dom,
        )
        .unwrap_err();
        match err {
            Error::InvalidConfig { field, .. } => assert_eq!(field, "kappa"),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn flat_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(28);
        let shape = ModelShape::mlp2(3, 2);
        let x = PrimalPoint {
            model: ModelParams::random(shape, &mut rng),
            ab: std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
        };
        let flat = x.to_flat();
        let back = PrimalPoint::from_flat(shape, &flat).unwrap();
        assert_eq!(x, back);
    }

    #[test]
    fn dual_membership_checks() {
        let y = DualPoint::initial();
        y.check_membership(2.0, 1e-12).unwrap();
        let bad_sum = DualPoint {
            simplex: [0.5, 0.5, 0.5],
            alpha: [0.0; 5],
        };
        assert!(bad_sum.check_membership(2.0, 1e-12).is_err());
        let bad_alpha = DualPoint {
            simplex: [1.0, 0.0, 0.0],
            alpha: [0.0, 0.5, 0.0, 0.0, 0.0], // group 1 weight is 0
        };
        assert!(bad_alpha.check_membership(2.0, 1e-12).is_err());
        let ratio_point = DualPoint {
            simplex: [0.5, 0.25, 0.25],
            alpha: [0.25, 0.1, 0.0, 0.0, 0.0],
        };
        assert_eq!(ratio_point.ratio(0), 0.5);
        assert_eq!(ratio_point.ratio(1), 0.4);
        let degenerate = DualPoint {
            simplex: [1.0, 0.0, 0.0],
            alpha: [0.0; 5],
        };
        assert_eq!(degenerate.ratio(3), 0.0); // 0/0 convention
    }

    #[test]
    fn label_filters_partition_against_everyone_pair() {
        // Sanity: positives and negatives partition the dataset, so the
        // frozen probabilities add to one.
        let d = fixture(100, 29);
        let p_pos = crate::dataset::group_probability(&d, &GroupSelector::positives());
        let p_neg = crate::dataset::group_probability(&d, &GroupSelector::negatives());
        assert_eq!(p_pos + p_neg, 1.0);
    }
}
