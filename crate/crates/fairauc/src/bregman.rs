//! Proximal setup for the saddle-point solver: the primal/dual distance
//! generating functions, their Bregman divergences, both prox maps in closed
//! form, and the exact inner maximization used to build optimality upper
//! bounds.
//!
//! Primal geometry is Euclidean on the flat vector `[weights..., ab...]` over
//! the ball-times-box domain. Dual geometry mixes a scaled negative entropy
//! on the 3-simplex with the quadratic penalty `sum_i alpha_i^2 / y_{g(i)}`,
//! which simultaneously regularizes the alphas and keeps the divergence
//! strongly convex under the norm `sqrt(|dy|_1^2 + |dalpha|_2^2)`.

use crate::error::{Error, Result};
use crate::model::{project_weights_in_place, ParamDomain};
use crate::reformulation::{DualPoint, PrimalPoint, ALPHA_GROUP, PAIR_COUNT};
use crate::vecops;

/// Softmax logits are floored here (after max subtraction) so that no simplex
/// coordinate underflows to exact zero; `exp(-700)` is still normal.
const LOGIT_FLOOR: f64 = -700.0;

/// Frozen constants of the dual geometry.
#[derive(Debug, Clone, Copy)]
pub struct GeometryParams {
    interval_radius: f64,
    entropy_scale: f64,
}

impl GeometryParams {
    /// `entropy_scale = 2 (1 + sqrt(2) I)^2` balances the entropy against
    /// the quadratic part so the joint divergence stays 1-strongly convex.
    pub fn new(interval_radius: f64) -> Result<Self> {
        if !(interval_radius.is_finite() && interval_radius > 0.0) {
            return Err(Error::InvalidConfig {
                field: "interval_radius".into(),
                message: format!("{interval_radius} is not a positive real"),
            });
        }
        let s = 2.0 * (1.0 + std::f64::consts::SQRT_2 * interval_radius).powi(2);
        Ok(Self {
            interval_radius,
            entropy_scale: s,
        })
    }

    pub fn interval_radius(&self) -> f64 {
        self.interval_radius
    }

    pub fn entropy_scale(&self) -> f64 {
        self.entropy_scale
    }

    /// Radius bound `D_y = sqrt(S ln 3 + 2 I^2)` of the dual domain under its
    /// distance generating function.
    pub fn dual_radius_bound(&self) -> f64 {
        (self.entropy_scale * 3f64.ln() + 2.0 * self.interval_radius * self.interval_radius)
            .sqrt()
    }

    /// Radius bound `D_x = sqrt((R^2 + 10 I^2) / 2)` of the primal domain
    /// under the Euclidean distance generating function.
    pub fn primal_radius_bound(&self, domain: &ParamDomain) -> f64 {
        let r = domain.radius();
        ((r * r + 10.0 * self.interval_radius * self.interval_radius) / 2.0).sqrt()
    }
}

/// The quadratic part of the dual distance generating function:
/// `sum_i alpha_i^2 / y_{g(i)}` with the convention 0/0 = 0.
pub fn quadratic_term(y: &DualPoint) -> f64 {
    let mut acc = 0.0;
    for i in 0..PAIR_COUNT {
        let w = y.simplex[ALPHA_GROUP[i]];
        if w > 0.0 {
            acc += y.alpha[i] * y.alpha[i] / w;
        }
    }
    acc
}

/// The dual distance generating function, zero at the canonical start
/// (uniform simplex, zero alphas) and nonnegative everywhere.
pub fn dual_omega(geom: &GeometryParams, y: &DualPoint) -> f64 {
    let mut entropy = 3f64.ln();
    for &w in &y.simplex {
        if w > 0.0 {
            entropy += w * w.ln();
        }
    }
    geom.entropy_scale * entropy + quadratic_term(y)
}

/// Bregman divergence of `dual_omega` from `from` to `to`:
/// `S KL(to | from) + sum_i to_weight (ratio_to - ratio_from)^2`. Infinite
/// when `to` puts mass where `from` has none.
pub fn dual_divergence(geom: &GeometryParams, from: &DualPoint, to: &DualPoint) -> f64 {
    let mut kl = 0.0;
    for g in 0..3 {
        let p = to.simplex[g];
        let q = from.simplex[g];
        if p > 0.0 {
            if q == 0.0 {
                return f64::INFINITY;
            }
            kl += p * (p / q).ln();
        }
    }
    let mut quad = 0.0;
    for i in 0..PAIR_COUNT {
        let w = to.simplex[ALPHA_GROUP[i]];
        let d = to.ratio(i) - from.ratio(i);
        quad += w * d * d;
    }
    geom.entropy_scale * kl + quad
}

/// Euclidean Bregman divergence of the primal geometry: `|to - from|^2 / 2`
/// on the flat layout.
pub fn primal_divergence(from: &PrimalPoint, to: &PrimalPoint) -> f64 {
    vecops::dist2_sq(&from.to_flat(), &to.to_flat()) / 2.0
}

/// Dual norm used for gradient magnitudes on the dual side:
/// `sqrt(|u|_inf^2 + |v|_2^2)`.
pub fn dual_grad_norm(u: &[f64; 3], v: &[f64; PAIR_COUNT]) -> f64 {
    let ui = u.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    (ui * ui + vecops::dot(v, v)).sqrt()
}

/// One mirror ascent step on the dual side: maximizes
/// `<u, simplex> + <v, alpha> - quadratic_term(y) - divergence(prev, y)/tau`
/// over the dual domain, in closed form.
///
/// Per pair, the optimal unscaled alpha is
/// `clamp((v_i + 2 ratio_prev / tau) / (2 + 2/tau))`; the simplex then sees a
/// softmax over `ln prev_g + (u_g - sum of per-pair costs) tau / S`.
pub fn dual_prox(
    geom: &GeometryParams,
    prev: &DualPoint,
    u: &[f64; 3],
    v: &[f64; PAIR_COUNT],
    tau: f64,
) -> DualPoint {
    let radius = geom.interval_radius;
    let mut ratio = [0.0; PAIR_COUNT];
    let mut cost = [0.0; 3];
    for i in 0..PAIR_COUNT {
        let prev_ratio = prev.ratio(i);
        let a = vecops::clamp_sym((v[i] + 2.0 * prev_ratio / tau) / (2.0 + 2.0 / tau), radius);
        ratio[i] = a;
        // negative of the inner maximum value attained by this alpha
        cost[ALPHA_GROUP[i]] += -a * v[i] + a * a + (a - prev_ratio).powi(2) / tau;
    }

    let mut logits = [0.0; 3];
    for g in 0..3 {
        let base = if prev.simplex[g] > 0.0 {
            prev.simplex[g].ln()
        } else {
            f64::NEG_INFINITY
        };
        logits[g] = base - (cost[g] - u[g]) * tau / geom.entropy_scale;
    }
    let max_logit = logits.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x));
    let mut weights = [0.0; 3];
    let mut total = 0.0;
    for g in 0..3 {
        let shifted = (logits[g] - max_logit).max(LOGIT_FLOOR);
        weights[g] = shifted.exp();
        total += weights[g];
    }
    let mut simplex = [0.0; 3];
    for g in 0..3 {
        simplex[g] = weights[g] / total;
    }
    let mut alpha = [0.0; PAIR_COUNT];
    for i in 0..PAIR_COUNT {
        alpha[i] = simplex[ALPHA_GROUP[i]] * ratio[i];
    }
    DualPoint { simplex, alpha }
}

/// One mirror descent step on the primal side: minimizes
/// `<g, x> + |x - current|^2 / (2 eta) + rho_hat |x - center|^2 / 2` over the
/// ball-times-box domain. The quadratic is isotropic, so the constrained
/// minimizer is the unconstrained one projected blockwise (weight ball,
/// center box).
pub fn primal_prox(
    current: &PrimalPoint,
    grad: &[f64],
    eta: f64,
    rho_hat: f64,
    center: &PrimalPoint,
    domain: &ParamDomain,
    interval_radius: f64,
) -> PrimalPoint {
    let flat_cur = current.to_flat();
    let flat_cen = center.to_flat();
    debug_assert_eq!(grad.len(), flat_cur.len());
    let denom = 1.0 / eta + rho_hat;
    let mut flat: Vec<f64> = (0..flat_cur.len())
        .map(|k| (flat_cur[k] / eta + rho_hat * flat_cen[k] - grad[k]) / denom)
        .collect();
    let wlen = current.model.weights().len();
    project_weights_in_place(&mut flat[..wlen], domain);
    for v in flat[wlen..].iter_mut() {
        *v = vecops::clamp_sym(*v, interval_radius);
    }
    PrimalPoint::from_flat(current.model.shape(), &flat)
        .expect("prox preserves the flat layout")
}

/// Exact value of `max_y <u, simplex> + <v, alpha> - quadratic_term(y)` over
/// the dual domain. Per pair the inner maximum sits at
/// `alpha* = clamp(v_i / 2)`; the simplex part is linear, so the outer
/// maximum is attained at a vertex.
pub fn upper_bound(geom: &GeometryParams, u: &[f64; 3], v: &[f64; PAIR_COUNT]) -> f64 {
    let mut group_value = *u;
    for i in 0..PAIR_COUNT {
        let a = vecops::clamp_sym(v[i] / 2.0, geom.interval_radius);
        group_value[ALPHA_GROUP[i]] += v[i] * a - a * a;
    }
    group_value.iter().fold(f64::NEG_INFINITY, |m, &x| m.max(x))
}
