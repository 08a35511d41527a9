//! Tiny dense-vector helpers used by the solvers.
//!
//! The parameter vectors here are small (at most a few thousand entries), so
//! plain slices beat pulling in a linear-algebra crate.

/// Dot product of two equally long slices.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Squared Euclidean distance between two equally long slices.
pub fn dist2_sq(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `out += scale * a`, elementwise.
pub fn axpy(out: &mut [f64], scale: f64, a: &[f64]) {
    debug_assert_eq!(out.len(), a.len());
    for (o, x) in out.iter_mut().zip(a) {
        *o += scale * x;
    }
}

/// Multiply every entry in place.
pub fn scale(out: &mut [f64], s: f64) {
    for o in out.iter_mut() {
        *o *= s;
    }
}

/// Clamp a scalar into `[-bound, bound]`.
pub fn clamp_sym(v: f64, bound: f64) -> f64 {
    v.clamp(-bound, bound)
}

/// True when every entry is finite.
pub fn all_finite(a: &[f64]) -> bool {
    a.iter().all(|v| v.is_finite())
}
