//! One-dimensional root finding and convex minimisation by bisection.

/// Bisection stops once the bracket is no wider than this fraction of the
/// frame length.
pub const BISECTION_REL_TOL: f64 = 1e-12;

const MAX_BISECTIONS: usize = 200;

/// Minimiser of a differentiable convex function on `[lo, hi]`, located by
/// bisection on the sign of its derivative.
pub fn minimize_convex(lo: f64, hi: f64, tol: f64, slope: impl Fn(f64) -> f64) -> f64 {
    if hi <= lo {
        return lo;
    }
    if slope(lo) >= 0.0 {
        return lo;
    }
    if slope(hi) <= 0.0 {
        return hi;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..MAX_BISECTIONS {
        if b - a <= tol {
            break;
        }
        let mid = 0.5 * (a + b);
        if slope(mid) < 0.0 {
            a = mid;
        } else {
            b = mid;
        }
    }
    0.5 * (a + b)
}

/// Boundary of the set `{t : inside(t)}` between `outside_at` (where the
/// predicate is false) and `inside_at` (where it holds), assuming a single
/// switch in between. The returned point always satisfies the predicate.
pub fn bisect_boundary(
    mut outside_at: f64,
    mut inside_at: f64,
    tol: f64,
    inside: impl Fn(f64) -> bool,
) -> f64 {
    for _ in 0..MAX_BISECTIONS {
        if (inside_at - outside_at).abs() <= tol {
            break;
        }
        let mid = 0.5 * (outside_at + inside_at);
        if inside(mid) {
            inside_at = mid;
        } else {
            outside_at = mid;
        }
    }
    inside_at
}
