//! Geometric bisection on the attenuation level.

use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BisectOptions {
    pub lo: f64,
    pub hi: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for BisectOptions {
    fn default() -> Self {
        BisectOptions {
            lo: 1e-6,
            hi: 1e4,
            rel_tol: 1e-3,
            max_iter: 40,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BisectionResult {
    /// Smallest feasible level found; `+∞` (serialised as `null`) when the upper bracket fails.
    pub gamma2: f64,
    pub iterations: usize,
    /// Every evaluated `(γ², feasible)` in order.
    pub probes: Vec<(f64, bool)>,
    /// Feasibility held at all monotonicity probes above the result.
    pub monotone: bool,
}

/// Smallest γ² in the bracket for which `feasible` holds, to relative tolerance `rel_tol`.
///
/// Monotonicity is spot-checked at 1.5×, 10× and 100× the result (clamped to the bracket).
pub fn bisect_gamma(mut feasible: impl FnMut(f64) -> bool, opts: &BisectOptions) -> BisectionResult {
    let mut probes = Vec::new();
    let mut eval = |g: f64, probes: &mut Vec<(f64, bool)>| {
        let ok = feasible(g);
        probes.push((g, ok));
        ok
    };
    let (mut lo, mut hi) = (opts.lo, opts.hi);
    if !eval(hi, &mut probes) {
        return BisectionResult {
            gamma2: f64::INFINITY,
            iterations: 0,
            probes,
            monotone: true,
        };
    }
    let mut iterations = 0;
    let found = if eval(lo, &mut probes) {
        lo
    } else {
        while iterations < opts.max_iter && hi / lo > 1.0 + opts.rel_tol {
            let mid = (lo * hi).sqrt();
            if eval(mid, &mut probes) {
                hi = mid;
            } else {
                lo = mid;
            }
            iterations += 1;
        }
        hi
    };
    let mut monotone = true;
    for factor in [1.5, 10.0, 100.0] {
        let g = (found * factor).min(opts.hi);
        if g > found {
            monotone &= eval(g, &mut probes);
        }
    }
    BisectionResult {
        gamma2: found,
        iterations,
        probes,
        monotone,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_threshold() {
        let r = bisect_gamma(|g| g >= 4.0, &BisectOptions::default());
        assert!(r.gamma2 >= 4.0 && r.gamma2 <= 4.0 * (1.0 + 1e-3));
        assert!(r.monotone);
        assert!(r.iterations <= 40);
    }

    #[test]
    fn always_infeasible_is_infinite() {
        let r = bisect_gamma(|_| false, &BisectOptions::default());
        assert_eq!(r.gamma2, f64::INFINITY);
    }

    #[test]
    fn always_feasible_returns_lower_bracket() {
        assert_eq!(bisect_gamma(|_| true, &BisectOptions::default()).gamma2, 1e-6);
    }

    #[test]
    fn non_monotone_is_flagged() {
        // feasible on [4, 50] and near the top of the bracket
        let r = bisect_gamma(|g| (4.0..=50.0).contains(&g) || g > 9e3, &BisectOptions::default());
        assert!(!r.monotone);
    }
}
