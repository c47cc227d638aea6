//! Strictly feasible starts and random feasible points.

use nalgebra::DVector;
use rand::Rng;

use crate::model::{CvopProblem, Expr};
use crate::solver::{strictly_feasible_point, ScalarProgram, SolverOptions};

use super::EngineError;

/// A point with `g(x) < 0` strictly inside the box.
pub fn interior_point(prob: &CvopProblem, opts: &SolverOptions) -> Result<DVector<f64>, EngineError> {
    let prog = ScalarProgram {
        objective: Expr::constant(0.0),
        constraints: prob.constraints.clone(),
        domain: prob.domain.clone(),
    };
    strictly_feasible_point(&prog, opts).map_err(EngineError::Infeasible)
}

/// `count` feasible points scattered around `anchors`.
///
/// Each candidate is a random perturbation of an anchor, clamped to the box.
/// Infeasible candidates are pulled back toward `interior` by bisection, so
/// many samples land near the boundary of the feasible set.
pub fn feasible_samples<R: Rng>(
    prob: &CvopProblem,
    interior: &DVector<f64>,
    anchors: &[DVector<f64>],
    count: usize,
    rng: &mut R,
) -> Vec<DVector<f64>> {
    let n = prob.n;
    let radius = anchors
        .iter()
        .map(|a| (a - interior).amax())
        .fold(1.0, f64::max)
        * 2.0;
    let feasible = |x: &DVector<f64>| prob.max_violation(x.as_slice()) <= 0.0;
    let clamp = |x: DVector<f64>| {
        DVector::from_fn(n, |i, _| x[i].clamp(prob.domain.lower[i], prob.domain.upper[i]))
    };
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let k = rng.gen_range(0..=anchors.len());
        let anchor = anchors.get(k).unwrap_or(interior);
        let r = radius * rng.gen::<f64>().powi(3);
        let dir = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let cand = clamp(anchor + dir * r);
        if feasible(&cand) {
            out.push(cand);
            continue;
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..50 {
            let mid = 0.5 * (lo + hi);
            if feasible(&(interior + (&cand - interior) * mid)) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        out.push(interior + (&cand - interior) * lo);
    }
    out
}
