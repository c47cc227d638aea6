//! A posteriori checks of an ε-solution.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::duality::DualFrame;
use crate::model::CvopProblem;
use crate::polyhedral::HRep;
use crate::scalarization::{build_p2, solve_with_duals_p2};
use crate::solver::SolveStatus;

use super::{feasible_samples, interior_point, EpsilonSolution};

/// Samples drawn for the weak-minimizer check.
const SAMPLES: usize = 200;
pub const DEFAULT_SAMPLE_SEED: u64 = 0x5eed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    /// Worst violation found; positive values are violations.
    #[serde(with = "crate::io::ext_float")]
    pub margin: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationReport {
    pub requested_epsilon: f64,
    /// The ε used by the sandwich checks: the requested one, or the
    /// achieved one for partial runs when larger.
    pub epsilon: f64,
    #[serde(with = "crate::io::ext_float")]
    pub achieved_epsilon: f64,
    pub checks: Vec<Check>,
    pub all_passed: bool,
    /// Seed of the feasible samples in the weak-minimizer check.
    pub seed: u64,
}

impl CertificationReport {
    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Largest scaled violation of `hrep` over `points`; `−∞` without points.
fn outside(hrep: &HRep, points: impl Iterator<Item = DVector<f64>>) -> f64 {
    points
        .map(|p| {
            hrep.halfspaces
                .iter()
                .map(|h| {
                    let n = h.normal.norm();
                    -h.slack(&p) / n / 1f64.max(p.amax())
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

fn check(name: &str, margin: f64, tolerance: f64) -> Check {
    Check {
        name: name.into(),
        passed: margin.is_finite() && margin <= tolerance || margin == f64::NEG_INFINITY,
        margin,
        tolerance,
    }
}

pub fn certify(sol: &EpsilonSolution, prob: &CvopProblem, frame: &DualFrame, epsilon: f64) -> CertificationReport {
    certify_with_seed(sol, prob, frame, epsilon, DEFAULT_SAMPLE_SEED)
}

pub fn certify_with_seed(
    sol: &EpsilonSolution,
    prob: &CvopProblem,
    _frame: &DualFrame,
    epsilon: f64,
    seed: u64,
) -> CertificationReport {
    let tol = sol.config.tol;
    let opts = sol.config.solver;
    let q = prob.q();
    let contain_tol = 10.0 * tol.feas;
    let eps = if sol.complete {
        epsilon
    } else {
        epsilon.max(sol.achieved_epsilon)
    };
    let c = &prob.cone.c;
    let mut e_q = DVector::zeros(q);
    e_q[q - 1] = 1.0;
    let mut checks = Vec::new();

    let a = if sol.inner_primal.hrep.halfspaces.is_empty() {
        f64::INFINITY
    } else {
        outside(
            &sol.inner_primal.hrep,
            sol.outer_primal.vrep.vertices.iter().map(|v| v + c * eps),
        )
    };
    checks.push(check("a_primal_sandwich", a, contain_tol));

    let b = outside(&sol.outer_primal.hrep, sol.primal_points.iter().map(|p| p.image.clone()));
    checks.push(check("b_inner_in_outer", b, contain_tol));

    let c1 = if sol.inner_dual.hrep.halfspaces.is_empty() {
        f64::INFINITY
    } else {
        outside(
            &sol.inner_dual.hrep,
            sol.outer_dual.vrep.vertices.iter().map(|t| t - &e_q * eps),
        )
    };
    let c2 = outside(&sol.outer_dual.hrep, sol.dual_points.iter().map(|p| p.value.clone()));
    checks.push(check("c_dual_sandwich", c1.max(c2), contain_tol));

    // A feasible sample dominating Γ(x) strictly through int C.
    let d = match interior_point(prob, &opts) {
        Ok(interior) => {
            let anchors: Vec<DVector<f64>> = sol.primal_points.iter().map(|p| p.x.clone()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let samples = feasible_samples(prob, &interior, &anchors, SAMPLES, &mut rng);
            let images: Vec<DVector<f64>> = samples.iter().map(|x| prob.gamma(x.as_slice())).collect();
            let mut worst = f64::NEG_INFINITY;
            for p in &sol.primal_points {
                for y in &images {
                    let diff = &p.image - y;
                    let dom = prob.cone.margin(&diff) / 1f64.max(p.image.amax());
                    worst = worst.max(dom);
                }
            }
            worst
        }
        Err(_) => f64::INFINITY,
    };
    checks.push(check("d_weak_minimizers", d, 1e-6));

    // The excess over ε is scaled like the containment checks.
    let mut achieved = f64::NEG_INFINITY;
    let mut excess = f64::NEG_INFINITY;
    if let Ok(interior) = interior_point(prob, &opts) {
        for v in &sol.outer_primal.vrep.vertices {
            let p2 = build_p2(prob, v);
            match solve_with_duals_p2(prob, &p2, &interior, None, &opts) {
                Ok(s) if s.status == SolveStatus::Optimal => {
                    achieved = achieved.max(s.z);
                    excess = excess.max((s.z - eps) / 1f64.max(v.amax()));
                }
                _ => achieved = f64::INFINITY,
            }
        }
    } else {
        achieved = f64::INFINITY;
    }
    if achieved == f64::INFINITY {
        excess = f64::INFINITY;
    }
    checks.push(check("e_achieved_epsilon", excess, contain_tol));

    let all_passed = checks.iter().all(|c| c.passed);
    CertificationReport {
        requested_epsilon: epsilon,
        epsilon: eps,
        achieved_epsilon: achieved,
        checks,
        all_passed,
        seed,
    }
}
