//! The scalar programs behind both algorithms: the weighted sum `P₁(w)`
//! and the translative program `P₂(v)`, with their dual values.

use nalgebra::DVector;
use thiserror::Error;

use crate::model::{CvopProblem, Expr};
use crate::solver::{self, ScalarProgram, SolveStatus, SolverOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScalarizationError {
    #[error("weight {w:?} is not in the dual cone (margin {margin:.3e})")]
    ConeMembership { w: Vec<f64>, margin: f64 },
    #[error("P2 multipliers give cᵀw = {ctw}, expected 1")]
    WNormalization { ctw: f64 },
}

/// Tolerance for `w ∈ C⁺`, relative to `‖w‖`.
const CONE_TOL: f64 = 1e-9;

/// `P₁(w)`: minimize `wᵀΓ(x)` over the feasible set.
pub fn build_p1(prob: &CvopProblem, w: &DVector<f64>) -> Result<ScalarProgram, ScalarizationError> {
    let norm = w.norm();
    let margin = prob.cone.dual_margin(w);
    if norm == 0.0 || margin < -CONE_TOL {
        return Err(ScalarizationError::ConeMembership {
            w: w.iter().copied().collect(),
            margin,
        });
    }
    // Rounding can leave components like −1e-17 on nonlinear objectives.
    let w = w.map(|v| if v.abs() <= 1e-12 * norm { 0.0 } else { v });
    Ok(ScalarProgram {
        objective: prob.weighted_objective(&w),
        constraints: prob.constraints.clone(),
        domain: prob.domain.clone(),
    })
}

/// `P₂(v)` over `(x, z)`: minimize `z` subject to `g(x) ≤ 0` and
/// `(zʲ)ᵀΓ(x) − z − (zʲ)ᵀv ≤ 0` for every dual generator.
#[derive(Debug, Clone)]
pub struct P2Program {
    pub program: ScalarProgram,
    /// Index of the first cone row; rows before it belong to `g`.
    pub split: usize,
    pub v: DVector<f64>,
}

pub fn build_p2(prob: &CvopProblem, v: &DVector<f64>) -> P2Program {
    let n = prob.n;
    let z = Expr::var(n);
    let mut constraints = prob.constraints.clone();
    let split = constraints.len();
    for (j, s) in prob.scalarized().iter().enumerate() {
        let zv = prob.cone.dual_generator(j).dot(v);
        constraints.push(s.clone() - z.clone() - zv);
    }
    P2Program {
        program: ScalarProgram {
            objective: z,
            constraints,
            domain: prob.domain.extended(1),
        },
        split,
        v: v.clone(),
    }
}

#[derive(Debug, Clone)]
pub struct P2Solution {
    pub status: SolveStatus,
    pub x: DVector<f64>,
    pub z: f64,
    /// `yᵛ = v + zᵛc`.
    pub y: DVector<f64>,
    /// Multipliers of `g`.
    pub u: DVector<f64>,
    /// `w = Zμ` from the cone-block multipliers, with `cᵀw = 1`.
    pub w: DVector<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Solves `P₂(v)` and recovers `(u, w)`.
///
/// `interior` must satisfy `g < 0` strictly inside the box; `warm` is an
/// optional previous solution blended with it.
pub fn solve_with_duals_p2(
    prob: &CvopProblem,
    p2: &P2Program,
    interior: &DVector<f64>,
    warm: Option<&DVector<f64>>,
    opts: &SolverOptions,
) -> Result<P2Solution, ScalarizationError> {
    let n = prob.n;
    let x0 = match warm {
        Some(w) => (w + interior) * 0.5,
        None => interior.clone(),
    };
    let z0 = prob
        .scalarized()
        .iter()
        .enumerate()
        .map(|(j, s)| s.eval(x0.as_slice()) - prob.cone.dual_generator(j).dot(&p2.v))
        .fold(f64::NEG_INFINITY, f64::max)
        + 1.0;
    let mut start = x0.resize_vertically(n + 1, 0.0);
    start[n] = z0;
    let sol = solver::solve(&p2.program, Some(&start), opts);
    let x = sol.x.rows(0, n).clone_owned();
    let z = sol.x[n];
    let u = sol.multipliers.rows(0, p2.split).clone_owned();
    let mu = sol.multipliers.rows(p2.split, sol.multipliers.len() - p2.split).clone_owned();
    let mut w = &prob.cone.z * mu;
    if sol.status == SolveStatus::Optimal {
        let ctw = prob.cone.c.dot(&w);
        let dev = (ctw - 1.0).abs();
        if dev > 10.0 * opts.tol_kkt {
            return Err(ScalarizationError::WNormalization { ctw });
        }
        if dev > opts.tol_kkt {
            log::debug!("renormalizing w with cᵀw = {ctw}");
        }
        w /= ctw;
    }
    let y = &p2.v + &prob.cone.c * z;
    Ok(P2Solution {
        status: sol.status,
        x,
        z,
        y,
        u,
        w,
        kkt_residual: sol.kkt_residual,
        iterations: sol.iterations,
    })
}

/// `inf_x wᵀΓ(x) + uᵀg(x)` over the box, or `−∞` when unbounded below.
pub fn d1_value(prob: &CvopProblem, w: &DVector<f64>, u: &DVector<f64>, opts: &SolverOptions) -> f64 {
    let mut terms = vec![prob.weighted_objective(w)];
    for (g, &ui) in prob.constraints.iter().zip(u.iter()) {
        if ui != 0.0 {
            terms.push(Expr::Scale(ui, Box::new(g.clone())));
        }
    }
    let prog = ScalarProgram {
        objective: Expr::Sum(terms),
        constraints: Vec::new(),
        domain: prob.domain.clone(),
    };
    let sol = solver::solve(&prog, None, opts);
    match sol.status {
        SolveStatus::Unbounded => f64::NEG_INFINITY,
        _ => sol.value,
    }
}

/// Dual value of `P₂(v)` at `(u, w)`: `inf_x{uᵀg + wᵀΓ} − wᵀv`.
pub fn d2_value(prob: &CvopProblem, v: &DVector<f64>, u: &DVector<f64>, w: &DVector<f64>, opts: &SolverOptions) -> f64 {
    d1_value(prob, w, u, opts) - w.dot(v)
}
