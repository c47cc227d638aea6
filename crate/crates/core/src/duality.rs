//! Geometric duality: the frame `T = (c¹, …, c^{q−1}, c)`, the weight map
//! `w(t)`, the coupling function `φ` and conversions between primal and
//! dual approximations.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::model::{CvopProblem, OrderingCone};
use crate::polyhedral::{HRep, HalfSpace};
use crate::scalarization::{build_p1, ScalarizationError};
use crate::solver::{self, ScalarSolution, SolveStatus, SolverOptions};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DualityError {
    #[error("frame vectors c¹, …, c^(q−1), c are linearly dependent")]
    SingularFrame,
    #[error("frame has {got} vectors, expected {expected}")]
    FrameShape { got: usize, expected: usize },
    #[error("dual point {index} has w(y*) = 0")]
    ZeroNormal { index: usize },
    #[error("P1(w) at w = {w:?} has no optimal solution (solver status {status:?})")]
    DualUnbounded { w: Vec<f64>, status: SolveStatus },
    #[error("P1(w) at w = {w:?} failed with solver status {status:?}")]
    SolverFailure { w: Vec<f64>, status: SolveStatus },
    #[error(transparent)]
    Scalarization(#[from] ScalarizationError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualFrame {
    pub t: DMatrix<f64>,
    pub t_inv: DMatrix<f64>,
    pub c: DVector<f64>,
}

impl DualFrame {
    pub fn new(frame: &[DVector<f64>], c: &DVector<f64>) -> Result<Self, DualityError> {
        let q = c.len();
        if frame.len() + 1 != q {
            return Err(DualityError::FrameShape {
                got: frame.len(),
                expected: q - 1,
            });
        }
        let t = DMatrix::from_fn(q, q, |i, j| if j + 1 < q { frame[j][i] } else { c[i] });
        let t_inv = t.clone().try_inverse().ok_or(DualityError::SingularFrame)?;
        let err = (&t * &t_inv - DMatrix::identity(q, q)).amax();
        if err > 1e-10 * t.amax().max(1.0) * t_inv.amax().max(1.0) {
            return Err(DualityError::SingularFrame);
        }
        Ok(Self { t, t_inv, c: c.clone() })
    }

    /// Frame from the problem's `c¹, …, c^{q−1}`, or the default completion.
    pub fn for_problem(prob: &CvopProblem) -> Result<Self, DualityError> {
        let frame = prob.frame.clone().unwrap_or_else(|| prob.cone.default_frame());
        Self::new(&frame, &prob.cone.c)
    }

    pub fn q(&self) -> usize {
        self.c.len()
    }

    /// `w(t) = ((t₁, …, t_{q−1}, 1) T⁻¹)ᵀ`; ignores `t_q`.
    pub fn w_of_t(&self, t: &DVector<f64>) -> DVector<f64> {
        let q = self.q();
        let mut row = t.clone();
        row[q - 1] = 1.0;
        self.t_inv.tr_mul(&row)
    }

    /// `Tᵀw`.
    pub fn t_of_w(&self, w: &DVector<f64>) -> DVector<f64> {
        self.t.tr_mul(w)
    }

    /// `φ(y, y*) = w(y*)ᵀy − y*_q`.
    pub fn phi(&self, y: &DVector<f64>, y_star: &DVector<f64>) -> f64 {
        self.w_of_t(y_star).dot(y) - y_star[self.q() - 1]
    }

    /// `{y : φ(y, y*) ≥ 0}`.
    pub fn primal_halfspace(&self, y_star: &DVector<f64>) -> HalfSpace {
        HalfSpace::new(self.w_of_t(y_star), y_star[self.q() - 1])
    }

    /// `{y* : φ(y, y*) ≥ 0}` with `r = T⁻¹y`: normal `(r₁, …, r_{q−1}, −1)`,
    /// offset `−r_q`.
    pub fn dual_halfspace(&self, y: &DVector<f64>) -> HalfSpace {
        let q = self.q();
        let r = &self.t_inv * y;
        let mut normal = r.clone();
        normal[q - 1] = -1.0;
        HalfSpace::new(normal, -r[q - 1])
    }

    /// Vertical rows `Yᵀw(y*) ≥ 0` describing `T = {t : w(t) ∈ C⁺}`.
    pub fn feasibility_halfspaces(&self, cone: &OrderingCone) -> Vec<HalfSpace> {
        let q = self.q();
        let m = self.t_inv.transpose();
        cone.y
            .column_iter()
            .map(|yk| {
                let coef = m.tr_mul(&yk.clone_owned());
                let mut normal = coef.clone();
                normal[q - 1] = 0.0;
                HalfSpace::new(normal, -coef[q - 1])
            })
            .collect()
    }
}

/// `D*(t) = (t₁, …, t_{q−1}, inf wᵀΓ)` with `w = w(t)`, plus the `P₁` solution.
pub fn dual_objective(
    frame: &DualFrame,
    prob: &CvopProblem,
    t: &DVector<f64>,
    start: Option<&DVector<f64>>,
    opts: &SolverOptions,
) -> Result<(DVector<f64>, ScalarSolution), DualityError> {
    let w = frame.w_of_t(t);
    let prog = build_p1(prob, &w)?;
    let sol = solver::solve(&prog, start, opts);
    let wv = || w.iter().copied().collect();
    match sol.status {
        SolveStatus::Optimal => {}
        status @ (SolveStatus::Unbounded | SolveStatus::NotAttained) => {
            return Err(DualityError::DualUnbounded { w: wv(), status })
        }
        status => return Err(DualityError::SolverFailure { w: wv(), status }),
    }
    let mut d = t.clone();
    d[frame.q() - 1] = sol.value;
    Ok((d, sol))
}

/// `{y : φ(y, y*) ≥ 0 ∀ y* ∈ points}`.
pub fn primal_outer_from_dual(frame: &DualFrame, points: &[DVector<f64>], tol_zero: f64) -> Result<HRep, DualityError> {
    let mut hs = Vec::with_capacity(points.len());
    for (index, p) in points.iter().enumerate() {
        let h = frame.primal_halfspace(p);
        if h.normal.norm() <= tol_zero {
            return Err(DualityError::ZeroNormal { index });
        }
        hs.push(h);
    }
    Ok(HRep::new(hs))
}

/// `{y* : φ(y, y*) ≥ 0 ∀ y ∈ points, Yᵀw(y*) ≥ 0}`.
pub fn dual_outer_from_primal(frame: &DualFrame, cone: &OrderingCone, points: &[DVector<f64>]) -> HRep {
    let mut hs = frame.feasibility_halfspaces(cone);
    hs.extend(points.iter().map(|y| frame.dual_halfspace(y)));
    HRep::new(hs)
}
