//! The four approximation polyhedra built from `X̄` and `T̄`.

use nalgebra::DVector;

use crate::duality::{dual_outer_from_primal, primal_outer_from_dual, DualFrame};
use crate::model::CvopProblem;
use crate::polyhedral::{enumerate_vertices, hrep_from_vrep, HRep, VRep};
use crate::Tolerances;

use super::{Approximation, EngineError};

pub(super) struct Approximations {
    pub inner_primal: Approximation,
    pub outer_primal: Approximation,
    pub inner_dual: Approximation,
    pub outer_dual: Approximation,
}

fn from_hrep(dim: usize, hrep: HRep, tol: Tolerances) -> Approximation {
    let vrep = match enumerate_vertices(dim, &hrep, tol) {
        Ok(v) => v,
        Err(e) => {
            log::warn!("vertex enumeration of a final approximation failed: {e}");
            VRep::default()
        }
    };
    Approximation { hrep, vrep }
}

fn from_vrep(dim: usize, points: Vec<DVector<f64>>, rays: Vec<DVector<f64>>, tol: Tolerances) -> Approximation {
    if points.is_empty() {
        return Approximation::default();
    }
    let hrep = hrep_from_vrep(dim, &VRep { vertices: points, rays }, tol);
    from_hrep(dim, hrep, tol)
}

pub(super) fn approximations(
    prob: &CvopProblem,
    frame: &DualFrame,
    images: &[DVector<f64>],
    dual_values: &[DVector<f64>],
    tol: Tolerances,
) -> Result<Approximations, EngineError> {
    let q = prob.q();
    let cone_rays: Vec<DVector<f64>> = prob.cone.y.column_iter().map(|c| c.clone_owned()).collect();
    let mut down = DVector::zeros(q);
    down[q - 1] = -1.0;
    let outer_primal = if dual_values.is_empty() {
        Approximation::default()
    } else {
        from_hrep(q, primal_outer_from_dual(frame, dual_values, tol.zero)?, tol)
    };
    let outer_dual = if images.is_empty() {
        Approximation::default()
    } else {
        from_hrep(q, dual_outer_from_primal(frame, &prob.cone, images), tol)
    };
    Ok(Approximations {
        inner_primal: from_vrep(q, images.to_vec(), cone_rays, tol),
        outer_primal,
        inner_dual: from_vrep(q, dual_values.to_vec(), vec![down], tol),
        outer_dual,
    })
}

pub(super) struct RunState {
    pub archive: super::PointArchive,
    pub stats: super::RunStats,
    pub trace: Vec<super::TraceStep>,
    pub started: std::time::Instant,
}

pub(super) fn assemble(
    prob: &CvopProblem,
    frame: &DualFrame,
    cfg: &super::RunConfig,
    state: RunState,
    achieved_epsilon: f64,
    complete: bool,
) -> Result<super::EpsilonSolution, EngineError> {
    let RunState {
        archive,
        mut stats,
        trace,
        started,
    } = state;
    let a = approximations(prob, frame, &archive.images(), &archive.dual_values(), cfg.tol)?;
    stats.num_primal_points = archive.primal.len();
    stats.num_dual_points = archive.dual.len();
    stats.merged_primal = archive.merged_primal;
    stats.merged_dual = archive.merged_dual;
    // Final enumerations: the outer primal polyhedron from `T̄`, plus the
    // outer dual polyhedron from `Γ(X̄)` for dual runs.
    stats.num_vertex_enumerations += match cfg.variant {
        super::Variant::Primal => 1,
        super::Variant::Dual => 2,
    };
    stats.wall_time = started.elapsed().as_secs_f64();
    Ok(super::EpsilonSolution {
        config: cfg.clone(),
        primal_points: archive.primal,
        dual_points: archive.dual,
        inner_primal: a.inner_primal,
        outer_primal: a.outer_primal,
        inner_dual: a.inner_dual,
        outer_dual: a.outer_dual,
        stats,
        achieved_epsilon,
        complete,
        trace,
    })
}
