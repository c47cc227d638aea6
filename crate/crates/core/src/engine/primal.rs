//! Outer approximation of the upper image `P`.

use std::time::Instant;

use nalgebra::DVector;

use crate::duality::DualFrame;
use crate::model::CvopProblem;
use crate::polyhedral::{HRep, HalfSpace, Polyhedron};
use crate::scalarization::{build_p1, build_p2, solve_with_duals_p2, P2Solution};
use crate::solver::{self, SolveStatus};

use super::finalize::{assemble, RunState};
use super::{
    interior_point, to_vec, BreakMode, EngineError, EpsilonSolution, Granularity, PointArchive, PointSource,
    RunConfig, RunStats, TraceStep, VertexCache,
};

pub struct PrimalInit {
    /// `P₀ = ⋂ {y : (zʲ)ᵀy ≥ inf (zʲ)ᵀΓ}`.
    pub outer: Polyhedron,
    pub archive: PointArchive,
    pub interior: DVector<f64>,
    pub num_solves: usize,
}

pub fn initialize_primal(prob: &CvopProblem, frame: &DualFrame, cfg: &RunConfig) -> Result<PrimalInit, EngineError> {
    let q = prob.q();
    let interior = interior_point(prob, &cfg.solver)?;
    let mut archive = PointArchive::new(cfg.tol.merge);
    let mut halfspaces = Vec::new();
    for j in 0..prob.cone.num_dual_generators() {
        let z = prob.cone.dual_generator(j);
        let sol = solver::solve(&build_p1(prob, &z)?, Some(&interior), &cfg.solver);
        match sol.status {
            SolveStatus::Optimal => {
                if cfg.granularity == Granularity::Fine {
                    let image = prob.gamma(sol.x.as_slice());
                    archive.add_primal(sol.x.clone(), image, PointSource::Init);
                }
            }
            SolveStatus::NotAttained => {
                log::warn!("P1 at generator {j} has no minimizer; using its infimum {:.6e}", sol.value);
            }
            status @ SolveStatus::Unbounded => {
                return Err(EngineError::InitUnbounded { w: to_vec(&z), status });
            }
            SolveStatus::Infeasible => return Err(EngineError::Infeasible(SolveStatus::Infeasible)),
            status => {
                return Err(EngineError::Solver {
                    context: "P1 at a cone generator".into(),
                    point: to_vec(&z),
                    status,
                })
            }
        }
        let t = frame.t_of_w(&z);
        let mut d = t.clone();
        d[q - 1] = sol.value;
        archive.add_dual(t, d);
        halfspaces.push(HalfSpace::new(z, sol.value));
    }
    Ok(PrimalInit {
        outer: Polyhedron::from_hrep(q, HRep::new(halfspaces), cfg.tol),
        archive,
        interior,
        num_solves: prob.cone.num_dual_generators(),
    })
}

fn solve_p2(
    prob: &CvopProblem,
    v: &DVector<f64>,
    interior: &DVector<f64>,
    warm: Option<&DVector<f64>>,
    cfg: &RunConfig,
) -> Result<P2Solution, EngineError> {
    let p2 = build_p2(prob, v);
    let s = solve_with_duals_p2(prob, &p2, interior, warm, &cfg.solver)?;
    if s.status != SolveStatus::Optimal {
        return Err(EngineError::Solver {
            context: "P2(v)".into(),
            point: to_vec(v),
            status: s.status,
        });
    }
    Ok(s)
}

/// Largest violation of `h` over `points`, scaled by the offset magnitude.
pub(super) fn worst_violation(h: &HalfSpace, points: &[DVector<f64>]) -> f64 {
    let n = h.normal.norm();
    points
        .iter()
        .map(|p| -h.slack(p) / n / 1f64.max(h.offset.abs() / n))
        .fold(f64::NEG_INFINITY, f64::max)
}

pub fn run_primal(prob: &CvopProblem, frame: &DualFrame, cfg: &RunConfig) -> Result<EpsilonSolution, EngineError> {
    cfg.validate()?;
    let started = Instant::now();
    let q = prob.q();
    let init = initialize_primal(prob, frame, cfg)?;
    let mut outer = init.outer;
    let interior = init.interior;
    let mut state = RunState {
        archive: init.archive,
        stats: RunStats {
            num_scalar_solves: init.num_solves,
            ..RunStats::default()
        },
        trace: Vec::new(),
        started,
    };
    let mut cache = VertexCache::new(cfg.tol.dup);
    let mut warm: Option<DVector<f64>> = None;
    loop {
        let vertices = outer.enumerate()?.vertices.clone();
        state.stats.num_vertex_enumerations += 1;
        if state.stats.iterations >= cfg.max_iterations {
            let mut achieved = f64::NEG_INFINITY;
            // Solving every vertex makes X̄ a weak ε_k-solution.
            for v in &vertices {
                let z = match cache.get(v) {
                    Some(z) => z,
                    None => {
                        state.stats.num_scalar_solves += 1;
                        let s = solve_p2(prob, v, &interior, warm.as_ref(), cfg)?;
                        let image = prob.gamma(s.x.as_slice());
                        state.archive.add_primal(s.x.clone(), image, PointSource::Accept);
                        if cfg.granularity == Granularity::Fine {
                            let t = frame.t_of_w(&s.w);
                            let mut d = t.clone();
                            d[q - 1] = s.w.dot(&s.y);
                            state.archive.add_dual(t, d);
                        }
                        s.z
                    }
                };
                achieved = achieved.max(z);
            }
            let sol = assemble(prob, frame, cfg, state, achieved, false)?;
            return Err(EngineError::MaxIterations(Box::new(sol)));
        }
        let mut cuts = Vec::new();
        let mut sources = Vec::new();
        let mut max_gap = f64::NEG_INFINITY;
        for v in &vertices {
            if cfg.cache {
                if let Some(z) = cache.get(v) {
                    state.stats.num_cached += 1;
                    max_gap = max_gap.max(z);
                    continue;
                }
            }
            let s = solve_p2(prob, v, &interior, warm.as_ref(), cfg)?;
            state.stats.num_scalar_solves += 1;
            warm = Some(s.x.clone());
            max_gap = max_gap.max(s.z);
            let image = prob.gamma(s.x.as_slice());
            let t = frame.t_of_w(&s.w);
            let mut d = t.clone();
            d[q - 1] = s.w.dot(&s.y);
            let cut = s.z > cfg.epsilon;
            let archive = &mut state.archive;
            match (cfg.granularity, cut) {
                (Granularity::Fine, _) => {
                    let source = if cut { PointSource::Cut } else { PointSource::Accept };
                    archive.add_primal(s.x.clone(), image, source);
                    archive.add_dual(t, d.clone());
                }
                (Granularity::Alternative, true) => archive.add_dual(t, d.clone()),
                (Granularity::Alternative, false) => archive.add_primal(s.x.clone(), image, PointSource::Accept),
            }
            if !cut {
                cache.insert(v.clone(), s.z);
                continue;
            }
            let h = frame.primal_halfspace(&d);
            let violation = worst_violation(&h, &archive.images());
            if violation > 10.0 * cfg.tol.feas {
                return Err(EngineError::CutValidation {
                    source_point: to_vec(&d),
                    violation,
                });
            }
            cuts.push(h);
            sources.push(d);
            if cfg.break_mode == BreakMode::Break {
                break;
            }
        }
        state.stats.max_gaps.push(max_gap);
        log::info!(
            "primal iteration {}: {} vertices, max gap {max_gap:.3e}, {} cuts",
            state.stats.iterations,
            vertices.len(),
            cuts.len()
        );
        let done = cuts.is_empty();
        if cfg.record_trace {
            state.trace.push(TraceStep {
                vertices,
                cuts: cuts.clone(),
                sources,
            });
        }
        if done {
            return assemble(prob, frame, cfg, state, max_gap, true);
        }
        for h in cuts {
            outer.add_halfspace(h);
        }
        state.stats.iterations += 1;
    }
}
