//! Outer approximation of the lower image `D`.

use std::time::Instant;

use nalgebra::DVector;

use crate::duality::{dual_objective, DualFrame, DualityError};
use crate::model::CvopProblem;
use crate::polyhedral::{HRep, HalfSpace, Polyhedron};
use crate::scalarization::build_p1;
use crate::solver::{self, ScalarSolution, SolveStatus};

use super::finalize::{assemble, RunState};
use super::primal::worst_violation;
use super::{
    interior_point, to_vec, BreakMode, EngineError, EpsilonSolution, Granularity, PointArchive, PointSource,
    RunConfig, RunStats, TraceStep, VertexCache,
};

pub struct DualInit {
    /// `D₀ = T ∩ {y* : φ(Γ(x^η), y*) ≥ 0}`.
    pub outer: Polyhedron,
    /// The non-vertical halfspace of `D₀`.
    pub hyperplane: HalfSpace,
    pub archive: PointArchive,
    pub interior: DVector<f64>,
    pub num_solves: usize,
}

fn is_vertical(h: &HalfSpace, tol_zero: f64) -> bool {
    let q = h.normal.len();
    h.normal[q - 1].abs() <= tol_zero * h.normal.norm()
}

pub fn initialize_dual(prob: &CvopProblem, frame: &DualFrame, cfg: &RunConfig) -> Result<DualInit, EngineError> {
    let q = prob.q();
    let interior = interior_point(prob, &cfg.solver)?;
    let j = prob.cone.num_dual_generators();
    let eta = (0..j).map(|k| prob.cone.dual_generator(k)).sum::<DVector<f64>>() / j as f64;
    let sol = solver::solve(&build_p1(prob, &eta)?, Some(&interior), &cfg.solver);
    match sol.status {
        SolveStatus::Optimal => {}
        status @ (SolveStatus::Unbounded | SolveStatus::NotAttained) => {
            return Err(EngineError::InitUnbounded { w: to_vec(&eta), status });
        }
        SolveStatus::Infeasible => return Err(EngineError::Infeasible(SolveStatus::Infeasible)),
        status => {
            return Err(EngineError::Solver {
                context: "P1(η)".into(),
                point: to_vec(&eta),
                status,
            })
        }
    }
    let image = prob.gamma(sol.x.as_slice());
    let hyperplane = frame.dual_halfspace(&image);
    if is_vertical(&hyperplane, cfg.tol.zero) {
        return Err(EngineError::VerticalInit {
            normal: to_vec(&hyperplane.normal),
        });
    }
    let mut archive = PointArchive::new(cfg.tol.merge);
    archive.add_primal(sol.x.clone(), image, PointSource::Init);
    if cfg.granularity == Granularity::Fine {
        let t = frame.t_of_w(&eta);
        let mut d = t.clone();
        d[q - 1] = sol.value;
        archive.add_dual(t, d);
    }
    let mut hs = frame.feasibility_halfspaces(&prob.cone);
    hs.push(hyperplane.clone());
    Ok(DualInit {
        outer: Polyhedron::from_hrep(q, HRep::new(hs), cfg.tol),
        hyperplane,
        archive,
        interior,
        num_solves: 1,
    })
}

fn solve_d(
    prob: &CvopProblem,
    frame: &DualFrame,
    t: &DVector<f64>,
    interior: &DVector<f64>,
    cfg: &RunConfig,
) -> Result<(DVector<f64>, ScalarSolution), EngineError> {
    dual_objective(frame, prob, t, Some(interior), &cfg.solver).map_err(|e| match e {
        DualityError::DualUnbounded { w, status } => EngineError::DualUnbounded { w, status },
        DualityError::SolverFailure { w, status } => EngineError::Solver {
            context: "P1(w(t))".into(),
            point: w,
            status,
        },
        e => e.into(),
    })
}

pub fn run_dual(prob: &CvopProblem, frame: &DualFrame, cfg: &RunConfig) -> Result<EpsilonSolution, EngineError> {
    cfg.validate()?;
    let started = Instant::now();
    let q = prob.q();
    let init = initialize_dual(prob, frame, cfg)?;
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
    loop {
        let vertices = outer.enumerate()?.vertices.clone();
        state.stats.num_vertex_enumerations += 1;
        if state.stats.iterations >= cfg.max_iterations {
            let mut achieved = f64::NEG_INFINITY;
            // Storing `D*(t)` for every vertex makes T̄ an ε_k-solution.
            for t in &vertices {
                let gap = match cache.get(t) {
                    Some(g) => g,
                    None => {
                        state.stats.num_scalar_solves += 1;
                        let (d, sol) = solve_d(prob, frame, t, &interior, cfg)?;
                        let gap = t[q - 1] - d[q - 1];
                        if cfg.granularity == Granularity::Fine {
                            let image = prob.gamma(sol.x.as_slice());
                            state.archive.add_primal(sol.x, image, PointSource::Accept);
                        }
                        state.archive.add_dual(t.clone(), d);
                        gap
                    }
                };
                achieved = achieved.max(gap);
            }
            let sol = assemble(prob, frame, cfg, state, achieved, false)?;
            return Err(EngineError::MaxIterations(Box::new(sol)));
        }
        let mut cuts = Vec::new();
        let mut sources = Vec::new();
        let mut max_gap = f64::NEG_INFINITY;
        for t in &vertices {
            if cfg.cache {
                if let Some(g) = cache.get(t) {
                    state.stats.num_cached += 1;
                    max_gap = max_gap.max(g);
                    continue;
                }
            }
            let (d, sol) = solve_d(prob, frame, t, &interior, cfg)?;
            state.stats.num_scalar_solves += 1;
            let gap = t[q - 1] - d[q - 1];
            max_gap = max_gap.max(gap);
            let image = prob.gamma(sol.x.as_slice());
            let cut = gap > cfg.epsilon;
            let on_boundary = prob.cone.dual_margin(&frame.w_of_t(t)) <= cfg.tol.support;
            let archive = &mut state.archive;
            match (cfg.granularity, cut) {
                (Granularity::Fine, _) => {
                    let source = if cut { PointSource::Cut } else { PointSource::Accept };
                    archive.add_primal(sol.x.clone(), image.clone(), source);
                    if !on_boundary || !cut {
                        archive.add_dual(t.clone(), d);
                    }
                }
                (Granularity::Alternative, true) => archive.add_primal(sol.x.clone(), image.clone(), PointSource::Cut),
                (Granularity::Alternative, false) => archive.add_dual(t.clone(), d),
            }
            if !cut {
                cache.insert(t.clone(), gap);
                continue;
            }
            let h = frame.dual_halfspace(&image);
            if is_vertical(&h, cfg.tol.zero) {
                return Err(EngineError::VerticalCut { t: to_vec(t) });
            }
            let violation = worst_violation(&h, &archive.dual_values());
            if violation > 10.0 * cfg.tol.feas {
                return Err(EngineError::CutValidation {
                    source_point: to_vec(&image),
                    violation,
                });
            }
            cuts.push(h);
            sources.push(image);
            if cfg.break_mode == BreakMode::Break {
                break;
            }
        }
        state.stats.max_gaps.push(max_gap);
        log::info!(
            "dual iteration {}: {} vertices, max gap {max_gap:.3e}, {} cuts",
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
