//! Outer approximation loops for the upper image (primal) and the lower
//! image (dual), their ε-solutions and the four approximation polyhedra.

mod certify;
mod dual;
mod finalize;
mod primal;
mod sampling;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::duality::{DualFrame, DualityError};
use crate::model::CvopProblem;
use crate::polyhedral::{HRep, HalfSpace, PolyError, VRep};
use crate::scalarization::ScalarizationError;
use crate::solver::{SolveStatus, SolverOptions};
use crate::Tolerances;

pub use certify::{certify, certify_with_seed, CertificationReport, Check, DEFAULT_SAMPLE_SEED};
pub use dual::{initialize_dual, run_dual, DualInit};
pub use primal::{initialize_primal, run_primal, PrimalInit};
pub use sampling::{feasible_samples, interior_point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Primal,
    Dual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BreakMode {
    Break,
    NoBreak,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Fine,
    Alternative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub epsilon: f64,
    pub variant: Variant,
    pub break_mode: BreakMode,
    pub granularity: Granularity,
    pub max_iterations: usize,
    /// Skip vertices that were already accepted in an earlier iteration.
    pub cache: bool,
    pub solver: SolverOptions,
    pub tol: Tolerances,
    /// Keep the vertices and cuts of every iteration.
    pub record_trace: bool,
}

impl RunConfig {
    pub fn new(epsilon: f64, variant: Variant) -> Self {
        Self {
            epsilon,
            variant,
            break_mode: BreakMode::Break,
            granularity: Granularity::Fine,
            max_iterations: 500,
            cache: true,
            solver: SolverOptions::default(),
            tol: Tolerances::default(),
            record_trace: false,
        }
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(EngineError::InvalidConfig(format!(
                "epsilon must be positive and finite, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointSource {
    Init,
    Cut,
    Accept,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrimalPoint {
    pub x: DVector<f64>,
    pub image: DVector<f64>,
    pub source: PointSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint {
    pub t: DVector<f64>,
    /// `D*(t)`.
    pub value: DVector<f64>,
}

/// A polyhedron with both representations.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Approximation {
    pub hrep: HRep,
    pub vrep: VRep,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunStats {
    pub num_scalar_solves: usize,
    /// Vertices skipped because they were accepted before.
    pub num_cached: usize,
    pub num_vertex_enumerations: usize,
    pub num_primal_points: usize,
    pub num_dual_points: usize,
    /// Solutions dropped as duplicates of stored points.
    pub merged_primal: usize,
    pub merged_dual: usize,
    /// Number of outer approximation updates.
    pub iterations: usize,
    pub wall_time: f64,
    /// Largest `zᵛ` (primal) or `t_q − yʷ` (dual) seen in each iteration.
    #[serde(with = "crate::io::ext_float::vec")]
    pub max_gaps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    /// Vertices of the outer approximation at the start of the iteration.
    pub vertices: Vec<DVector<f64>>,
    /// Halfspaces added at the end of the iteration.
    pub cuts: Vec<HalfSpace>,
    /// Points defining the cuts: `D*(Tᵀwᵛ)` (primal) or `Γ(xʷ)` (dual).
    pub sources: Vec<DVector<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpsilonSolution {
    pub config: RunConfig,
    pub primal_points: Vec<PrimalPoint>,
    pub dual_points: Vec<DualPoint>,
    pub inner_primal: Approximation,
    pub outer_primal: Approximation,
    pub inner_dual: Approximation,
    pub outer_dual: Approximation,
    pub stats: RunStats,
    /// Largest gap over the vertices of the last outer approximation.
    pub achieved_epsilon: f64,
    pub complete: bool,
    pub trace: Vec<TraceStep>,
}

impl EpsilonSolution {
    pub fn images(&self) -> Vec<DVector<f64>> {
        self.primal_points.iter().map(|p| p.image.clone()).collect()
    }

    pub fn dual_values(&self) -> Vec<DVector<f64>> {
        self.dual_points.iter().map(|p| p.value.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("the feasible set is empty or has no strictly feasible point ({0:?})")]
    Infeasible(SolveStatus),
    #[error("P1 at the cone generator {w:?} is unbounded (status {status:?}); the problem is not bounded")]
    InitUnbounded { w: Vec<f64>, status: SolveStatus },
    #[error("the initial dual hyperplane is vertical (normal {normal:?})")]
    VerticalInit { normal: Vec<f64> },
    #[error("the dual cut at t = {t:?} is vertical")]
    VerticalCut { t: Vec<f64> },
    #[error("P1(w) at w = {w:?} has no optimal solution (status {status:?})")]
    DualUnbounded { w: Vec<f64>, status: SolveStatus },
    #[error("cut from {source_point:?} violates a stored point by {violation:.3e}")]
    CutValidation { source_point: Vec<f64>, violation: f64 },
    #[error("{context} at {point:?} failed with status {status:?}")]
    Solver {
        context: String,
        point: Vec<f64>,
        status: SolveStatus,
    },
    #[error("iteration limit reached; achieved epsilon {}", .0.achieved_epsilon)]
    MaxIterations(Box<EpsilonSolution>),
    #[error(transparent)]
    Polyhedral(#[from] PolyError),
    #[error(transparent)]
    Duality(#[from] DualityError),
    #[error(transparent)]
    Scalarization(#[from] ScalarizationError),
}

impl EngineError {
    /// Short machine-readable name.
    pub fn kind(&self) -> &'static str {
        match self {
            Self::InvalidConfig(_) => "InvalidConfig",
            Self::Infeasible(_) => "Infeasible",
            Self::InitUnbounded { .. } => "InitUnbounded",
            Self::VerticalInit { .. } => "VerticalInit",
            Self::VerticalCut { .. } => "VerticalCut",
            Self::DualUnbounded { .. } => "DualUnbounded",
            Self::CutValidation { .. } => "CutValidation",
            Self::Solver { .. } => "SolverFailure",
            Self::MaxIterations(_) => "MaxIterations",
            Self::Polyhedral(PolyError::Line) => "Line",
            Self::Polyhedral(PolyError::Empty) => "Empty",
            Self::Polyhedral(PolyError::ZeroNormal) => "ZeroNormal",
            Self::Duality(_) => "Duality",
            Self::Scalarization(_) => "Scalarization",
        }
    }
}

/// Runs the algorithm selected by `cfg.variant`.
pub fn run(prob: &CvopProblem, frame: &DualFrame, cfg: &RunConfig) -> Result<EpsilonSolution, EngineError> {
    match cfg.variant {
        Variant::Primal => run_primal(prob, frame, cfg),
        Variant::Dual => run_dual(prob, frame, cfg),
    }
}

fn near(a: &DVector<f64>, b: &DVector<f64>, tol: f64) -> bool {
    let scale = 1f64.max(a.amax()).max(b.amax());
    (a - b).amax() <= tol * scale
}

fn to_vec(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

/// `X̄` and `T̄` with duplicate suppression.
#[derive(Debug, Clone, Default)]
pub struct PointArchive {
    pub primal: Vec<PrimalPoint>,
    pub dual: Vec<DualPoint>,
    pub merged_primal: usize,
    pub merged_dual: usize,
    tol: f64,
}

impl PointArchive {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            ..Self::default()
        }
    }

    pub fn add_primal(&mut self, x: DVector<f64>, image: DVector<f64>, source: PointSource) {
        if self.primal.iter().any(|p| near(&p.image, &image, self.tol)) {
            self.merged_primal += 1;
        } else {
            self.primal.push(PrimalPoint { x, image, source });
        }
    }

    pub fn add_dual(&mut self, t: DVector<f64>, value: DVector<f64>) {
        if self.dual.iter().any(|p| near(&p.value, &value, self.tol)) {
            self.merged_dual += 1;
        } else {
            self.dual.push(DualPoint { t, value });
        }
    }

    pub fn images(&self) -> Vec<DVector<f64>> {
        self.primal.iter().map(|p| p.image.clone()).collect()
    }

    pub fn dual_values(&self) -> Vec<DVector<f64>> {
        self.dual.iter().map(|p| p.value.clone()).collect()
    }
}

/// Gaps of vertices that were accepted, keyed by coordinates.
#[derive(Debug, Clone, Default)]
struct VertexCache {
    entries: Vec<(DVector<f64>, f64)>,
    tol: f64,
}

impl VertexCache {
    fn new(tol: f64) -> Self {
        Self {
            entries: Vec::new(),
            tol,
        }
    }

    fn get(&self, v: &DVector<f64>) -> Option<f64> {
        self.entries.iter().find(|(u, _)| near(u, v, self.tol)).map(|e| e.1)
    }

    fn insert(&mut self, v: DVector<f64>, gap: f64) {
        if self.get(&v).is_none() {
            self.entries.push((v, gap));
        }
    }
}
