//! Random test problems and invariant measurements on engine runs. Every
//! measurement returns the worst violation found; nonpositive means none.

use benson_core::duality::{dual_objective, DualFrame};
use benson_core::engine::{feasible_samples, interior_point, EpsilonSolution, RunConfig, Variant};
use benson_core::model::{CvopProblem, DomainBox, Expr, OrderingCone};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

/// `½(x − a)ᵀQ(x − a)` objectives with `Q` positive definite, over the box
/// `[-2, 2]ⁿ` intersected with a ball, ordered by a random polyhedral cone
/// containing the orthant.
pub fn random_quadratic_cvop<R: Rng>(rng: &mut R, q: usize, n: usize) -> CvopProblem {
    let vars: Vec<Expr> = (0..n).map(Expr::var).collect();
    let objectives = (0..q)
        .map(|_| {
            let l = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
            let m = l.transpose() * &l + DMatrix::identity(n, n) * 0.2;
            let args = vars.iter().map(|x| x.clone() - rng.gen_range(-1.5..1.5)).collect();
            0.5 * Expr::quad_form(m, args)
        })
        .collect();
    let center: Vec<f64> = (0..n).map(|_| rng.gen_range(-0.5..0.5)).collect();
    let radius = rng.gen_range(1.0..2.0);
    let ball = Expr::Sum(vars.iter().zip(&center).map(|(x, c)| (x.clone() - *c).square()).collect()) - radius * radius;
    let z = DMatrix::from_fn(q, q, |i, j| if i == j { 1.0 } else { rng.gen_range(0.0..0.4) });
    let cone = OrderingCone::new(None, Some(z), DVector::from_element(q, 1.0)).expect("solid pointed cone");
    CvopProblem::new(n, objectives, vec![ball], DomainBox::new(vec![-2.0; n], vec![2.0; n]).unwrap(), cone)
        .expect("valid problem")
}

fn scaled(slack: f64, p: &DVector<f64>) -> f64 {
    -slack / 1f64.max(p.amax())
}

/// Vertices of every recorded `P_k` (or `D_k`) checked against all earlier
/// cuts.
pub fn nested_violation(sol: &EpsilonSolution) -> f64 {
    let mut cuts = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for step in &sol.trace {
        for v in &step.vertices {
            for h in &cuts {
                let h: &benson_core::polyhedral::HalfSpace = h;
                worst = worst.max(scaled(h.slack(v), v));
            }
        }
        cuts.extend(step.cuts.iter().cloned());
    }
    worst
}

/// Images of feasible samples around the points of `X̄`.
pub fn sample_images(prob: &CvopProblem, sol: &EpsilonSolution, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let interior = interior_point(prob, &sol.config.solver).expect("strictly feasible");
    let anchors: Vec<DVector<f64>> = sol.primal_points.iter().map(|p| p.x.clone()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    feasible_samples(prob, &interior, &anchors, count, &mut rng)
        .iter()
        .map(|x| prob.gamma(x.as_slice()))
        .collect()
}

/// Points `D*(t)` of the lower image for random `w(t) ∈ C⁺`.
pub fn sample_dual_points(
    prob: &CvopProblem,
    frame: &DualFrame,
    cfg: &RunConfig,
    count: usize,
    seed: u64,
) -> Vec<DVector<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let j = prob.cone.num_dual_generators();
    (0..count)
        .map(|_| {
            let lambda: Vec<f64> = (0..j).map(|_| rng.gen_range(0.0..1.0)).collect();
            let s: f64 = lambda.iter().sum();
            let w = (0..j).fold(DVector::zeros(prob.q()), |acc, k| acc + prob.cone.dual_generator(k) * (lambda[k] / s));
            let t = frame.t_of_w(&w);
            dual_objective(frame, prob, &t, None, &cfg.solver).expect("bounded scalarization").0
        })
        .collect()
}

/// Every cut of the run checked on sampled points of the set it bounds:
/// images of feasible points for primal runs, `D*(t)` for dual runs.
pub fn cut_violation(prob: &CvopProblem, frame: &DualFrame, sol: &EpsilonSolution, count: usize, seed: u64) -> f64 {
    let points = match sol.config.variant {
        Variant::Primal => sample_images(prob, sol, count, seed),
        Variant::Dual => sample_dual_points(prob, frame, &sol.config, count, seed),
    };
    let mut worst = f64::NEG_INFINITY;
    for step in &sol.trace {
        for h in &step.cuts {
            for p in &points {
                worst = worst.max(scaled(h.slack(p), p));
            }
        }
    }
    worst
}

/// Points `y` checked against the H-representation of the outer primal
/// approximation of `sol`.
pub fn outer_primal_violation(sol: &EpsilonSolution, points: &[DVector<f64>]) -> f64 {
    points
        .iter()
        .flat_map(|p| sol.outer_primal.hrep.halfspaces.iter().map(move |h| scaled(h.slack(p), p)))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest `φ(y, y*)` over `y ∈ Γ(X̄)` and `y* ∈ D*(T̄)`, negated.
pub fn weak_duality_violation(frame: &DualFrame, sol: &EpsilonSolution) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for p in &sol.primal_points {
        for d in &sol.dual_points {
            worst = worst.max(-frame.phi(&p.image, &d.value) / 1f64.max(p.image.amax()).max(d.value.amax()));
        }
    }
    worst
}
