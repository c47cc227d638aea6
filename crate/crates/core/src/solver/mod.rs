//! Scalar convex programs `min f(x)` s.t. `gᵢ(x) ≤ 0`, `x ∈ box`.
//!
//! Smooth programs go straight to the interior point method. Programs with
//! `abs` or `max` nodes are either lifted to a smooth epigraph form or handed
//! to the proximal bundle method.

mod bundle;
mod ipm;
mod lift;
mod minnorm;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::model::{DomainBox, Expr};

#[derive(Debug, Clone)]
pub struct ScalarProgram {
    pub objective: Expr,
    pub constraints: Vec<Expr>,
    pub domain: DomainBox,
}

impl ScalarProgram {
    pub fn n(&self) -> usize {
        self.domain.dim()
    }

    pub fn is_smooth(&self) -> bool {
        self.objective.is_smooth() && self.constraints.iter().all(Expr::is_smooth)
    }

    /// Finite box sides as rows `lᵢ − xᵢ ≤ 0` and `xᵢ − uᵢ ≤ 0`, lower first.
    fn box_rows(&self) -> (Vec<Expr>, Vec<(usize, bool)>) {
        let n = self.n();
        let mut rows = Vec::new();
        let mut which = Vec::new();
        for i in 0..n {
            let mut e = vec![0.0; n];
            if self.domain.lower[i].is_finite() {
                e[i] = -1.0;
                rows.push(Expr::affine(e.clone(), self.domain.lower[i]));
                which.push((i, false));
            }
            if self.domain.upper[i].is_finite() {
                e[i] = 1.0;
                rows.push(Expr::affine(e, -self.domain.upper[i]));
                which.push((i, true));
            }
        }
        (rows, which)
    }

    /// Largest constraint or box violation at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut v: f64 = 0.0;
        for g in &self.constraints {
            v = v.max(g.eval(x));
        }
        for (i, &xi) in x.iter().enumerate() {
            v = v.max(self.domain.lower[i] - xi).max(xi - self.domain.upper[i]);
        }
        v
    }

    /// A point strictly inside the box.
    pub fn box_center(&self) -> DVector<f64> {
        DVector::from_fn(self.n(), |i, _| {
            let (l, u) = (self.domain.lower[i], self.domain.upper[i]);
            match (l.is_finite(), u.is_finite()) {
                (true, true) => 0.5 * (l + u),
                (true, false) => l + 1.0,
                (false, true) => u - 1.0,
                (false, false) => 0.0,
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NotAttained,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct ScalarSolution {
    pub status: SolveStatus,
    pub x: DVector<f64>,
    pub value: f64,
    /// One multiplier per constraint.
    pub multipliers: DVector<f64>,
    /// Multipliers of the lower and upper box sides, zero where infinite.
    pub lower_multipliers: DVector<f64>,
    pub upper_multipliers: DVector<f64>,
    /// Largest of stationarity (min-norm subgradient of the Lagrangian),
    /// complementarity and primal violation.
    pub kkt_residual: f64,
    /// Duality gap bound reported by the backend.
    pub gap: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Epigraph lifting followed by the interior point method.
    Lifted,
    /// Proximal bundle method on the nonsmooth program.
    Bundle,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub backend: Backend,
    pub tol_opt: f64,
    pub tol_feas: f64,
    pub tol_kkt: f64,
    pub max_iter: usize,
    pub bundle_tol_opt: f64,
    pub bundle_max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            backend: Backend::Lifted,
            tol_opt: 1e-8,
            tol_feas: 1e-8,
            tol_kkt: 1e-6,
            max_iter: 200,
            bundle_tol_opt: 1e-6,
            bundle_max_iter: 5000,
        }
    }
}

/// Outcome of the strictly feasible start search.
enum Start {
    Interior(DVector<f64>),
    Infeasible,
    Failed,
}

/// Finds a point with all `rows < 0`, starting from `x0`.
///
/// Minimizes `s` subject to `hⱼ(x) ≤ s` and `s ≥ −1`, stopping early once
/// every row has a margin of `1e-2`.
fn phase_one(rows: &[Expr], x0: &DVector<f64>, opts: &SolverOptions) -> Start {
    let worst = |x: &[f64]| rows.iter().map(|h| h.eval(x)).fold(f64::NEG_INFINITY, f64::max);
    let w0 = worst(x0.as_slice());
    if w0 < 0.0 {
        return Start::Interior(x0.clone());
    }
    if !w0.is_finite() {
        return Start::Failed;
    }
    let n = x0.len();
    let s = Expr::var(n);
    let mut lifted: Vec<Expr> = rows.iter().map(|h| h.clone() - s.clone()).collect();
    lifted.push(-s.clone() - 1.0);
    let mut start = x0.clone().resize_vertically(n + 1, 0.0);
    start[n] = w0 + 1.0;
    let stop = |x: &DVector<f64>| worst(&x.as_slice()[..n]) < -1e-2;
    let settings = ipm::Settings {
        max_iter: opts.max_iter,
        tol_gap: opts.tol_opt * 0.01,
        tol_res: opts.tol_opt * 0.1,
        stop_when: Some(&stop),
    };
    let r = ipm::solve(&s, &lifted, start, &settings);
    let x = r.x.rows(0, n).clone_owned();
    let w = worst(x.as_slice());
    if w < 0.0 {
        return Start::Interior(x);
    }
    match r.outcome {
        ipm::Outcome::Converged | ipm::Outcome::NotAttained if r.x[n] > -opts.tol_feas => {
            Start::Infeasible
        }
        _ => Start::Failed,
    }
}

/// A point strictly inside the box with every constraint strictly negative.
pub fn strictly_feasible_point(prog: &ScalarProgram, opts: &SolverOptions) -> Result<DVector<f64>, SolveStatus> {
    let init = prog.box_center();
    let (box_rows, _) = prog.box_rows();
    let lifted = lift::lift(&Expr::constant(0.0), &prog.constraints, &init);
    let mut rows = lifted.constraints;
    rows.extend(box_rows);
    match phase_one(&rows, &lifted.x0, opts) {
        Start::Interior(x) => Ok(x.rows(0, prog.n()).clone_owned()),
        Start::Infeasible => Err(SolveStatus::Infeasible),
        Start::Failed => Err(SolveStatus::NumericalFailure),
    }
}

/// Solves the program, starting from `x0` when it is strictly feasible.
pub fn solve(prog: &ScalarProgram, x0: Option<&DVector<f64>>, opts: &SolverOptions) -> ScalarSolution {
    let n = prog.n();
    let init = match x0 {
        Some(x) => nudge_into_box(prog, x),
        None => prog.box_center(),
    };
    let (box_rows, which) = prog.box_rows();
    let lifted = lift::lift(&prog.objective, &prog.constraints, &init);
    let m = prog.constraints.len();
    let mut rows = lifted.constraints;
    rows.extend(box_rows.iter().cloned());
    let start = match phase_one(&rows, &lifted.x0, opts) {
        Start::Interior(x) => x,
        Start::Infeasible => return failure(prog, init, SolveStatus::Infeasible),
        Start::Failed => return failure(prog, init, SolveStatus::NumericalFailure),
    };
    if opts.backend == Backend::Bundle && !prog.is_smooth() {
        let x = start.rows(0, n).clone_owned();
        return bundle::solve(prog, &box_rows, &which, x, opts);
    }
    let settings = ipm::Settings {
        max_iter: opts.max_iter,
        tol_gap: opts.tol_opt * 0.01,
        tol_res: opts.tol_opt * 0.1,
        stop_when: None,
    };
    let r = ipm::solve(&lifted.objective, &rows, start, &settings);
    let x = r.x.rows(0, n).clone_owned();
    let value = prog.objective.eval(x.as_slice());
    let lam = &r.lambda;
    let multipliers = DVector::from_fn(m, |i, _| lam[i]);
    let nbox = box_rows.len();
    let box_lam = DVector::from_fn(nbox, |k, _| lam[rows.len() - nbox + k]);
    let (lower, upper) = split_box(n, &which, &box_lam);
    let kkt = kkt_residual(prog, &x, &multipliers, &lower, &upper);
    let near = |tol: f64| r.gap <= tol * value.abs().max(1.0) && kkt <= opts.tol_kkt;
    let status = match r.outcome {
        ipm::Outcome::Converged => SolveStatus::Optimal,
        ipm::Outcome::Unbounded => SolveStatus::Unbounded,
        ipm::Outcome::NotAttained => SolveStatus::NotAttained,
        ipm::Outcome::Stalled | ipm::Outcome::MaxIter if near(opts.tol_opt * 100.0) => {
            log::debug!("interior point stopped early with gap {:.2e}", r.gap);
            SolveStatus::Optimal
        }
        _ => SolveStatus::NumericalFailure,
    };
    ScalarSolution {
        status,
        x,
        value,
        multipliers,
        lower_multipliers: lower,
        upper_multipliers: upper,
        kkt_residual: kkt,
        gap: r.gap,
        iterations: r.iterations,
    }
}

fn nudge_into_box(prog: &ScalarProgram, x: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(prog.n(), |i, _| {
        let (l, u) = (prog.domain.lower[i], prog.domain.upper[i]);
        let margin = if (u - l).is_finite() { 1e-3 * (u - l) } else { 1e-3 };
        let v = x[i].max(l + margin);
        v.min(u - margin)
    })
}

fn split_box(n: usize, which: &[(usize, bool)], lam: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
    let mut lower = DVector::zeros(n);
    let mut upper = DVector::zeros(n);
    for (k, &(i, up)) in which.iter().enumerate() {
        if up {
            upper[i] = lam[k];
        } else {
            lower[i] = lam[k];
        }
    }
    (lower, upper)
}

fn failure(prog: &ScalarProgram, x: DVector<f64>, status: SolveStatus) -> ScalarSolution {
    let n = prog.n();
    let m = prog.constraints.len();
    ScalarSolution {
        status,
        value: f64::NAN,
        x,
        multipliers: DVector::zeros(m),
        lower_multipliers: DVector::zeros(n),
        upper_multipliers: DVector::zeros(n),
        kkt_residual: f64::INFINITY,
        gap: f64::INFINITY,
        iterations: 0,
    }
}

/// KKT residual of `(x, μ)` for the original, possibly nonsmooth, program.
pub fn kkt_residual(
    prog: &ScalarProgram,
    x: &DVector<f64>,
    mult: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> f64 {
    const CAP: usize = 4096;
    let xs = x.as_slice();
    let tol = 1e-6 * (1.0 + x.amax());
    let mut gens = prog.objective.subdifferential(xs, tol);
    let mut comp: f64 = 0.0;
    for (g, &mu) in prog.constraints.iter().zip(mult.iter()) {
        comp = comp.max((mu * g.eval(xs)).abs()).max(-mu);
        if mu <= 0.0 {
            continue;
        }
        let part = g.subdifferential(xs, tol);
        let mut next = Vec::with_capacity(gens.len() * part.len());
        for a in &gens {
            for b in &part {
                next.push(a + b * mu);
            }
        }
        next.truncate(CAP);
        gens = next;
    }
    let mut shift = DVector::zeros(x.len());
    for i in 0..x.len() {
        shift[i] = upper[i] - lower[i];
        if lower[i] != 0.0 {
            comp = comp.max((lower[i] * (prog.domain.lower[i] - x[i])).abs());
        }
        if upper[i] != 0.0 {
            comp = comp.max((upper[i] * (x[i] - prog.domain.upper[i])).abs());
        }
    }
    for g in &mut gens {
        *g += &shift;
    }
    let stat = minnorm::min_norm_point(&gens).amax();
    stat.max(comp).max(prog.max_violation(xs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x(i: usize) -> Expr {
        Expr::var(i)
    }

    fn prog(objective: Expr, constraints: Vec<Expr>, n: usize) -> ScalarProgram {
        ScalarProgram {
            objective,
            constraints,
            domain: DomainBox::free(n),
        }
    }

    #[test]
    fn disk_minimum() {
        let p = prog(x(0) + x(1), vec![(x(0) - 1.0).square() + (x(1) - 1.0).square() - 1.0], 2);
        let s = solve(&p, None, &SolverOptions::default());
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.value - (2.0 - 2f64.sqrt())).abs() < 1e-8);
        assert!(s.kkt_residual < 1e-6);
    }

    #[test]
    fn infeasible_square() {
        let p = prog(x(0), vec![x(0).square() + 1.0], 1);
        let s = solve(&p, None, &SolverOptions::default());
        assert_eq!(s.status, SolveStatus::Infeasible);
    }

    #[test]
    fn box_multipliers() {
        let p = ScalarProgram {
            objective: x(0) - x(1),
            constraints: vec![],
            domain: DomainBox::new(vec![0.0, 0.0], vec![1.0, 2.0]).unwrap(),
        };
        let s = solve(&p, None, &SolverOptions::default());
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.value + 2.0).abs() < 1e-8);
        assert!((s.lower_multipliers[0] - 1.0).abs() < 1e-6);
        assert!((s.upper_multipliers[1] - 1.0).abs() < 1e-6);
    }

    fn nonsmooth_weighted() -> ScalarProgram {
        // |x₀| + max(x₁, −x₁) + (x₀ − 1)²/4 has its minimum at the origin,
        // with 0 in the interior of the subdifferential.
        prog(
            x(0).abs() + Expr::max(vec![x(1), -x(1)]) + 0.25 * (x(0) - 1.0).square(),
            vec![x(0) + x(1) - 3.0],
            2,
        )
    }

    #[test]
    fn lifted_nonsmooth() {
        let s = solve(&nonsmooth_weighted(), None, &SolverOptions::default());
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!(s.x.amax() < 1e-6, "{:?}", s.x);
        assert!((s.value - 0.25).abs() < 1e-7);
        assert!(s.kkt_residual < 1e-6);
    }

    #[test]
    fn bundle_matches_lifted() {
        let opts = SolverOptions {
            backend: Backend::Bundle,
            ..SolverOptions::default()
        };
        let s = solve(&nonsmooth_weighted(), None, &opts);
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.value - 0.25).abs() < 1e-5, "{}", s.value);
    }

    fn weighted_example() -> ScalarProgram {
        let f = 0.5 * ((x(0) - 3.0).square() + (x(1) - 1.0).square())
            + 0.5 * ((x(0) - 1.0).square() + (x(1) - 1.0).square());
        prog(f, vec![x(0).abs() + 2.0 * x(1).abs() - 2.0], 2)
    }

    #[test]
    fn weighted_example_both_backends() {
        let s = solve(&weighted_example(), None, &SolverOptions::default());
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.value - 1.8).abs() < 1e-8);
        assert!((s.x[0] - 1.6).abs() < 1e-6 && (s.x[1] - 0.2).abs() < 1e-6);
        // ∇f = (2x₁ − 4, 2x₂ − 2) = −λ (1, 2) at (1.6, 0.2)
        assert!((s.multipliers[0] - 0.8).abs() < 1e-6);
        assert!(s.kkt_residual < 1e-6);
        let opts = SolverOptions {
            backend: Backend::Bundle,
            ..SolverOptions::default()
        };
        let b = solve(&weighted_example(), None, &opts);
        assert_eq!(b.status, SolveStatus::Optimal);
        assert!((b.value - 1.8).abs() < 1e-5);
        assert!((b.multipliers[0] - 0.8).abs() < 1e-3, "{}", b.multipliers[0]);
    }

    #[test]
    fn unbounded_program() {
        let p = prog(x(0) - x(1), vec![x(0).square() - 1.0], 2);
        let s = solve(&p, None, &SolverOptions::default());
        assert_eq!(s.status, SolveStatus::Unbounded);
    }
}
