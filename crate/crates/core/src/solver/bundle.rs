//! Proximal bundle method with a feasible-point rule for constraints.
//!
//! Objective and constraints are modeled by cutting planes; each
//! subproblem `min r + ‖d‖²/(2t)` over the cut model is a smooth QP solved
//! by the interior point method.

use nalgebra::DVector;

use super::{ipm, kkt_residual, phase_one, split_box, ScalarProgram, ScalarSolution, SolveStatus, SolverOptions, Start};
use crate::model::Expr;

const MAX_CUTS: usize = 200;

struct Cut {
    a: DVector<f64>,
    b: f64,
    /// Constraint row, `None` for the objective.
    row: Option<usize>,
    age: usize,
}

impl Cut {
    fn at(e: &Expr, y: &DVector<f64>, row: Option<usize>) -> Self {
        let a = e.gradient(y.as_slice());
        let b = e.eval(y.as_slice()) - a.dot(y);
        Self { a, b, row, age: 0 }
    }
}

pub(super) fn solve(
    prog: &ScalarProgram,
    box_rows: &[Expr],
    which: &[(usize, bool)],
    x0: DVector<f64>,
    opts: &SolverOptions,
) -> ScalarSolution {
    let n = prog.n();
    let m = prog.constraints.len();
    let rows: Vec<&Expr> = prog.constraints.iter().chain(box_rows.iter()).collect();
    let f = &prog.objective;
    let mut xh = x0;
    let mut fh = f.eval(xh.as_slice());
    let mut cuts: Vec<Cut> = vec![Cut::at(f, &xh, None)];
    for (i, g) in rows.iter().enumerate() {
        cuts.push(Cut::at(g, &xh, Some(i)));
    }
    let mut t = 1.0;
    let mut lam_rows = DVector::zeros(rows.len());
    let mut delta = f64::INFINITY;
    let mut status = SolveStatus::NumericalFailure;
    let mut it = 0;
    let qp_opts = SolverOptions {
        tol_opt: 1e-10,
        ..*opts
    };
    while it < opts.bundle_max_iter {
        it += 1;
        if fh < -1e15 {
            status = SolveStatus::Unbounded;
            break;
        }
        // QP in (d, r): f-cuts aᵀd − r + (aᵀx̂ + b − f̂) ≤ 0, g-cuts aᵀd + aᵀx̂ + b ≤ 0.
        let r = Expr::var(n);
        let mut obj_terms = vec![r.clone()];
        for i in 0..n {
            obj_terms.push(Expr::Scale(0.5 / t, Box::new(Expr::var(i).square())));
        }
        let objective = Expr::Sum(obj_terms);
        let qp_rows: Vec<Expr> = cuts
            .iter()
            .map(|c| {
                let mut coeffs: Vec<f64> = c.a.iter().copied().collect();
                let base = c.a.dot(&xh) + c.b;
                match c.row {
                    None => {
                        coeffs.push(-1.0);
                        Expr::affine(coeffs, base - fh)
                    }
                    Some(_) => {
                        coeffs.push(0.0);
                        Expr::affine(coeffs, base)
                    }
                }
            })
            .collect();
        let mut start = DVector::zeros(n + 1);
        start[n] = cuts
            .iter()
            .filter(|c| c.row.is_none())
            .map(|c| c.a.dot(&xh) + c.b - fh)
            .fold(0.0, f64::max)
            + 1.0;
        let start = match phase_one(&qp_rows, &start, &qp_opts) {
            Start::Interior(s) => s,
            _ => break,
        };
        let settings = ipm::Settings {
            max_iter: opts.max_iter,
            tol_gap: 1e-12,
            tol_res: 1e-11,
            stop_when: None,
        };
        let sol = ipm::solve(&objective, &qp_rows, start, &settings);
        if !matches!(sol.outcome, ipm::Outcome::Converged | ipm::Outcome::Stalled) {
            break;
        }
        let d = sol.x.rows(0, n).clone_owned();
        delta = (-sol.x[n]).max(0.0);
        lam_rows.fill(0.0);
        for (c, &l) in cuts.iter_mut().zip(sol.lambda.iter()) {
            if let Some(i) = c.row {
                lam_rows[i] += l;
            }
            c.age = if l > 1e-12 { 0 } else { c.age + 1 };
        }
        if delta <= 1e-2 * opts.bundle_tol_opt * fh.abs().max(1.0) {
            status = SolveStatus::Optimal;
            break;
        }
        let y = &xh + &d;
        let fy = f.eval(y.as_slice());
        let feasible = rows.iter().all(|g| g.eval(y.as_slice()) <= 0.0);
        cuts.push(Cut::at(f, &y, None));
        for (i, g) in rows.iter().enumerate() {
            if g.eval(y.as_slice()) > -1e-3 * (1.0 + fh.abs()) {
                cuts.push(Cut::at(g, &y, Some(i)));
            }
        }
        if feasible && fy <= fh - 0.1 * delta {
            if fh - fy >= 0.8 * delta {
                t = (2.0 * t).min(1e6);
            }
            xh = y;
            fh = fy;
        }
        if cuts.len() > MAX_CUTS {
            cuts.sort_by_key(|c| c.age);
            cuts.truncate(MAX_CUTS / 2);
        }
    }
    let multipliers = DVector::from_fn(m, |i, _| lam_rows[i]);
    let box_lam = DVector::from_fn(rows.len() - m, |k, _| lam_rows[m + k]);
    let (lower, upper) = split_box(n, which, &box_lam);
    let kkt = kkt_residual(prog, &xh, &multipliers, &lower, &upper);
    ScalarSolution {
        status,
        value: fh,
        x: xh,
        multipliers,
        lower_multipliers: lower,
        upper_multipliers: upper,
        kkt_residual: kkt,
        gap: delta,
        iterations: it,
    }
}
