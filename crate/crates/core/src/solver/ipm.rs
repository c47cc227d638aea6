//! Primal-dual interior point method for smooth convex programs
//! `min f(x)` s.t. `gᵢ(x) ≤ 0`, started from a strictly feasible point.
//!
//! Each iteration takes a Newton step on the perturbed KKT system with
//! centering parameter `t = μm/η̂` and backtracks on the barrier merit or
//! the residual norm.

use nalgebra::{DMatrix, DVector};

use crate::model::Expr;

const MU: f64 = 10.0;
const ALPHA: f64 = 0.01;
const BETA: f64 = 0.5;

pub(crate) struct Settings<'a> {
    pub max_iter: usize,
    /// Stop once the surrogate gap is below `tol_gap · max(1, |f|)`.
    pub tol_gap: f64,
    /// Stop once the dual residual is below `tol_res · max(1, ‖∇f‖∞)`.
    pub tol_res: f64,
    /// Optional early exit, checked at every iterate.
    pub stop_when: Option<&'a dyn Fn(&DVector<f64>) -> bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Converged,
    Stopped,
    MaxIter,
    Unbounded,
    NotAttained,
    Stalled,
}

#[derive(Debug, Clone)]
pub(crate) struct Result {
    pub x: DVector<f64>,
    pub lambda: DVector<f64>,
    pub outcome: Outcome,
    pub iterations: usize,
    pub gap: f64,
}

struct Problem<'a> {
    f: &'a Expr,
    g: &'a [Expr],
}

impl Problem<'_> {
    fn gvals(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_iterator(self.g.len(), self.g.iter().map(|e| e.eval(x.as_slice())))
    }

    fn jacobian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let n = x.len();
        let mut j = DMatrix::zeros(self.g.len(), n);
        for (i, e) in self.g.iter().enumerate() {
            j.set_row(i, &e.gradient(x.as_slice()).transpose());
        }
        j
    }

    fn strictly_feasible(&self, x: &DVector<f64>) -> bool {
        self.g.iter().all(|e| {
            let v = e.eval(x.as_slice());
            v < 0.0 && v.is_finite()
        })
    }

    /// Residual `(∇f + Jᵀλ, −λ∘g − 1/t)` at a given point.
    fn residual(&self, x: &DVector<f64>, lam: &DVector<f64>, t: f64) -> f64 {
        let gv = self.gvals(x);
        let rd = self.f.gradient(x.as_slice()) + self.jacobian(x).transpose() * lam;
        let rc = -lam.component_mul(&gv).add_scalar(1.0 / t);
        (rd.norm_squared() + rc.norm_squared()).sqrt()
    }

    /// Barrier merit `t·f(x) − Σ log(−gᵢ(x))`, `+∞` outside the interior.
    fn merit(&self, x: &DVector<f64>, t: f64) -> f64 {
        let mut v = t * self.f.eval(x.as_slice());
        for e in self.g {
            let gi = e.eval(x.as_slice());
            if !(gi < 0.0) {
                return f64::INFINITY;
            }
            v -= (-gi).ln();
        }
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    }
}

/// Solves `h dx = rhs` for symmetric positive semidefinite `h`, regularizing
/// when the factorization fails.
fn solve_psd(h: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    let n = h.nrows();
    let scale = (0..n).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
    let mut delta = 0.0;
    for _ in 0..12 {
        let mut hr = h.clone();
        for i in 0..n {
            hr[(i, i)] += delta;
        }
        if let Some(ch) = hr.clone().cholesky() {
            let dx = ch.solve(rhs);
            if dx.iter().all(|v| v.is_finite()) {
                return Some(dx);
            }
        }
        delta = if delta == 0.0 { 1e-14 * scale.max(1.0) } else { delta * 100.0 };
    }
    h.clone().lu().solve(rhs).filter(|d| d.iter().all(|v| v.is_finite()))
}

/// Classifies an iterate sequence that keeps moving along `d`: a feasible
/// ray on which `f` decreases without bound is unboundedness, a feasible ray
/// with a strict but bounded decrease means the infimum is not attained.
/// The ray is probed at distances `scale · {1, 10, 100, 1000}`.
fn probe_ray(p: &Problem, x: &DVector<f64>, d: &DVector<f64>, scale: f64, tol_decrease: f64) -> Option<Outcome> {
    let dn = d.norm();
    if dn == 0.0 || !dn.is_finite() {
        return None;
    }
    let u = d / dn;
    let f0 = p.f.eval(x.as_slice());
    let steps = [1.0, 10.0, 100.0, 1000.0];
    let mut vals = Vec::with_capacity(steps.len());
    for s in steps {
        let y = x + &u * (s * scale);
        if !p.g.iter().all(|e| e.eval(y.as_slice()) <= 0.0) {
            return None;
        }
        let fy = p.f.eval(y.as_slice());
        if !fy.is_finite() || fy > f0 + tol_decrease {
            return None;
        }
        vals.push(fy);
    }
    let last = vals[3];
    let slope = (vals[2] - vals[3]) / (900.0 * scale);
    if slope > 1e-8 * (1.0 + f0.abs()) / scale && f0 - last > 1.0 + f0.abs() {
        return Some(Outcome::Unbounded);
    }
    if f0 - last > tol_decrease {
        return Some(Outcome::NotAttained);
    }
    None
}

/// Runs the interior point method from a strictly feasible `x0`.
pub(crate) fn solve(f: &Expr, g: &[Expr], x0: DVector<f64>, s: &Settings) -> Result {
    let p = Problem { f, g };
    if g.is_empty() {
        return newton(&p, x0, s);
    }
    debug_assert!(p.strictly_feasible(&x0));
    let m = g.len() as f64;
    let mut x = x0;
    let mut gv = p.gvals(&x);
    let mut lam = gv.map(|v| 1.0 / (-v));
    let mut history: Vec<(f64, DVector<f64>)> = Vec::new();
    let mut gap = f64::INFINITY;
    let mut outcome = Outcome::MaxIter;
    let mut it = 0;
    let mut last_step = 1.0;
    while it < s.max_iter {
        let fx = f.eval(x.as_slice());
        if fx < -1e15 {
            outcome = Outcome::Unbounded;
            break;
        }
        let gf = f.gradient(x.as_slice());
        let jac = p.jacobian(&x);
        gap = -gv.dot(&lam);
        // Pure centering after a short step.
        let t = if last_step < 0.2 { m / gap } else { MU * m / gap };
        let rd = &gf + jac.transpose() * &lam;
        let rc = -lam.component_mul(&gv).add_scalar(1.0 / t);
        let res = rd.amax();
        history.push((gap, x.clone()));
        if res <= s.tol_res * gf.amax().max(1.0) && gap <= s.tol_gap * fx.abs().max(1.0) {
            outcome = Outcome::Converged;
            break;
        }
        if let Some(stop) = s.stop_when {
            if stop(&x) {
                outcome = Outcome::Stopped;
                break;
            }
        }
        let mut h = f.hessian(x.as_slice());
        for (i, e) in g.iter().enumerate() {
            if lam[i] != 0.0 {
                e.add_hessian(x.as_slice(), lam[i], &mut h);
            }
        }
        let neg_g = -&gv;
        let w = lam.component_div(&neg_g);
        let jw = DMatrix::from_fn(jac.nrows(), jac.ncols(), |i, j| jac[(i, j)] * w[i]);
        h += jac.transpose() * jw;
        let rhs = -&rd + jac.transpose() * rc.component_div(&neg_g);
        let Some(dx) = solve_psd(&h, &rhs) else {
            outcome = Outcome::Stalled;
            break;
        };
        if dx.norm() > 1e8 * (1.0 + x.norm()) {
            if let Some(o) = probe_ray(&p, &x, &dx, 1.0 + x.norm(), 1e-12) {
                outcome = o;
                break;
            }
        }
        let jdx = &jac * &dx;
        let dlam = DVector::from_fn(lam.len(), |i, _| (-rc[i] + lam[i] * jdx[i]) / neg_g[i]);
        let mut step = 1.0f64;
        for i in 0..lam.len() {
            if dlam[i] < 0.0 {
                step = step.min(-lam[i] / dlam[i]);
            }
        }
        step *= 0.99;
        while step > 1e-16 && !p.strictly_feasible(&(&x + &dx * step)) {
            step *= BETA;
        }
        // `dx` is a descent direction of the barrier merit `t·f − Σ log(−gᵢ)`;
        // the residual test takes over once rounding dominates the merit.
        let m0 = p.merit(&x, t);
        let slope = t * gf.dot(&dx) + gv.map(|v| -1.0 / v).dot(&jdx);
        let r0 = (rd.norm_squared() + rc.norm_squared()).sqrt();
        while step > 1e-16 {
            let xn = &x + &dx * step;
            if p.merit(&xn, t) <= m0 + ALPHA * step * slope.min(0.0) {
                break;
            }
            let ln = &lam + &dlam * step;
            if p.residual(&xn, &ln, t) <= (1.0 - ALPHA * step) * r0 {
                break;
            }
            step *= BETA;
        }
        it += 1;
        if step <= 1e-16 {
            outcome = Outcome::Stalled;
            break;
        }
        last_step = step;
        x += &dx * step;
        lam += &dlam * step;
        gv = p.gvals(&x);
    }
    if matches!(outcome, Outcome::Converged | Outcome::MaxIter) {
        if let Some(o) = drift_check(&p, &x, gap, &history) {
            outcome = o;
        }
    }
    Result {
        x,
        lambda: lam,
        outcome,
        iterations: it,
        gap,
    }
}

/// Compares the final iterate with the last one whose gap was at least
/// `10⁴` times larger. Convergent central paths barely move over that span;
/// paths escaping to infinity move by `O(1)` per decade of the gap.
fn drift_check(p: &Problem, x: &DVector<f64>, gap: f64, history: &[(f64, DVector<f64>)]) -> Option<Outcome> {
    let (_, xr) = history.iter().rev().find(|(g, _)| *g >= 1e4 * gap)?;
    let d = x - xr;
    if d.norm() <= 0.1 * (1.0 + xr.norm()) {
        return None;
    }
    probe_ray(p, x, &d, d.norm(), 0.1 * gap.max(1e-300))
}

/// Damped Newton for unconstrained problems.
fn newton(p: &Problem, x0: DVector<f64>, s: &Settings) -> Result {
    let mut x = x0;
    let mut outcome = Outcome::MaxIter;
    let mut dec = f64::INFINITY;
    let mut it = 0;
    while it < s.max_iter {
        let fx = p.f.eval(x.as_slice());
        let gf = p.f.gradient(x.as_slice());
        let res = gf.amax();
        if fx < -1e15 {
            outcome = Outcome::Unbounded;
            break;
        }
        let h = p.f.hessian(x.as_slice());
        let Some(dx) = solve_psd(&h, &(-&gf)) else {
            outcome = Outcome::Stalled;
            break;
        };
        dec = -gf.dot(&dx);
        if res <= s.tol_res * 1f64.max(gf.amax()) || dec / 2.0 <= s.tol_gap * fx.abs().max(1.0) {
            outcome = Outcome::Converged;
            break;
        }
        if dx.norm() > 1e8 * (1.0 + x.norm()) {
            if let Some(o) = probe_ray(p, &x, &dx, 1.0 + x.norm(), 1e-12) {
                outcome = o;
                break;
            }
        }
        let mut step = 1.0;
        while step > 1e-16 {
            let fy = p.f.eval((&x + &dx * step).as_slice());
            if fy.is_finite() && fy <= fx - ALPHA * step * dec {
                break;
            }
            step *= BETA;
        }
        it += 1;
        if step <= 1e-16 {
            outcome = Outcome::Stalled;
            break;
        }
        x += &dx * step;
    }
    Result {
        x,
        lambda: DVector::zeros(0),
        outcome,
        iterations: it,
        gap: dec.max(0.0) / 2.0,
    }
}
