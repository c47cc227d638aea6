//! Independent reference computations: brute-force vertex enumeration,
//! active-set QP and central finite differences.

use benson_core::model::{DomainBox, Expr};
use benson_core::polyhedral::{enumerate_vertices, HRep, HalfSpace};
use benson_core::solver::{solve, ScalarProgram, SolveStatus, SolverOptions};
use benson_core::Tolerances;
use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// All `k`-subsets of `0..n`.
pub fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

fn push_unique(out: &mut Vec<DVector<f64>>, p: DVector<f64>, tol: f64) {
    if !out.iter().any(|u| (u - &p).amax() <= tol * 1f64.max(p.amax())) {
        out.push(p);
    }
}

/// Vertices of `{y : aᵢᵀy ≥ bᵢ}` by solving every `dim × dim` subsystem.
pub fn brute_vertices(dim: usize, hrep: &HRep) -> Vec<DVector<f64>> {
    let hs = &hrep.halfspaces;
    let mut out = Vec::new();
    for s in subsets(hs.len(), dim) {
        let a = DMatrix::from_fn(dim, dim, |i, j| hs[s[i]].normal[j]);
        let b = DVector::from_fn(dim, |i, _| hs[s[i]].offset);
        let svd = a.clone().svd(true, true);
        if svd.singular_values.min() <= 1e-9 * svd.singular_values.max() {
            continue;
        }
        let Some(y) = a.lu().solve(&b) else { continue };
        if hs.iter().all(|h| h.normal.dot(&y) - h.offset >= -1e-9 * 1f64.max(h.offset.abs())) {
            push_unique(&mut out, y, 1e-9);
        }
    }
    out
}

/// Unit extreme rays of `{d : aᵢᵀd ≥ 0}` from every `(dim − 1)`-subsystem.
pub fn brute_rays(dim: usize, hrep: &HRep) -> Vec<DVector<f64>> {
    let hs = &hrep.halfspaces;
    let mut out = Vec::new();
    for s in subsets(hs.len(), dim - 1) {
        let rows: Vec<DVector<f64>> = s.iter().map(|&i| hs[i].normal.clone()).collect();
        if rank(&rows, dim) < dim - 1 {
            continue;
        }
        let d = orthogonal_complement(&rows, dim);
        for sign in [1.0, -1.0] {
            let r = &d * sign;
            if hs.iter().all(|h| h.normal.dot(&r) >= -1e-9) {
                push_unique(&mut out, r, 1e-7);
            }
        }
    }
    out
}

fn rank(rows: &[DVector<f64>], dim: usize) -> usize {
    if rows.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]);
    let sv = m.singular_values();
    let smax = sv.max();
    sv.iter().filter(|&&x| x > 1e-9 * smax).count()
}

/// A unit vector orthogonal to the span of `rows`, which has rank `dim − 1`.
fn orthogonal_complement(rows: &[DVector<f64>], dim: usize) -> DVector<f64> {
    // Orthonormal basis of the row space by modified Gram–Schmidt.
    let mut basis: Vec<DVector<f64>> = Vec::new();
    for r in rows {
        let mut v = r.clone();
        for b in &basis {
            v -= b * b.dot(&v);
        }
        if v.norm() > 1e-9 * r.norm() {
            basis.push(v.normalize());
        }
    }
    let mut best = DVector::zeros(dim);
    let mut best_norm = 0.0;
    for k in 0..dim {
        let mut r = DVector::zeros(dim);
        r[k] = 1.0;
        for b in &basis {
            r -= b * b.dot(&r);
        }
        let n = r.norm();
        if n > best_norm {
            best_norm = n;
            best = r / n;
        }
    }
    best
}

/// Largest distance from a point of either set to the other set.
pub fn hausdorff(a: &[DVector<f64>], b: &[DVector<f64>]) -> f64 {
    let one = |x: &[DVector<f64>], y: &[DVector<f64>]| {
        x.iter()
            .map(|p| y.iter().map(|q| (p - q).norm()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    if a.is_empty() && b.is_empty() {
        return 0.0;
    }
    one(a, b).max(one(b, a))
}

/// Random bounded polytope in `dim` dimensions: the box `[-2, 2]^dim` cut by
/// `extra` halfspaces tangent to spheres of random radius around the origin.
pub fn random_polytope<R: Rng>(rng: &mut R, dim: usize, extra: usize) -> HRep {
    let mut hs = Vec::new();
    for i in 0..dim {
        for s in [1.0, -1.0] {
            let mut n = DVector::zeros(dim);
            n[i] = s;
            hs.push(HalfSpace::new(n, -2.0));
        }
    }
    for _ in 0..extra {
        let n = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0)).normalize();
        hs.push(HalfSpace::new(n, -rng.gen_range(0.5..1.8)));
    }
    HRep::new(hs)
}

/// Random unbounded polyhedron whose recession cone is the orthant: lower
/// bounds plus cuts with nonnegative normals.
pub fn random_upper_set<R: Rng>(rng: &mut R, dim: usize, extra: usize) -> HRep {
    let mut hs = Vec::new();
    for i in 0..dim {
        let mut n = DVector::zeros(dim);
        n[i] = 1.0;
        hs.push(HalfSpace::new(n, rng.gen_range(-1.0..0.0)));
    }
    for _ in 0..extra {
        let n = DVector::from_fn(dim, |_, _| rng.gen_range(0.05..1.0)).normalize();
        hs.push(HalfSpace::new(n, rng.gen_range(0.0..1.0)));
    }
    HRep::new(hs)
}

/// Hausdorff distances between double description and brute force for the
/// vertex sets and the unit ray sets.
pub fn dd_vs_brute(dim: usize, hrep: &HRep) -> (f64, f64) {
    let v = enumerate_vertices(dim, hrep, Tolerances::default()).expect("pointed nonempty polyhedron");
    let rays: Vec<DVector<f64>> = v.rays.iter().map(|r| r.normalize()).collect();
    (
        hausdorff(&v.vertices, &brute_vertices(dim, hrep)),
        hausdorff(&rays, &brute_rays(dim, hrep)),
    )
}

/// Convex QP `min ½xᵀQx + cᵀx s.t. Ax ≤ b`.
#[derive(Debug, Clone)]
pub struct Qp {
    pub q: DMatrix<f64>,
    pub c: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl Qp {
    /// Positive definite `Q` and constraints strictly satisfied at the origin.
    pub fn random<R: Rng>(rng: &mut R, n: usize, m: usize) -> Self {
        let l = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
        let q = l.transpose() * &l + DMatrix::identity(n, n) * 0.1;
        Self {
            q,
            c: DVector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0)),
            a: DMatrix::from_fn(m, n, |_, _| rng.gen_range(-1.0..1.0)),
            b: DVector::from_fn(m, |_, _| rng.gen_range(0.1..1.0)),
        }
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.q * x)) + self.c.dot(x)
    }

    pub fn program(&self) -> ScalarProgram {
        let n = self.c.len();
        let vars: Vec<Expr> = (0..n).map(Expr::var).collect();
        let objective = 0.5 * Expr::quad_form(self.q.clone(), vars) + Expr::affine(self.c.iter().copied().collect(), 0.0);
        let constraints = (0..self.a.nrows())
            .map(|i| Expr::affine(self.a.row(i).iter().copied().collect(), -self.b[i]))
            .collect();
        ScalarProgram {
            objective,
            constraints,
            domain: DomainBox::free(n),
        }
    }

    /// Optimal value by enumerating active sets: for each subset solve the
    /// equality-constrained KKT system and keep primal and dual feasible
    /// candidates.
    pub fn active_set_value(&self) -> f64 {
        let (n, m) = (self.c.len(), self.b.len());
        let mut best = f64::INFINITY;
        for k in 0..=m.min(n) {
            for s in subsets(m, k) {
                let dimk = n + k;
                let mut kkt = DMatrix::zeros(dimk, dimk);
                let mut rhs = DVector::zeros(dimk);
                kkt.view_mut((0, 0), (n, n)).copy_from(&self.q);
                for (r, &i) in s.iter().enumerate() {
                    for j in 0..n {
                        kkt[(n + r, j)] = self.a[(i, j)];
                        kkt[(j, n + r)] = self.a[(i, j)];
                    }
                    rhs[n + r] = self.b[i];
                }
                for j in 0..n {
                    rhs[j] = -self.c[j];
                }
                let Some(sol) = kkt.lu().solve(&rhs) else { continue };
                let x = sol.rows(0, n).clone_owned();
                // Qx + c + Aₛᵀλ = 0 with λ ≥ 0.
                let dual_ok = (0..k).all(|r| sol[n + r] >= -1e-10);
                let primal_ok = (0..m).all(|i| self.a.row(i).transpose().dot(&x) <= self.b[i] + 1e-10);
                if dual_ok && primal_ok {
                    best = best.min(self.value(&x));
                }
            }
        }
        best
    }

    /// Absolute difference between the solver and the active-set oracle.
    pub fn solver_error(&self) -> f64 {
        let s = solve(&self.program(), None, &SolverOptions::default());
        assert_eq!(s.status, SolveStatus::Optimal);
        (s.value - self.active_set_value()).abs()
    }
}

/// Central difference gradient with step `h`.
pub fn finite_gradient(e: &Expr, x: &[f64], h: f64) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[i] += h;
        xm[i] -= h;
        (e.eval(&xp) - e.eval(&xm)) / (2.0 * h)
    })
}

/// Smooth convex test expressions over three variables.
pub fn smooth_expressions() -> Vec<Expr> {
    let x = |i| Expr::var(i);
    let q = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.0, 0.5, 1.0, 0.3, 0.0, 0.3, 1.5]);
    vec![
        (x(0) - 1.0).square() + (x(1) - 1.0).square() - 1.0,
        x(0).exp() + x(2).exp(),
        Expr::affine(vec![0.5, -1.0, 2.0], 0.3).exp(),
        (x(0) + 2.0 * x(1) - 0.5).pow(4) + 0.3 * x(2).square(),
        Expr::quad_form(q, vec![x(0), x(1) - 0.2, x(2)]) + (Expr::affine(vec![0.3, 0.0, 0.0], 0.0).exp() + x(1)).exp(),
        3.0 * (x(2) - x(0)).square() - x(1),
    ]
}

/// Largest deviation between analytic and finite difference gradients at
/// `count` random points of `[-1.5, 1.5]³`.
pub fn gradient_error<R: Rng>(rng: &mut R, count: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for e in smooth_expressions() {
        for _ in 0..count {
            let x: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.5..1.5)).collect();
            let g = e.gradient(&x);
            let fd = finite_gradient(&e, &x, 1e-5);
            worst = worst.max((g - fd).amax());
        }
    }
    worst
}
