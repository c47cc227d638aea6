//! Expression trees for objectives and constraints.
//!
//! Convexity is established by composition rules only: nonlinear atoms take
//! affine arguments (exp also accepts convex ones, being convex and
//! increasing), sums and maxima of convex terms are convex, and only affine
//! terms may carry negative weights.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Sum(Vec<Expr>),
    Scale(f64, Box<Expr>),
    /// `coeffsᵀx + offset`.
    Affine { coeffs: Vec<f64>, offset: f64 },
    Square(Box<Expr>),
    /// Even integer power.
    Pow(Box<Expr>, u32),
    Exp(Box<Expr>),
    Abs(Box<Expr>),
    /// `eᵀQe` for a PSD matrix `Q` and affine `e`.
    QuadForm { matrix: DMatrix<f64>, args: Vec<Expr> },
    Max(Vec<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Curvature {
    Constant,
    Affine,
    Convex,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("expression at `{path}` is not provably convex: {reason}")]
pub struct ConvexityError {
    pub path: String,
    pub reason: String,
}

impl ConvexityError {
    pub fn new(path: impl Into<String>, reason: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

/// Relative tolerance for treating branches of a max, or the argument of an
/// absolute value, as tied.
const KINK_TOL: f64 = 1e-12;

fn child(path: &str, suffix: &str) -> String {
    if path.is_empty() {
        suffix.to_string()
    } else {
        format!("{path}.{suffix}")
    }
}

impl Expr {
    pub fn var(i: usize) -> Self {
        Expr::Var(i)
    }

    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn affine(coeffs: Vec<f64>, offset: f64) -> Self {
        Expr::Affine { coeffs, offset }
    }

    pub fn square(self) -> Self {
        Expr::Square(Box::new(self))
    }

    pub fn pow(self, k: u32) -> Self {
        Expr::Pow(Box::new(self), k)
    }

    pub fn exp(self) -> Self {
        Expr::Exp(Box::new(self))
    }

    pub fn abs(self) -> Self {
        Expr::Abs(Box::new(self))
    }

    pub fn max(args: Vec<Expr>) -> Self {
        Expr::Max(args)
    }

    pub fn quad_form(matrix: DMatrix<f64>, args: Vec<Expr>) -> Self {
        Expr::QuadForm { matrix, args }
    }

    /// `Σ wᵢ eᵢ`, skipping zero weights.
    pub fn weighted_sum(weights: &[f64], exprs: &[Expr]) -> Self {
        let terms: Vec<Expr> = weights
            .iter()
            .zip(exprs)
            .filter(|(w, _)| **w != 0.0)
            .map(|(&w, e)| if w == 1.0 { e.clone() } else { w * e.clone() })
            .collect();
        match terms.len() {
            0 => Expr::Const(0.0),
            1 => terms.into_iter().next().expect("one term"),
            _ => Expr::Sum(terms),
        }
    }

    /// One past the largest variable index referenced.
    pub fn num_vars(&self) -> usize {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(i) => i + 1,
            Expr::Affine { coeffs, .. } => coeffs.len(),
            Expr::Sum(a) | Expr::Max(a) | Expr::QuadForm { args: a, .. } => {
                a.iter().map(Expr::num_vars).max().unwrap_or(0)
            }
            Expr::Scale(_, e) | Expr::Square(e) | Expr::Pow(e, _) | Expr::Exp(e) | Expr::Abs(e) => {
                e.num_vars()
            }
        }
    }

    /// True when no `abs` or `max` node occurs.
    pub fn is_smooth(&self) -> bool {
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Affine { .. } => true,
            Expr::Abs(_) | Expr::Max(_) => false,
            Expr::Sum(a) | Expr::QuadForm { args: a, .. } => a.iter().all(Expr::is_smooth),
            Expr::Scale(_, e) | Expr::Square(e) | Expr::Pow(e, _) | Expr::Exp(e) => e.is_smooth(),
        }
    }

    /// Curvature under the composition rules, or the first violation found.
    pub fn curvature(&self) -> Result<Curvature, ConvexityError> {
        self.curvature_at("")
    }

    fn curvature_at(&self, path: &str) -> Result<Curvature, ConvexityError> {
        use Curvature::*;
        let need_affine = |e: &Expr, p: String, what: &str| -> Result<(), ConvexityError> {
            match e.curvature_at(&p)? {
                Constant | Affine => Ok(()),
                Convex => Err(ConvexityError::new(p, format!("{what} needs an affine argument"))),
            }
        };
        Ok(match self {
            Expr::Const(c) => {
                if !c.is_finite() {
                    return Err(ConvexityError::new(path, "non-finite constant"));
                }
                Constant
            }
            Expr::Var(_) => Affine,
            Expr::Affine { coeffs, offset } => {
                if !offset.is_finite() || coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(ConvexityError::new(path, "non-finite coefficient"));
                }
                Affine
            }
            Expr::Sum(args) => {
                let mut c = Constant;
                for (i, a) in args.iter().enumerate() {
                    c = c.max(a.curvature_at(&child(path, &format!("args[{i}]")))?);
                }
                c
            }
            Expr::Scale(w, e) => {
                if !w.is_finite() {
                    return Err(ConvexityError::new(path, "non-finite factor"));
                }
                let c = e.curvature_at(&child(path, "arg"))?;
                if *w < 0.0 && c == Convex {
                    return Err(ConvexityError::new(
                        path,
                        "negative weight on a nonlinear convex term",
                    ));
                }
                if *w == 0.0 {
                    Constant
                } else {
                    c
                }
            }
            Expr::Square(e) => {
                need_affine(e, child(path, "arg"), "square")?;
                Convex
            }
            Expr::Pow(e, k) => {
                if *k == 0 || k % 2 != 0 {
                    return Err(ConvexityError::new(path, "power exponent must be even and positive"));
                }
                need_affine(e, child(path, "arg"), "pow")?;
                Convex
            }
            Expr::Exp(e) => {
                e.curvature_at(&child(path, "arg"))?;
                Convex
            }
            Expr::Abs(e) => {
                need_affine(e, child(path, "arg"), "abs")?;
                Convex
            }
            Expr::QuadForm { matrix, args } => {
                if matrix.nrows() != args.len() || matrix.ncols() != args.len() {
                    return Err(ConvexityError::new(path, "quad_form matrix shape mismatch"));
                }
                let sym = (matrix - matrix.transpose()).amax();
                if sym > 1e-10 * 1f64.max(matrix.amax()) {
                    return Err(ConvexityError::new(path, "quad_form matrix is not symmetric"));
                }
                let eig = matrix.clone().symmetric_eigen();
                if eig.eigenvalues.min() < -1e-10 * 1f64.max(matrix.amax()) {
                    return Err(ConvexityError::new(path, "quad_form matrix is not PSD"));
                }
                for (i, a) in args.iter().enumerate() {
                    need_affine(a, child(path, &format!("args[{i}]")), "quad_form")?;
                }
                Convex
            }
            Expr::Max(args) => {
                if args.is_empty() {
                    return Err(ConvexityError::new(path, "max of an empty list"));
                }
                for (i, a) in args.iter().enumerate() {
                    a.curvature_at(&child(path, &format!("args[{i}]")))?;
                }
                Convex
            }
        })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => x[*i],
            Expr::Affine { coeffs, offset } => {
                coeffs.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + offset
            }
            Expr::Sum(a) => a.iter().map(|e| e.eval(x)).sum(),
            Expr::Scale(w, e) => w * e.eval(x),
            Expr::Square(e) => e.eval(x).powi(2),
            Expr::Pow(e, k) => e.eval(x).powi(*k as i32),
            Expr::Exp(e) => e.eval(x).exp(),
            Expr::Abs(e) => e.eval(x).abs(),
            Expr::QuadForm { matrix, args } => {
                let v = DVector::from_iterator(args.len(), args.iter().map(|e| e.eval(x)));
                v.dot(&(matrix * &v))
            }
            Expr::Max(a) => a.iter().map(|e| e.eval(x)).fold(f64::NEG_INFINITY, f64::max),
        }
    }

    /// Gradient where smooth; at kinks `abs` contributes 0 and a tied `max`
    /// the average of the tied branch gradients.
    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        self.add_gradient(x, 1.0, &mut g);
        g
    }

    pub fn add_gradient(&self, x: &[f64], scale: f64, g: &mut DVector<f64>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(i) => g[*i] += scale,
            Expr::Affine { coeffs, .. } => {
                for (i, a) in coeffs.iter().enumerate() {
                    g[i] += scale * a;
                }
            }
            Expr::Sum(a) => a.iter().for_each(|e| e.add_gradient(x, scale, g)),
            Expr::Scale(w, e) => e.add_gradient(x, scale * w, g),
            Expr::Square(e) => e.add_gradient(x, scale * 2.0 * e.eval(x), g),
            Expr::Pow(e, k) => {
                let u = e.eval(x);
                e.add_gradient(x, scale * (*k as f64) * u.powi(*k as i32 - 1), g)
            }
            Expr::Exp(e) => e.add_gradient(x, scale * e.eval(x).exp(), g),
            Expr::Abs(e) => {
                let u = e.eval(x);
                if u.abs() > KINK_TOL * 1f64.max(u.abs()) {
                    e.add_gradient(x, scale * u.signum(), g)
                }
            }
            Expr::QuadForm { matrix, args } => {
                let v = DVector::from_iterator(args.len(), args.iter().map(|e| e.eval(x)));
                let qv = matrix * &v;
                for (i, a) in args.iter().enumerate() {
                    a.add_gradient(x, scale * 2.0 * qv[i], g);
                }
            }
            Expr::Max(a) => {
                let active = max_active(a, x);
                let share = scale / active.len() as f64;
                for i in active {
                    a[i].add_gradient(x, share, g);
                }
            }
        }
    }

    /// Hessian of the smooth pieces; `abs` contributes nothing and a tied
    /// `max` averages its tied branches.
    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(x.len(), x.len());
        self.add_hessian(x, 1.0, &mut h);
        h
    }

    pub fn add_hessian(&self, x: &[f64], scale: f64, h: &mut DMatrix<f64>) {
        let outer = |e: &Expr, s: f64, h: &mut DMatrix<f64>| {
            let g = e.gradient(x);
            h.ger(s, &g, &g, 1.0);
        };
        match self {
            Expr::Const(_) | Expr::Var(_) | Expr::Affine { .. } => {}
            Expr::Sum(a) => a.iter().for_each(|e| e.add_hessian(x, scale, h)),
            Expr::Scale(w, e) => e.add_hessian(x, scale * w, h),
            Expr::Square(e) => {
                outer(e, 2.0 * scale, h);
                e.add_hessian(x, scale * 2.0 * e.eval(x), h);
            }
            Expr::Pow(e, k) => {
                let u = e.eval(x);
                let k = *k as i32;
                outer(e, scale * (k * (k - 1)) as f64 * u.powi(k - 2), h);
                e.add_hessian(x, scale * k as f64 * u.powi(k - 1), h);
            }
            Expr::Exp(e) => {
                let eu = e.eval(x).exp();
                outer(e, scale * eu, h);
                e.add_hessian(x, scale * eu, h);
            }
            Expr::Abs(e) => {
                let u = e.eval(x);
                if u.abs() > KINK_TOL * 1f64.max(u.abs()) {
                    e.add_hessian(x, scale * u.signum(), h);
                }
            }
            Expr::QuadForm { matrix, args } => {
                let grads: Vec<DVector<f64>> = args.iter().map(|e| e.gradient(x)).collect();
                let v = DVector::from_iterator(args.len(), args.iter().map(|e| e.eval(x)));
                let qv = matrix * &v;
                for i in 0..args.len() {
                    for j in 0..args.len() {
                        if matrix[(i, j)] != 0.0 {
                            h.ger(2.0 * scale * matrix[(i, j)], &grads[i], &grads[j], 1.0);
                        }
                    }
                    args[i].add_hessian(x, 2.0 * scale * qv[i], h);
                }
            }
            Expr::Max(a) => {
                let active = max_active(a, x);
                let share = scale / active.len() as f64;
                for i in active {
                    a[i].add_hessian(x, share, h);
                }
            }
        }
    }

    /// Vertices of a polytope containing the subdifferential at `x`, treating
    /// kinks within `tol` as active.
    pub fn subdifferential(&self, x: &[f64], tol: f64) -> Vec<DVector<f64>> {
        const CAP: usize = 256;
        let n = x.len();
        match self {
            Expr::Abs(e) => {
                let u = e.eval(x);
                let g = e.gradient(x);
                if u.abs() <= tol {
                    vec![-&g, g]
                } else {
                    vec![g * u.signum()]
                }
            }
            Expr::Max(a) => {
                let vals: Vec<f64> = a.iter().map(|e| e.eval(x)).collect();
                let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut out = Vec::new();
                for (e, v) in a.iter().zip(&vals) {
                    if *v >= m - tol {
                        out.extend(e.subdifferential(x, tol));
                    }
                }
                out.truncate(CAP);
                out
            }
            Expr::Sum(a) => {
                let mut acc = vec![DVector::zeros(n)];
                for e in a {
                    let part = e.subdifferential(x, tol);
                    let mut next = Vec::with_capacity(acc.len() * part.len());
                    for s in &acc {
                        for p in &part {
                            next.push(s + p);
                        }
                    }
                    next.truncate(CAP);
                    acc = next;
                }
                acc
            }
            Expr::Scale(w, e) => e.subdifferential(x, tol).into_iter().map(|g| g * *w).collect(),
            Expr::Exp(e) => {
                let s = e.eval(x).exp();
                e.subdifferential(x, tol).into_iter().map(|g| g * s).collect()
            }
            _ => vec![self.gradient(x)],
        }
    }
}

fn max_active(a: &[Expr], x: &[f64]) -> Vec<usize> {
    let vals: Vec<f64> = a.iter().map(|e| e.eval(x)).collect();
    let m = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let tol = KINK_TOL * 1f64.max(m.abs());
    (0..vals.len()).filter(|&i| vals[i] >= m - tol).collect()
}

impl Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        match self {
            Expr::Sum(mut a) => {
                a.push(rhs);
                Expr::Sum(a)
            }
            s => Expr::Sum(vec![s, rhs]),
        }
    }
}

impl Add<f64> for Expr {
    type Output = Expr;
    fn add(self, rhs: f64) -> Expr {
        self + Expr::Const(rhs)
    }
}

impl Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        self + (-rhs)
    }
}

impl Sub<f64> for Expr {
    type Output = Expr;
    fn sub(self, rhs: f64) -> Expr {
        self + Expr::Const(-rhs)
    }
}

impl Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        -1.0 * self
    }
}

impl Mul<Expr> for f64 {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::Scale(self, Box::new(rhs))
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let list = |f: &mut fmt::Formatter<'_>, name: &str, a: &[Expr]| {
            write!(f, "{name}(")?;
            for (i, e) in a.iter().enumerate() {
                if i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{e}")?;
            }
            write!(f, ")")
        };
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(i) => write!(f, "x{i}"),
            Expr::Affine { coeffs, offset } => write!(f, "affine({coeffs:?}, {offset})"),
            Expr::Sum(a) => list(f, "sum", a),
            Expr::Scale(w, e) => write!(f, "{w}*{e}"),
            Expr::Square(e) => write!(f, "square({e})"),
            Expr::Pow(e, k) => write!(f, "pow({e}, {k})"),
            Expr::Exp(e) => write!(f, "exp({e})"),
            Expr::Abs(e) => write!(f, "abs({e})"),
            Expr::QuadForm { args, .. } => list(f, "quad_form", args),
            Expr::Max(a) => list(f, "max", a),
        }
    }
}
