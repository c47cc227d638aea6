//! Epigraph lifting of `abs` and `max` nodes into smooth constraints.

use nalgebra::DVector;

use crate::model::Expr;

/// Smooth reformulation: every nonsmooth node is replaced by a fresh
/// variable `s` with `s ≥` each of its branches.
pub(crate) struct Lifted {
    pub objective: Expr,
    /// Original constraints first, then the epigraph rows.
    pub constraints: Vec<Expr>,
    /// Starting value of the extended variable vector.
    pub x0: DVector<f64>,
}

struct Lifter {
    next: usize,
    start: Vec<f64>,
    rows: Vec<Expr>,
}

impl Lifter {
    /// Returns a smooth expression that is `≥` the original on the feasible
    /// set of the epigraph rows and equal to it at their optimum.
    fn lift(&mut self, e: &Expr) -> Expr {
        if e.is_smooth() {
            return e.clone();
        }
        match e {
            Expr::Sum(a) => Expr::Sum(a.iter().map(|t| self.lift(t)).collect()),
            Expr::Scale(w, t) => Expr::Scale(*w, Box::new(self.lift(t))),
            Expr::Exp(t) => Expr::Exp(Box::new(self.lift(t))),
            Expr::Abs(t) => {
                let t = self.lift(t);
                self.epigraph(vec![t.clone(), -t])
            }
            Expr::Max(a) => {
                let branches = a.iter().map(|t| self.lift(t)).collect();
                self.epigraph(branches)
            }
            other => other.clone(),
        }
    }

    fn epigraph(&mut self, branches: Vec<Expr>) -> Expr {
        let s = self.next;
        self.next += 1;
        let v = branches
            .iter()
            .map(|b| b.eval(&self.start))
            .fold(f64::NEG_INFINITY, f64::max);
        self.start.push(v + 1.0);
        for b in branches {
            self.rows.push(b - Expr::var(s));
        }
        Expr::var(s)
    }
}

pub(crate) fn lift(objective: &Expr, constraints: &[Expr], x0: &DVector<f64>) -> Lifted {
    let mut l = Lifter {
        next: x0.len(),
        start: x0.iter().copied().collect(),
        rows: Vec::new(),
    };
    let objective = l.lift(objective);
    let mut out: Vec<Expr> = constraints.iter().map(|g| l.lift(g)).collect();
    out.append(&mut l.rows);
    Lifted {
        objective,
        constraints: out,
        x0: DVector::from_vec(l.start),
    }
}
