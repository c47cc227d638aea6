//! Convex vector optimization problems `min_C Γ(x)` s.t. `g(x) ≤ 0`, `x ∈ X`.

mod expr;

pub use expr::{ConvexityError, Curvature, Expr};

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::polyhedral::{cone_extreme_rays, lex_cmp, numerical_rank};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error(transparent)]
    Convexity(#[from] ConvexityError),
    #[error("ordering cone: {0}")]
    Cone(String),
    #[error("point lies outside the variable box (coordinate {index}: {value})")]
    Domain { index: usize, value: f64 },
    #[error("malformed problem: {0}")]
    Shape(String),
}

/// Variable box `lower ≤ x ≤ upper`; infinite sides are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DomainBox {
    pub fn free(n: usize) -> Self {
        Self {
            lower: vec![f64::NEG_INFINITY; n],
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self, ModelError> {
        if lower.len() != upper.len() {
            return Err(ModelError::Shape("bound vectors differ in length".into()));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u)) {
            return Err(ModelError::Shape("each lower bound must be below its upper bound".into()));
        }
        Ok(Self { lower, upper })
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn is_free(&self) -> bool {
        self.lower.iter().all(|l| l.is_infinite()) && self.upper.iter().all(|u| u.is_infinite())
    }

    pub fn check(&self, x: &[f64]) -> Result<(), ModelError> {
        for (i, &v) in x.iter().enumerate() {
            if v < self.lower[i] || v > self.upper[i] {
                return Err(ModelError::Domain { index: i, value: v });
            }
        }
        Ok(())
    }

    /// Box extended by `extra` free coordinates.
    pub fn extended(&self, extra: usize) -> Self {
        let mut b = self.clone();
        b.lower.extend(std::iter::repeat(f64::NEG_INFINITY).take(extra));
        b.upper.extend(std::iter::repeat(f64::INFINITY).take(extra));
        b
    }
}

/// `eval` restricted to the variable box.
pub fn eval(e: &Expr, x: &[f64], domain: &DomainBox) -> Result<f64, ModelError> {
    domain.check(x)?;
    Ok(e.eval(x))
}

/// Subgradient restricted to the variable box.
pub fn subgradient(e: &Expr, x: &[f64], domain: &DomainBox) -> Result<DVector<f64>, ModelError> {
    domain.check(x)?;
    Ok(e.gradient(x))
}

/// Polyhedral ordering cone `C = cone(Y) = {y : Zᵀy ≥ 0}` with interior point `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderingCone {
    /// Generators as columns, unit length.
    pub y: DMatrix<f64>,
    /// Dual generators as columns, scaled so `cᵀzʲ = 1`.
    pub z: DMatrix<f64>,
    pub c: DVector<f64>,
}

fn columns(m: &DMatrix<f64>) -> Vec<DVector<f64>> {
    m.column_iter().map(|c| c.clone_owned()).collect()
}

fn to_matrix(q: usize, cols: &[DVector<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(q, cols.len(), |i, j| cols[j][i])
}

impl OrderingCone {
    pub fn orthant(c: DVector<f64>) -> Result<Self, ModelError> {
        let q = c.len();
        Self::new(Some(DMatrix::identity(q, q)), Some(DMatrix::identity(q, q)), c)
    }

    /// Builds the cone from generators, dual generators, or both; a missing
    /// side is computed by double description.
    pub fn new(
        y: Option<DMatrix<f64>>,
        z: Option<DMatrix<f64>>,
        c: DVector<f64>,
    ) -> Result<Self, ModelError> {
        let q = c.len();
        let polar = |m: &DMatrix<f64>| -> Result<DMatrix<f64>, ModelError> {
            let mut rays = cone_extreme_rays(&columns(m), q)
                .map_err(|_| ModelError::Cone("cone is not pointed and solid".into()))?;
            // Descending lexicographic order puts e¹ first for orthants.
            for r in &mut rays {
                r.apply(|x| *x += 0.0);
            }
            rays.sort_by(|a, b| lex_cmp(b, a));
            Ok(to_matrix(q, &rays))
        };
        let (y, z) = match (y, z) {
            (Some(y), Some(z)) => (y, z),
            (Some(y), None) => {
                let z = polar(&y)?;
                (y, z)
            }
            (None, Some(z)) => {
                let y = polar(&z)?;
                (y, z)
            }
            (None, None) => return Err(ModelError::Cone("no generators given".into())),
        };
        if y.nrows() != q || z.nrows() != q {
            return Err(ModelError::Cone("generator dimension differs from c".into()));
        }
        let yc = columns(&y);
        let zc = columns(&z);
        if numerical_rank(&yc, q, 1e-10) < q {
            return Err(ModelError::Cone("generators do not span (cone not solid)".into()));
        }
        if numerical_rank(&zc, q, 1e-10) < q {
            return Err(ModelError::Cone("dual generators do not span (cone not pointed)".into()));
        }
        let mut yn = Vec::with_capacity(yc.len());
        for v in yc {
            let n = v.norm();
            if n <= 1e-12 {
                return Err(ModelError::Cone("zero generator".into()));
            }
            yn.push(v / n);
        }
        let mut zn = Vec::with_capacity(zc.len());
        for v in zc {
            let s = c.dot(&v);
            if !(s > 1e-12 * v.norm()) {
                return Err(ModelError::Cone("c is not in the interior of C (Zᵀc ≤ 0)".into()));
            }
            zn.push(v / s);
        }
        for zj in &zn {
            for yk in &yn {
                if zj.dot(yk) < -1e-9 * zj.norm() {
                    return Err(ModelError::Cone("dual generators are not in C⁺ (ZᵀY < 0)".into()));
                }
            }
        }
        Ok(Self {
            y: to_matrix(q, &yn),
            z: to_matrix(q, &zn),
            c,
        })
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn num_dual_generators(&self) -> usize {
        self.z.ncols()
    }

    pub fn dual_generator(&self, j: usize) -> DVector<f64> {
        self.z.column(j).clone_owned()
    }

    /// Minimum of `Yᵀw` after scaling `w` to unit norm.
    pub fn dual_margin(&self, w: &DVector<f64>) -> f64 {
        let n = w.norm();
        if n == 0.0 {
            return 0.0;
        }
        (self.y.transpose() * w).min() / n
    }

    /// Minimum of `Zᵀy`, i.e. the C-membership margin of `y`.
    pub fn margin(&self, y: &DVector<f64>) -> f64 {
        (self.z.transpose() * y).min()
    }

    /// Default completion `c¹, …, c^{q−1}` of `c` to a basis: unit vectors
    /// excluding the last index of the largest `|cᵢ|`.
    pub fn default_frame(&self) -> Vec<DVector<f64>> {
        let q = self.dim();
        let cmax = self.c.amax();
        let imax = (0..q).rev().find(|&i| self.c[i].abs() == cmax).unwrap_or(q - 1);
        (0..q)
            .filter(|&i| i != imax)
            .map(|i| {
                let mut e = DVector::zeros(q);
                e[i] = 1.0;
                e
            })
            .collect()
    }
}

fn join_path(prefix: &str, rest: &str) -> String {
    if rest.is_empty() {
        prefix.to_string()
    } else {
        format!("{prefix}.{rest}")
    }
}

/// `hᵢ = dᵢᵀg` for the columns `dᵢ` of `d_dual` (an `m × l` matrix).
pub fn reduce_d_cone(g: &[Expr], d_dual: &DMatrix<f64>) -> Result<Vec<Expr>, ConvexityError> {
    assert_eq!(d_dual.nrows(), g.len(), "D dual generators must have one row per constraint");
    let mut out = Vec::with_capacity(d_dual.ncols());
    for (i, col) in d_dual.column_iter().enumerate() {
        let w: Vec<f64> = col.iter().copied().collect();
        let h = Expr::weighted_sum(&w, g);
        h.curvature().map_err(|e| ConvexityError {
            path: join_path(&format!("cone_D.dual_generators[{i}]"), &e.path),
            reason: e.reason,
        })?;
        out.push(h);
    }
    Ok(out)
}

/// A validated problem `(P)` with `D = ℝᵐ₊`.
#[derive(Debug, Clone)]
pub struct CvopProblem {
    pub n: usize,
    pub objectives: Vec<Expr>,
    pub constraints: Vec<Expr>,
    pub domain: DomainBox,
    pub cone: OrderingCone,
    /// Optional completion `c¹, …, c^{q−1}` of the dual frame.
    pub frame: Option<Vec<DVector<f64>>>,
    scalarized: Vec<Expr>,
}

impl CvopProblem {
    pub fn new(
        n: usize,
        objectives: Vec<Expr>,
        constraints: Vec<Expr>,
        domain: DomainBox,
        cone: OrderingCone,
    ) -> Result<Self, ModelError> {
        let q = objectives.len();
        if q < 2 {
            return Err(ModelError::Shape("at least two objectives are required".into()));
        }
        if cone.dim() != q {
            return Err(ModelError::Shape(format!(
                "cone dimension {} differs from the number of objectives {q}",
                cone.dim()
            )));
        }
        if domain.dim() != n {
            return Err(ModelError::Shape("box dimension differs from variable count".into()));
        }
        for (k, e) in objectives.iter().chain(&constraints).enumerate() {
            if e.num_vars() > n {
                return Err(ModelError::Shape(format!(
                    "expression {k} references a variable beyond {n}"
                )));
            }
        }
        for (i, g) in constraints.iter().enumerate() {
            g.curvature().map_err(|e| ConvexityError {
                path: join_path(&format!("constraints[{i}]"), &e.path),
                reason: e.reason,
            })?;
        }
        let mut scalarized = Vec::with_capacity(cone.num_dual_generators());
        for j in 0..cone.num_dual_generators() {
            let z: Vec<f64> = cone.dual_generator(j).iter().copied().collect();
            let s = Expr::weighted_sum(&z, &objectives);
            s.curvature().map_err(|e| ConvexityError {
                path: join_path(&format!("objectives·z[{j}]"), &e.path),
                reason: e.reason,
            })?;
            scalarized.push(s);
        }
        Ok(Self {
            n,
            objectives,
            constraints,
            domain,
            cone,
            frame: None,
            scalarized,
        })
    }

    pub fn with_frame(mut self, frame: Vec<DVector<f64>>) -> Self {
        self.frame = Some(frame);
        self
    }

    pub fn q(&self) -> usize {
        self.objectives.len()
    }

    pub fn m(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_smooth(&self) -> bool {
        self.objectives.iter().chain(&self.constraints).all(Expr::is_smooth)
    }

    pub fn gamma(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(self.q(), self.objectives.iter().map(|e| e.eval(x)))
    }

    /// `(zʲ)ᵀΓ` for each normalized dual generator.
    pub fn scalarized(&self) -> &[Expr] {
        &self.scalarized
    }

    /// `wᵀΓ`. For `w ∈ C⁺` this passes the composition rules: a nonlinear
    /// `Γᵢ` only validates when every `zʲᵢ ≥ 0`, hence `wᵢ ≥ 0`.
    pub fn weighted_objective(&self, w: &DVector<f64>) -> Expr {
        Expr::weighted_sum(w.as_slice(), &self.objectives)
    }

    /// Largest constraint value (`−∞` without constraints), or an error
    /// outside the box.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut v = self
            .constraints
            .iter()
            .map(|g| g.eval(x))
            .fold(f64::NEG_INFINITY, f64::max);
        for (i, &xi) in x.iter().enumerate() {
            v = v.max(self.domain.lower[i] - xi).max(xi - self.domain.upper[i]);
        }
        v
    }
}
