//! Problem files.
//!
//! A problem is a JSON object with the sections `variables`, `objectives`,
//! `constraints`, `cone_C` and `cone_D`. Expressions are written in prefix
//! form: a number is a constant, `"x1"` … `"xn"` are the variables, and an
//! array `[op, arg, …]` applies one of the operators
//!
//! | operator | arguments | meaning |
//! |---|---|---|
//! | `"+"` | `e₁, …, e_k` | sum |
//! | `"-"` | `e` or `a, b` | negation or difference |
//! | `"*"` | `k, e` or `e, k` | product with the number `k` |
//! | `"affine"` | `[a₁, …, a_n], b` | `aᵀx + b` |
//! | `"square"` | `e` | `e²` |
//! | `"pow"` | `e, k` | `eᵏ` for even `k` |
//! | `"exp"` | `e` | `exp(e)` |
//! | `"abs"` | `e` | `|e|` |
//! | `"quad_form"` | `Q, [e₁, …, e_k]` | `eᵀQe`, `Q` PSD given as rows |
//! | `"max"` | `e₁, …, e_k` | pointwise maximum |
//!
//! Every node must pass the convexity composition rules.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::duality::DualFrame;
use crate::engine::interior_point;
use crate::model::{reduce_d_cone, ConvexityError, CvopProblem, DomainBox, Expr, ModelError, OrderingCone};
use crate::solver::SolverOptions;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{location}: {message}")]
pub struct ParseError {
    /// `line L, column C` for syntax errors, otherwise the path of the
    /// offending JSON node.
    pub location: String,
    pub message: String,
}

impl ParseError {
    fn new(location: &str, message: impl Into<String>) -> Self {
        Self {
            location: location.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Error)]
pub enum LoadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Convexity(#[from] ConvexityError),
    #[error("ordering cone: {0}")]
    Cone(String),
    #[error("no strictly feasible point found: {0}")]
    Infeasible(String),
}

impl LoadError {
    pub fn kind(&self) -> &'static str {
        match self {
            Self::Io { .. } => "IoError",
            Self::Parse(_) => "ParseError",
            Self::Convexity(_) => "ConvexityError",
            Self::Cone(_) => "ConeError",
            Self::Infeasible(_) => "Infeasible",
        }
    }
}

impl From<ModelError> for LoadError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::Convexity(c) => Self::Convexity(c),
            ModelError::Cone(s) => Self::Cone(s),
            other => Self::Parse(ParseError::new("problem", other.to_string())),
        }
    }
}

/// Reads, validates and reduces a problem file, then checks that a strictly
/// feasible point exists.
pub fn load_problem(path: impl AsRef<Path>) -> Result<CvopProblem, LoadError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| LoadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let prob = parse_problem(&text)?;
    interior_point(&prob, &SolverOptions::default()).map_err(|e| LoadError::Infeasible(e.to_string()))?;
    Ok(prob)
}

/// Parses and validates a problem document without the feasibility check.
pub fn parse_problem(text: &str) -> Result<CvopProblem, LoadError> {
    let doc: Value = serde_json::from_str(text).map_err(|e| {
        ParseError::new(&format!("line {}, column {}", e.line(), e.column()), e.to_string())
    })?;
    let root = object(&doc, "$")?;
    allow_keys(root, "$", &["name", "variables", "objectives", "constraints", "cone_C", "cone_D"])?;

    let vars = object(required(root, "$", "variables")?, "variables")?;
    allow_keys(vars, "variables", &["count", "lower", "upper"])?;
    let n = usize_value(required(vars, "variables", "count")?, "variables.count")?;
    if n == 0 {
        return Err(ParseError::new("variables.count", "at least one variable is required").into());
    }
    let lower = bounds(vars.get("lower"), n, f64::NEG_INFINITY, "variables.lower")?;
    let upper = bounds(vars.get("upper"), n, f64::INFINITY, "variables.upper")?;
    let domain = DomainBox::new(lower, upper)?;

    let objectives = expr_list(required(root, "$", "objectives")?, "objectives", n)?;
    let q = objectives.len();
    let constraints = match root.get("constraints") {
        Some(v) => expr_list(v, "constraints", n)?,
        None => Vec::new(),
    };
    let constraints = match root.get("cone_D") {
        None => constraints,
        Some(Value::String(s)) if s == "orthant" => constraints,
        Some(v) => {
            let obj = object(v, "cone_D")?;
            allow_keys(obj, "cone_D", &["dual_generators"])?;
            let path = "cone_D.dual_generators";
            let cols = vectors(required(obj, "cone_D", "dual_generators")?, path, Some(constraints.len()))?;
            if cols.is_empty() {
                return Err(ParseError::new(path, "at least one generator is required").into());
            }
            reduce_d_cone(&constraints, &columns_to_matrix(constraints.len(), &cols))?
        }
    };

    let cone_obj = object(required(root, "$", "cone_C")?, "cone_C")?;
    allow_keys(cone_obj, "cone_C", &["generators", "dual_generators", "c", "c_frame"])?;
    let c = DVector::from_vec(vector(required(cone_obj, "cone_C", "c")?, "cone_C.c", Some(q))?);
    let matrix = |key: &str| -> Result<Option<DMatrix<f64>>, ParseError> {
        cone_obj
            .get(key)
            .map(|v| vectors(v, &format!("cone_C.{key}"), Some(q)).map(|cols| columns_to_matrix(q, &cols)))
            .transpose()
    };
    let y = matrix("generators")?;
    let z = matrix("dual_generators")?;
    let cone = if y.is_none() && z.is_none() {
        OrderingCone::orthant(c)?
    } else {
        OrderingCone::new(y, z, c)?
    };
    let frame = cone_obj
        .get("c_frame")
        .map(|v| vectors(v, "cone_C.c_frame", Some(q)))
        .transpose()?
        .map(|cols| cols.into_iter().map(DVector::from_vec).collect::<Vec<_>>());
    if let Some(f) = &frame {
        DualFrame::new(f, &cone.c).map_err(|e| LoadError::Cone(format!("c_frame: {e}")))?;
    }

    let prob = CvopProblem::new(n, objectives, constraints, domain, cone)?;
    Ok(match frame {
        Some(f) => prob.with_frame(f),
        None => prob,
    })
}

fn object<'a>(v: &'a Value, path: &str) -> Result<&'a Map<String, Value>, ParseError> {
    v.as_object().ok_or_else(|| ParseError::new(path, "expected an object"))
}

fn required<'a>(obj: &'a Map<String, Value>, path: &str, key: &str) -> Result<&'a Value, ParseError> {
    obj.get(key)
        .ok_or_else(|| ParseError::new(path, format!("missing field `{key}`")))
}

fn allow_keys(obj: &Map<String, Value>, path: &str, keys: &[&str]) -> Result<(), ParseError> {
    match obj.keys().find(|k| !keys.contains(&k.as_str())) {
        Some(k) => Err(ParseError::new(path, format!("unknown field `{k}`"))),
        None => Ok(()),
    }
}

fn number(v: &Value, path: &str) -> Result<f64, ParseError> {
    v.as_f64()
        .filter(|x| x.is_finite())
        .ok_or_else(|| ParseError::new(path, "expected a finite number"))
}

fn usize_value(v: &Value, path: &str) -> Result<usize, ParseError> {
    v.as_u64()
        .map(|k| k as usize)
        .ok_or_else(|| ParseError::new(path, "expected a nonnegative integer"))
}

fn vector(v: &Value, path: &str, len: Option<usize>) -> Result<Vec<f64>, ParseError> {
    let arr = v.as_array().ok_or_else(|| ParseError::new(path, "expected an array of numbers"))?;
    if let Some(len) = len {
        if arr.len() != len {
            return Err(ParseError::new(path, format!("expected {len} entries, found {}", arr.len())));
        }
    }
    arr.iter()
        .enumerate()
        .map(|(i, x)| number(x, &format!("{path}[{i}]")))
        .collect()
}

fn vectors(v: &Value, path: &str, len: Option<usize>) -> Result<Vec<Vec<f64>>, ParseError> {
    let arr = v.as_array().ok_or_else(|| ParseError::new(path, "expected an array of vectors"))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| vector(x, &format!("{path}[{i}]"), len))
        .collect()
}

fn columns_to_matrix(rows: usize, cols: &[Vec<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols.len(), |i, j| cols[j][i])
}

/// A bound is `null` (unbounded), a number for every variable, or a list
/// with `null` entries for unbounded sides.
fn bounds(v: Option<&Value>, n: usize, free: f64, path: &str) -> Result<Vec<f64>, ParseError> {
    match v {
        None | Some(Value::Null) => Ok(vec![free; n]),
        Some(Value::Array(arr)) => {
            if arr.len() != n {
                return Err(ParseError::new(path, format!("expected {n} entries, found {}", arr.len())));
            }
            arr.iter()
                .enumerate()
                .map(|(i, x)| match x {
                    Value::Null => Ok(free),
                    x => number(x, &format!("{path}[{i}]")),
                })
                .collect()
        }
        Some(x) => Ok(vec![number(x, path)?; n]),
    }
}

fn expr_list(v: &Value, path: &str, n: usize) -> Result<Vec<Expr>, LoadError> {
    let arr = v
        .as_array()
        .ok_or_else(|| ParseError::new(path, "expected an array of expressions"))?;
    arr.iter()
        .enumerate()
        .map(|(i, e)| parse_expr(e, &format!("{path}[{i}]"), n))
        .collect()
}

/// Parses one prefix expression and checks its convexity node by node, so an
/// error names the innermost offending node.
pub fn parse_expr(v: &Value, path: &str, n: usize) -> Result<Expr, LoadError> {
    let e = build_expr(v, path, n)?;
    e.curvature().map_err(|err| ConvexityError::new(path, err.reason))?;
    Ok(e)
}

fn build_expr(v: &Value, path: &str, n: usize) -> Result<Expr, LoadError> {
    match v {
        Value::Number(_) => Ok(Expr::constant(number(v, path)?)),
        Value::String(s) => {
            let idx = s
                .strip_prefix('x')
                .and_then(|k| k.parse::<usize>().ok())
                .filter(|&k| (1..=n).contains(&k))
                .ok_or_else(|| {
                    ParseError::new(path, format!("`{s}` is not a variable name (x1 … x{n})"))
                })?;
            Ok(Expr::var(idx - 1))
        }
        Value::Array(items) => {
            let op = items
                .first()
                .and_then(Value::as_str)
                .ok_or_else(|| ParseError::new(path, "an operator node starts with the operator name"))?;
            let args = &items[1..];
            let arg = |i: usize| parse_expr(&args[i], &format!("{path}[{}]", i + 1), n);
            let all = || -> Result<Vec<Expr>, LoadError> { (0..args.len()).map(arg).collect() };
            let arity = |k: usize| -> Result<(), ParseError> {
                if args.len() == k {
                    Ok(())
                } else {
                    Err(ParseError::new(path, format!("`{op}` takes {k} argument(s), found {}", args.len())))
                }
            };
            let nonempty = || -> Result<(), ParseError> {
                if args.is_empty() {
                    Err(ParseError::new(path, format!("`{op}` needs at least one argument")))
                } else {
                    Ok(())
                }
            };
            Ok(match op {
                "+" => {
                    nonempty()?;
                    Expr::Sum(all()?)
                }
                "-" => match args.len() {
                    1 => -arg(0)?,
                    2 => arg(0)? - arg(1)?,
                    k => return Err(ParseError::new(path, format!("`-` takes 1 or 2 arguments, found {k}")).into()),
                },
                "*" => {
                    arity(2)?;
                    let (k, e) = if args[0].is_number() {
                        (number(&args[0], &format!("{path}[1]"))?, arg(1)?)
                    } else if args[1].is_number() {
                        (number(&args[1], &format!("{path}[2]"))?, arg(0)?)
                    } else {
                        return Err(ParseError::new(path, "`*` needs a number as one factor").into());
                    };
                    k * e
                }
                "affine" => {
                    arity(2)?;
                    let coeffs = vector(&args[0], &format!("{path}[1]"), None)?;
                    if coeffs.len() > n {
                        return Err(ParseError::new(
                            &format!("{path}[1]"),
                            format!("more than {n} coefficients"),
                        )
                        .into());
                    }
                    Expr::affine(coeffs, number(&args[1], &format!("{path}[2]"))?)
                }
                "square" => {
                    arity(1)?;
                    arg(0)?.square()
                }
                "pow" => {
                    arity(2)?;
                    let k = usize_value(&args[1], &format!("{path}[2]"))?;
                    let k = u32::try_from(k).map_err(|_| ParseError::new(&format!("{path}[2]"), "exponent too large"))?;
                    arg(0)?.pow(k)
                }
                "exp" => {
                    arity(1)?;
                    arg(0)?.exp()
                }
                "abs" => {
                    arity(1)?;
                    arg(0)?.abs()
                }
                "quad_form" => {
                    arity(2)?;
                    let rows = vectors(&args[0], &format!("{path}[1]"), None)?;
                    let inner = args[1]
                        .as_array()
                        .ok_or_else(|| ParseError::new(&format!("{path}[2]"), "expected a list of expressions"))?;
                    let k = inner.len();
                    if rows.len() != k || rows.iter().any(|r| r.len() != k) {
                        return Err(ParseError::new(
                            &format!("{path}[1]"),
                            format!("expected a {k}×{k} matrix"),
                        )
                        .into());
                    }
                    let exprs = inner
                        .iter()
                        .enumerate()
                        .map(|(i, e)| parse_expr(e, &format!("{path}[2][{i}]"), n))
                        .collect::<Result<Vec<_>, _>>()?;
                    Expr::quad_form(DMatrix::from_fn(k, k, |i, j| rows[i][j]), exprs)
                }
                "max" => {
                    nonempty()?;
                    Expr::max(all()?)
                }
                other => {
                    return Err(ConvexityError::new(
                        path,
                        format!("operator `{other}` is not in the convex whitelist"),
                    )
                    .into())
                }
            })
        }
        _ => Err(ParseError::new(path, "expected a number, a variable name or an operator array").into()),
    }
}
