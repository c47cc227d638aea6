//! Double description for pointed polyhedral cones `{x : rᵢᵀx ≥ 0}`.
//!
//! Rows are inserted one at a time; extreme rays carry their incidence sets
//! so adjacency is decided combinatorially.

use fixedbitset::FixedBitSet;
use nalgebra::DMatrix;

#[derive(Debug, Clone)]
pub(crate) struct Ray {
    pub v: Vec<f64>,
    pub zeros: FixedBitSet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) struct NotPointed;

#[derive(Debug, Clone)]
pub(crate) struct Cone {
    dim: usize,
    rows: Vec<Vec<f64>>,
    rays: Vec<Ray>,
    pending: Vec<usize>,
    initialized: bool,
    tol: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = dot(v, v).sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

impl Cone {
    pub fn new(dim: usize, tol: f64) -> Self {
        Self {
            dim,
            rows: Vec::new(),
            rays: Vec::new(),
            pending: Vec::new(),
            initialized: false,
            tol,
        }
    }

    pub fn add_row(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.dim);
        let mut r = row.to_vec();
        normalize(&mut r);
        self.pending.push(self.rows.len());
        self.rows.push(r);
    }

    pub fn rays(&self) -> &[Ray] {
        &self.rays
    }

    /// Processes all pending rows.
    pub fn update(&mut self) -> Result<(), NotPointed> {
        if !self.initialized {
            self.initialize()?;
        }
        let n = self.rows.len();
        for r in &mut self.rays {
            r.zeros.grow(n);
        }
        let pending = std::mem::take(&mut self.pending);
        for k in pending {
            self.insert(k);
        }
        Ok(())
    }

    fn initialize(&mut self) -> Result<(), NotPointed> {
        let d = self.dim;
        let mut basis: Vec<usize> = Vec::with_capacity(d);
        let mut ortho: Vec<Vec<f64>> = Vec::with_capacity(d);
        for &i in &self.pending {
            if basis.len() == d {
                break;
            }
            let mut res = self.rows[i].clone();
            for q in &ortho {
                let c = dot(&res, q);
                res.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
            if normalize(&mut res) > 1e-9 {
                ortho.push(res);
                basis.push(i);
            }
        }
        if basis.len() < d {
            return Err(NotPointed);
        }
        let b = DMatrix::from_fn(d, d, |i, j| self.rows[basis[i]][j]);
        let inv = b.try_inverse().ok_or(NotPointed)?;
        let n = self.rows.len();
        self.rays = (0..d)
            .map(|j| {
                let mut v: Vec<f64> = (0..d).map(|i| inv[(i, j)]).collect();
                normalize(&mut v);
                let mut zeros = FixedBitSet::with_capacity(n);
                for (i, &bi) in basis.iter().enumerate() {
                    if i != j {
                        zeros.insert(bi);
                    }
                }
                Ray { v, zeros }
            })
            .collect();
        self.pending.retain(|i| !basis.contains(i));
        self.initialized = true;
        Ok(())
    }

    fn insert(&mut self, k: usize) {
        let row = &self.rows[k];
        let vals: Vec<f64> = self.rays.iter().map(|r| dot(row, &r.v)).collect();
        let tol = self.tol;
        let neg: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] < -tol).collect();
        if neg.is_empty() {
            for (r, &v) in self.rays.iter_mut().zip(&vals) {
                if v.abs() <= tol {
                    r.zeros.insert(k);
                }
            }
            return;
        }
        let pos: Vec<usize> = (0..vals.len()).filter(|&i| vals[i] > tol).collect();
        let need = self.dim.saturating_sub(2);
        let mut created = Vec::new();
        for &p in &pos {
            for &q in &neg {
                let mut common = self.rays[p].zeros.clone();
                common.intersect_with(&self.rays[q].zeros);
                if common.count_ones(..) < need {
                    continue;
                }
                let adjacent = self
                    .rays
                    .iter()
                    .enumerate()
                    .all(|(i, r)| i == p || i == q || !common.is_subset(&r.zeros));
                if !adjacent {
                    continue;
                }
                let (a, b) = (vals[p], -vals[q]);
                let mut v: Vec<f64> = self.rays[q]
                    .v
                    .iter()
                    .zip(&self.rays[p].v)
                    .map(|(x, y)| a * x + b * y)
                    .collect();
                if normalize(&mut v) <= 0.0 {
                    continue;
                }
                common.insert(k);
                created.push(Ray { v, zeros: common });
            }
        }
        let old = std::mem::take(&mut self.rays);
        for (i, mut r) in old.into_iter().enumerate() {
            if vals[i] < -tol {
                continue;
            }
            if vals[i] <= tol {
                r.zeros.insert(k);
            }
            self.rays.push(r);
        }
        self.rays.extend(created);
    }
}

/// Generators of `{x : rᵢᵀx ≥ 0}` for cones that may contain a linear
/// subspace: extreme rays of the pointed part plus a basis of the lineality.
pub(crate) fn cone_generators(
    rows: &[Vec<f64>],
    dim: usize,
    tol: f64,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    if rows.is_empty() {
        let basis = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        return (Vec::new(), basis);
    }
    let m = DMatrix::from_fn(rows.len(), dim, |i, j| rows[i][j]);
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested V");
    let smax = svd.singular_values.max();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let rank = order
        .iter()
        .filter(|&&i| svd.singular_values[i] > 1e-10 * smax.max(1e-300))
        .count();
    if rank == dim {
        let mut cone = Cone::new(dim, tol);
        for r in rows {
            cone.add_row(r);
        }
        return match cone.update() {
            Ok(()) => (cone.rays.into_iter().map(|r| r.v).collect(), Vec::new()),
            Err(NotPointed) => (Vec::new(), Vec::new()),
        };
    }
    // Complete the row space basis to all of ℝ^dim to get the lineality.
    let span: Vec<Vec<f64>> = order[..rank]
        .iter()
        .map(|&i| vt.row(i).iter().copied().collect())
        .collect();
    let mut lineality: Vec<Vec<f64>> = Vec::new();
    for e in 0..dim {
        let mut v: Vec<f64> = (0..dim).map(|j| if j == e { 1.0 } else { 0.0 }).collect();
        for b in span.iter().chain(lineality.iter()) {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        if normalize(&mut v) > 1e-6 && lineality.len() < dim - rank {
            lineality.push(v);
        }
    }
    if rank == 0 {
        return (Vec::new(), lineality);
    }
    let mut cone = Cone::new(rank, tol);
    for r in rows {
        let proj: Vec<f64> = span.iter().map(|b| dot(r, b)).collect();
        if dot(&proj, &proj).sqrt() > 0.0 {
            cone.add_row(&proj);
        }
    }
    let rays = match cone.update() {
        Ok(()) => cone
            .rays
            .into_iter()
            .map(|r| {
                let mut x = vec![0.0; dim];
                for (u, b) in r.v.iter().zip(&span) {
                    x.iter_mut().zip(b).for_each(|(xi, bi)| *xi += u * bi);
                }
                x
            })
            .collect(),
        Err(NotPointed) => Vec::new(),
    };
    (rays, lineality)
}
