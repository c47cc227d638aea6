//! Polyhedra in H- and V-representation.
//!
//! Halfspaces are written `{y : aᵀy ≥ b}`. Vertex enumeration homogenizes to
//! the cone `{(y, λ) : aᵀy − bλ ≥ 0, λ ≥ 0}` and runs double description on it,
//! so cuts added after an enumeration are processed incrementally.

mod dd;

use fixedbitset::FixedBitSet;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::tol::Tolerances;
use dd::{Cone, NotPointed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum PolyError {
    #[error("polyhedron contains a line")]
    Line,
    #[error("polyhedron is empty")]
    Empty,
    #[error("halfspace normal is numerically zero")]
    ZeroNormal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HalfSpace {
    pub normal: DVector<f64>,
    pub offset: f64,
}

impl HalfSpace {
    pub fn new(normal: DVector<f64>, offset: f64) -> Self {
        Self { normal, offset }
    }

    /// Scaled copy with a unit normal, `None` when the normal vanishes.
    pub fn normalized(&self, tol_zero: f64) -> Option<Self> {
        let n = self.normal.norm();
        (n > tol_zero).then(|| Self {
            normal: &self.normal / n,
            offset: self.offset / n,
        })
    }

    /// Signed distance of `y` to the boundary, positive inside.
    pub fn slack(&self, y: &DVector<f64>) -> f64 {
        (self.normal.dot(y) - self.offset) / self.normal.norm()
    }

    pub fn dim(&self) -> usize {
        self.normal.len()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HRep {
    pub halfspaces: Vec<HalfSpace>,
}

impl HRep {
    pub fn new(halfspaces: Vec<HalfSpace>) -> Self {
        Self { halfspaces }
    }

    /// Smallest normalized slack over all halfspaces (`+∞` when empty).
    pub fn min_slack(&self, y: &DVector<f64>) -> f64 {
        self.halfspaces
            .iter()
            .map(|h| h.slack(y))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, y: &DVector<f64>, tol: f64) -> bool {
        self.min_slack(y) >= -tol
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct VRep {
    pub vertices: Vec<DVector<f64>>,
    pub rays: Vec<DVector<f64>>,
}

/// Lexicographic order on coordinates.
pub fn lex_cmp(a: &DVector<f64>, b: &DVector<f64>) -> std::cmp::Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match x.total_cmp(y) {
            std::cmp::Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

fn close(a: &DVector<f64>, b: &DVector<f64>, tol: f64) -> bool {
    let scale = 1.0f64.max(a.amax()).max(b.amax());
    (a - b).amax() <= tol * scale
}

/// A polyhedron that keeps its H-representation and, lazily, its vertices.
#[derive(Debug, Clone)]
pub struct Polyhedron {
    dim: usize,
    hrep: HRep,
    vrep: Option<VRep>,
    dirty: bool,
    cone: Option<Cone>,
    tol: Tolerances,
    merged: usize,
}

impl Polyhedron {
    pub fn new(dim: usize, tol: Tolerances) -> Self {
        Self {
            dim,
            hrep: HRep::default(),
            vrep: None,
            dirty: true,
            cone: None,
            tol,
            merged: 0,
        }
    }

    pub fn from_hrep(dim: usize, hrep: HRep, tol: Tolerances) -> Self {
        let mut p = Self::new(dim, tol);
        for h in hrep.halfspaces {
            p.add_halfspace(h);
        }
        p
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn hrep(&self) -> &HRep {
        &self.hrep
    }

    pub fn is_dirty(&self) -> bool {
        self.dirty
    }

    /// Cached V-representation, if it is current.
    pub fn vrep(&self) -> Option<&VRep> {
        if self.dirty {
            None
        } else {
            self.vrep.as_ref()
        }
    }

    /// Number of vertex pairs merged as numerical duplicates so far.
    pub fn merged_vertices(&self) -> usize {
        self.merged
    }

    /// Appends `h` unless an equal halfspace is already present.
    /// Returns whether the halfspace was added.
    pub fn add_halfspace(&mut self, h: HalfSpace) -> bool {
        assert_eq!(h.dim(), self.dim, "halfspace dimension mismatch");
        let Some(hn) = h.normalized(self.tol.zero) else {
            return false;
        };
        let dup = self.hrep.halfspaces.iter().any(|g| {
            let gn = g.normalized(self.tol.zero).expect("stored normals are non-zero");
            (gn.normal - &hn.normal).amax() <= self.tol.dup
                && (gn.offset - hn.offset).abs() <= self.tol.dup * 1f64.max(hn.offset.abs())
        });
        if dup {
            return false;
        }
        if let Some(cone) = self.cone.as_mut() {
            cone.add_row(&homogenized_row(&hn));
        }
        self.hrep.halfspaces.push(h);
        self.dirty = true;
        true
    }

    /// Vertices and extreme rays, updated incrementally after insertions.
    pub fn enumerate(&mut self) -> Result<&VRep, PolyError> {
        if !self.dirty {
            if let Some(ref v) = self.vrep {
                return Ok(v);
            }
        }
        if self.cone.is_none() {
            let mut cone = Cone::new(self.dim + 1, self.tol.dup);
            let mut lambda = vec![0.0; self.dim + 1];
            lambda[self.dim] = 1.0;
            cone.add_row(&lambda);
            for h in &self.hrep.halfspaces {
                let hn = h.normalized(self.tol.zero).ok_or(PolyError::ZeroNormal)?;
                cone.add_row(&homogenized_row(&hn));
            }
            self.cone = Some(cone);
        }
        let cone = self.cone.as_mut().expect("cone was just built");
        if let Err(NotPointed) = cone.update() {
            self.cone = None;
            return Err(PolyError::Line);
        }
        let (vrep, merged) = extract_vrep(cone, self.dim, self.tol);
        if vrep.vertices.is_empty() {
            return Err(PolyError::Empty);
        }
        self.merged += merged;
        self.vrep = Some(vrep);
        self.dirty = false;
        Ok(self.vrep.as_ref().expect("just stored"))
    }
}

fn homogenized_row(h: &HalfSpace) -> Vec<f64> {
    let mut r: Vec<f64> = h.normal.iter().copied().collect();
    r.push(-h.offset);
    r
}

fn extract_vrep(cone: &Cone, dim: usize, tol: Tolerances) -> (VRep, usize) {
    let mut vertices: Vec<DVector<f64>> = Vec::new();
    let mut rays: Vec<DVector<f64>> = Vec::new();
    let mut merged = 0;
    for r in cone.rays() {
        let lambda = r.v[dim];
        let y = DVector::from_iterator(dim, r.v[..dim].iter().copied());
        if lambda > tol.zero {
            let p = y / lambda;
            if vertices.iter().any(|v| close(v, &p, tol.dup)) {
                merged += 1;
            } else {
                vertices.push(p);
            }
        } else {
            let n = y.norm();
            if n <= tol.zero {
                continue;
            }
            let d = y / n;
            if !rays.iter().any(|e| close(e, &d, tol.dup)) {
                rays.push(d);
            }
        }
    }
    vertices.sort_by(lex_cmp);
    rays.sort_by(lex_cmp);
    (VRep { vertices, rays }, merged)
}

/// Vertices and extreme rays of `{y : aᵢᵀy ≥ bᵢ}`.
pub fn enumerate_vertices(dim: usize, hrep: &HRep, tol: Tolerances) -> Result<VRep, PolyError> {
    let mut p = Polyhedron::from_hrep(dim, hrep.clone(), tol);
    p.enumerate().cloned()
}

/// Extreme rays of the pointed cone `{x : gᵢᵀx ≥ 0}`, unit length.
pub fn cone_extreme_rays(normals: &[DVector<f64>], dim: usize) -> Result<Vec<DVector<f64>>, PolyError> {
    let rows: Vec<Vec<f64>> = normals
        .iter()
        .map(|g| {
            let n = g.norm();
            g.iter().map(|x| x / n).collect()
        })
        .collect();
    let (rays, lineality) = dd::cone_generators(&rows, dim, 1e-10);
    if !lineality.is_empty() {
        return Err(PolyError::Line);
    }
    if rays.is_empty() {
        return Err(PolyError::Empty);
    }
    let mut out: Vec<DVector<f64>> = rays.into_iter().map(DVector::from_vec).collect();
    out.sort_by(lex_cmp);
    Ok(out)
}

/// Numerical rank of a set of vectors, relative to their largest singular value.
pub fn numerical_rank(vectors: &[DVector<f64>], dim: usize, rel_tol: f64) -> usize {
    if vectors.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(vectors.len(), dim, |i, j| vectors[i][j]);
    let sv = m.singular_values();
    let smax = sv.max();
    if smax <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * smax.max(1.0)).count()
}

/// Drops every halfspace that does not define a facet of the polyhedron
/// described by the consistent pair `(hrep, vrep)`.
pub fn remove_redundant(dim: usize, hrep: &HRep, vrep: &VRep, tol: Tolerances) -> HRep {
    let mut kept: Vec<HalfSpace> = Vec::new();
    for h in &hrep.halfspaces {
        let Some(hn) = h.normalized(tol.zero) else {
            continue;
        };
        let scale = |v: &DVector<f64>| tol.support * 1f64.max(v.amax());
        let tight_v: Vec<&DVector<f64>> = vrep
            .vertices
            .iter()
            .filter(|v| (hn.normal.dot(v) - hn.offset).abs() <= scale(v))
            .collect();
        let Some(v0) = tight_v.first() else {
            continue;
        };
        let mut dirs: Vec<DVector<f64>> = tight_v[1..].iter().map(|v| *v - *v0).collect();
        dirs.extend(
            vrep.rays
                .iter()
                .filter(|r| hn.normal.dot(r).abs() <= tol.support)
                .cloned(),
        );
        if numerical_rank(&dirs, dim, 1e-9) + 1 < dim {
            continue;
        }
        let dup = kept.iter().any(|g| {
            let gn = g.normalized(tol.zero).expect("kept normals are non-zero");
            (gn.normal - &hn.normal).amax() <= tol.support
                && (gn.offset - hn.offset).abs() <= tol.support * 1f64.max(hn.offset.abs())
        });
        if !dup {
            kept.push(h.clone());
        }
    }
    HRep::new(kept)
}

/// Facet description of `conv(vertices) + cone(rays)`. Lower-dimensional
/// inputs produce pairs of opposite halfspaces for the affine hull.
pub fn hrep_from_vrep(dim: usize, vrep: &VRep, tol: Tolerances) -> HRep {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for v in &vrep.vertices {
        let mut r: Vec<f64> = v.iter().copied().collect();
        r.push(-1.0);
        rows.push(r);
    }
    for d in &vrep.rays {
        let mut r: Vec<f64> = d.iter().copied().collect();
        r.push(0.0);
        rows.push(r);
    }
    for r in &mut rows {
        let n = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        r.iter_mut().for_each(|x| *x /= n);
    }
    let (rays, lineality) = dd::cone_generators(&rows, dim + 1, tol.dup);
    let halfspace = |g: &[f64]| HalfSpace::new(DVector::from_column_slice(&g[..dim]), g[dim]).normalized(1e-9);
    let mut out = Vec::new();
    for g in &lineality {
        let neg: Vec<f64> = g.iter().map(|x| -x).collect();
        out.extend(halfspace(g));
        out.extend(halfspace(&neg));
    }
    // Degenerate vertex sets can yield numerical copies of one facet; a copy
    // is tight at the same generators.
    let tight = |h: &HalfSpace| -> FixedBitSet {
        let mut bits = FixedBitSet::with_capacity(vrep.vertices.len() + vrep.rays.len());
        for (i, v) in vrep.vertices.iter().enumerate() {
            bits.set(i, h.slack(v).abs() <= tol.support * 1f64.max(v.amax()));
        }
        for (i, d) in vrep.rays.iter().enumerate() {
            bits.set(vrep.vertices.len() + i, h.normal.dot(d).abs() <= tol.support * d.amax());
        }
        bits
    };
    let mut seen: Vec<FixedBitSet> = Vec::new();
    for h in rays.iter().filter_map(|g| halfspace(g)) {
        let bits = tight(&h);
        if !seen.contains(&bits) {
            out.push(refit(&h, &bits, vrep, dim));
            seen.push(bits);
        }
    }
    HRep::new(out)
}

/// The halfspace through the generators marked in `tight`, oriented like `h`.
fn refit(h: &HalfSpace, tight: &FixedBitSet, vrep: &VRep, dim: usize) -> HalfSpace {
    let nv = vrep.vertices.len();
    let rows: Vec<Vec<f64>> = tight
        .ones()
        .map(|i| {
            let (g, last) = if i < nv { (&vrep.vertices[i], -1.0) } else { (&vrep.rays[i - nv], 0.0) };
            let s = g.amax().max(1.0);
            g.iter().map(|x| x / s).chain(std::iter::once(last / s)).collect()
        })
        .collect();
    if rows.len() < dim {
        return h.clone();
    }
    // Zero rows make the matrix square, so the SVD returns a full basis.
    let m = DMatrix::from_fn(rows.len().max(dim + 1), dim + 1, |i, j| rows.get(i).map_or(0.0, |r| r[j]));
    let svd = m.svd(false, true);
    let v_t = svd.v_t.expect("right singular vectors requested");
    let k = svd.singular_values.imin();
    let mut g = v_t.row(k).transpose();
    let current = DVector::from_iterator(dim + 1, h.normal.iter().copied().chain(std::iter::once(h.offset)));
    if g.dot(&current) < 0.0 {
        g = -g;
    }
    HalfSpace::new(g.rows(0, dim).clone_owned(), g[dim])
        .normalized(1e-9)
        .unwrap_or_else(|| h.clone())
}
