//! Result bundles: the ε-solution, its polyhedra, run statistics and the
//! certification report as JSON, with CSV exports for tables and plots.

use std::fs;
use std::path::Path;

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{
    Approximation, BreakMode, CertificationReport, DualPoint, EpsilonSolution, Granularity, PointSource, PrimalPoint,
    RunConfig, RunStats, Variant,
};
use crate::polyhedral::{lex_cmp, HRep, HalfSpace, VRep};

#[derive(Debug, Error)]
pub enum BundleError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("{path}: inconsistent dimensions")]
    Shape { path: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalPointRecord {
    pub x: Vec<f64>,
    pub image: Vec<f64>,
    pub source: PointSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualPointRecord {
    pub t: Vec<f64>,
    pub value: Vec<f64>,
}

/// `normalᵀy ≥ offset`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfSpaceRecord {
    pub normal: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PolyhedronRecord {
    pub halfspaces: Vec<HalfSpaceRecord>,
    pub vertices: Vec<Vec<f64>>,
    pub rays: Vec<Vec<f64>>,
}

/// One row of the computational data tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsRow {
    pub epsilon: f64,
    #[serde(rename = "alg/variant")]
    pub algorithm: String,
    pub num_opt: usize,
    pub num_vert_enum: usize,
    #[serde(rename = "card_X")]
    pub card_x: usize,
    #[serde(rename = "card_T")]
    pub card_t: usize,
    pub time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    /// Problem name or path, informational.
    pub problem: Option<String>,
    pub config: RunConfig,
    pub complete: bool,
    #[serde(with = "super::ext_float")]
    pub achieved_epsilon: f64,
    pub primal_points: Vec<PrimalPointRecord>,
    pub dual_points: Vec<DualPointRecord>,
    pub inner_primal: PolyhedronRecord,
    pub outer_primal: PolyhedronRecord,
    pub inner_dual: PolyhedronRecord,
    pub outer_dual: PolyhedronRecord,
    pub stats: RunStats,
    pub stats_row: StatsRow,
    pub certification: Option<CertificationReport>,
}

fn vec_of(v: &DVector<f64>) -> Vec<f64> {
    v.iter().copied().collect()
}

fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

impl From<&Approximation> for PolyhedronRecord {
    fn from(a: &Approximation) -> Self {
        Self {
            halfspaces: a
                .hrep
                .halfspaces
                .iter()
                .map(|h| HalfSpaceRecord {
                    normal: vec_of(&h.normal),
                    offset: h.offset,
                })
                .collect(),
            vertices: a.vrep.vertices.iter().map(vec_of).collect(),
            rays: a.vrep.rays.iter().map(vec_of).collect(),
        }
    }
}

impl From<&PolyhedronRecord> for Approximation {
    fn from(r: &PolyhedronRecord) -> Self {
        Self {
            hrep: HRep::new(
                r.halfspaces
                    .iter()
                    .map(|h| HalfSpace::new(dvec(&h.normal), h.offset))
                    .collect(),
            ),
            vrep: VRep {
                vertices: r.vertices.iter().map(|v| dvec(v)).collect(),
                rays: r.rays.iter().map(|v| dvec(v)).collect(),
            },
        }
    }
}

/// Label such as `primal-fine-break`.
pub fn algorithm_label(cfg: &RunConfig) -> String {
    let v = match cfg.variant {
        Variant::Primal => "primal",
        Variant::Dual => "dual",
    };
    let g = match cfg.granularity {
        Granularity::Fine => "fine",
        Granularity::Alternative => "alt",
    };
    let b = match cfg.break_mode {
        BreakMode::Break => "break",
        BreakMode::NoBreak => "nobreak",
    };
    format!("{v}-{g}-{b}")
}

pub fn stats_row(sol: &EpsilonSolution) -> StatsRow {
    StatsRow {
        epsilon: sol.config.epsilon,
        algorithm: algorithm_label(&sol.config),
        num_opt: sol.stats.num_scalar_solves,
        num_vert_enum: sol.stats.num_vertex_enumerations,
        card_x: sol.primal_points.len(),
        card_t: sol.dual_points.len(),
        time_s: sol.stats.wall_time,
    }
}

impl ResultBundle {
    pub fn from_solution(
        sol: &EpsilonSolution,
        problem: Option<String>,
        certification: Option<CertificationReport>,
    ) -> Self {
        Self {
            problem,
            config: sol.config.clone(),
            complete: sol.complete,
            achieved_epsilon: sol.achieved_epsilon,
            primal_points: sol
                .primal_points
                .iter()
                .map(|p| PrimalPointRecord {
                    x: vec_of(&p.x),
                    image: vec_of(&p.image),
                    source: p.source,
                })
                .collect(),
            dual_points: sol
                .dual_points
                .iter()
                .map(|p| DualPointRecord {
                    t: vec_of(&p.t),
                    value: vec_of(&p.value),
                })
                .collect(),
            inner_primal: (&sol.inner_primal).into(),
            outer_primal: (&sol.outer_primal).into(),
            inner_dual: (&sol.inner_dual).into(),
            outer_dual: (&sol.outer_dual).into(),
            stats: sol.stats.clone(),
            stats_row: stats_row(sol),
            certification,
        }
    }

    /// The stored ε-solution, without the iteration trace.
    pub fn to_solution(&self) -> EpsilonSolution {
        EpsilonSolution {
            config: self.config.clone(),
            primal_points: self
                .primal_points
                .iter()
                .map(|p| PrimalPoint {
                    x: dvec(&p.x),
                    image: dvec(&p.image),
                    source: p.source,
                })
                .collect(),
            dual_points: self
                .dual_points
                .iter()
                .map(|p| DualPoint {
                    t: dvec(&p.t),
                    value: dvec(&p.value),
                })
                .collect(),
            inner_primal: (&self.inner_primal).into(),
            outer_primal: (&self.outer_primal).into(),
            inner_dual: (&self.inner_dual).into(),
            outer_dual: (&self.outer_dual).into(),
            stats: self.stats.clone(),
            achieved_epsilon: self.achieved_epsilon,
            complete: self.complete,
            trace: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self, BundleError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|source| BundleError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text).map_err(|source| BundleError::Json {
            path: path.display().to_string(),
            source,
        })
    }

    /// Writes `solution.json`, `stats.csv`, the H- and V-representations
    /// of the four polyhedra and the plot files into `dir`.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<(), BundleError> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|source| BundleError::Io {
            path: dir.display().to_string(),
            source,
        })?;
        let json = dir.join("solution.json");
        fs::write(&json, self.to_json()).map_err(|source| BundleError::Io {
            path: json.display().to_string(),
            source,
        })?;

        let stats = dir.join("stats.csv");
        let mut w = csv_writer(&stats)?;
        w.serialize(&self.stats_row).map_err(|e| csv_err(&stats, e))?;
        w.flush().map_err(|source| BundleError::Io {
            path: stats.display().to_string(),
            source,
        })?;

        for (name, poly) in [
            ("inner_primal", &self.inner_primal),
            ("outer_primal", &self.outer_primal),
            ("inner_dual", &self.inner_dual),
            ("outer_dual", &self.outer_dual),
        ] {
            write_hrep(&dir.join(format!("{name}.hrep.csv")), poly)?;
            write_vrep(&dir.join(format!("{name}.vrep.csv")), poly)?;
        }

        let q = self.config_dim();
        let c = self.cone_direction(q);
        write_plot(
            &dir.join("plot_primal.csv"),
            q,
            &[("outer", &self.outer_primal), ("inner", &self.inner_primal)],
            &c,
        )?;
        let mut e_q = vec![0.0; q];
        if q > 0 {
            e_q[q - 1] = 1.0;
        }
        write_plot(
            &dir.join("plot_dual.csv"),
            q,
            &[("outer", &self.outer_dual), ("inner", &self.inner_dual)],
            &e_q,
        )
    }

    fn config_dim(&self) -> usize {
        self.primal_points
            .first()
            .map(|p| p.image.len())
            .or_else(|| self.dual_points.first().map(|p| p.t.len()))
            .or_else(|| self.outer_primal.halfspaces.first().map(|h| h.normal.len()))
            .unwrap_or(0)
    }

    /// Direction along which the upper image boundary is a graph: the
    /// average of the recession directions of the inner approximation.
    fn cone_direction(&self, q: usize) -> Vec<f64> {
        let mut d = vec![0.0; q];
        for r in &self.inner_primal.rays {
            for (di, ri) in d.iter_mut().zip(r) {
                *di += ri;
            }
        }
        if d.iter().all(|x| *x == 0.0) {
            d = vec![1.0; q];
        }
        d
    }
}

fn csv_err(path: &Path, source: csv::Error) -> BundleError {
    BundleError::Csv {
        path: path.display().to_string(),
        source,
    }
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, BundleError> {
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn coord_headers(prefix: &str, q: usize) -> Vec<String> {
    (1..=q).map(|i| format!("{prefix}{i}")).collect()
}

fn write_rows(path: &Path, header: Vec<String>, rows: Vec<Vec<String>>) -> Result<(), BundleError> {
    let mut w = csv_writer(path)?;
    w.write_record(&header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|source| BundleError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn dim_of(poly: &PolyhedronRecord) -> usize {
    poly.halfspaces
        .first()
        .map(|h| h.normal.len())
        .or_else(|| poly.vertices.first().map(Vec::len))
        .unwrap_or(0)
}

/// Columns `a1 … aq, b` for `aᵀy ≥ b`.
fn write_hrep(path: &Path, poly: &PolyhedronRecord) -> Result<(), BundleError> {
    let mut header = coord_headers("a", dim_of(poly));
    header.push("b".into());
    let rows = poly
        .halfspaces
        .iter()
        .map(|h| {
            h.normal
                .iter()
                .chain(std::iter::once(&h.offset))
                .map(|x| x.to_string())
                .collect()
        })
        .collect();
    write_rows(path, header, rows)
}

/// Columns `kind, y1 … yq` with `kind` either `vertex` or `ray`.
fn write_vrep(path: &Path, poly: &PolyhedronRecord) -> Result<(), BundleError> {
    let mut header = vec!["kind".to_string()];
    header.extend(coord_headers("y", dim_of(poly)));
    let row = |kind: &str, v: &Vec<f64>| {
        std::iter::once(kind.to_string())
            .chain(v.iter().map(|x| x.to_string()))
            .collect::<Vec<_>>()
    };
    let rows = poly
        .vertices
        .iter()
        .map(|v| row("vertex", v))
        .chain(poly.rays.iter().map(|r| row("ray", r)))
        .collect();
    write_rows(path, header, rows)
}

/// Reads a `*.vrep.csv` file back into vertices and rays.
pub fn read_vrep_csv(path: impl AsRef<Path>) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>), BundleError> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    let (mut vertices, mut rays) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec.map_err(|e| csv_err(path, e))?;
        let coords = rec
            .iter()
            .skip(1)
            .map(|s| s.parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| BundleError::Shape {
                path: path.display().to_string(),
            })?;
        match rec.get(0) {
            Some("vertex") => vertices.push(coords),
            Some("ray") => rays.push(coords),
            _ => {
                return Err(BundleError::Shape {
                    path: path.display().to_string(),
                })
            }
        }
    }
    Ok((vertices, rays))
}

/// Vertex polylines: in two dimensions one chain per set ordered across
/// `dir`; in three dimensions one closed polygon per facet.
fn write_plot(
    path: &Path,
    q: usize,
    sets: &[(&str, &PolyhedronRecord)],
    dir: &[f64],
) -> Result<(), BundleError> {
    let mut header = vec!["set".to_string(), "facet".into(), "order".into()];
    header.extend(coord_headers("y", q));
    let mut rows = Vec::new();
    let mut push = |set: &str, facet: usize, order: usize, v: &[f64]| {
        let mut r = vec![set.to_string(), facet.to_string(), order.to_string()];
        r.extend(v.iter().map(|x| x.to_string()));
        rows.push(r);
    };
    for (name, poly) in sets {
        match q {
            2 => {
                // Coordinate along a direction orthogonal to `dir`.
                let key = |v: &Vec<f64>| v[0] * dir[1] - v[1] * dir[0];
                let mut vs: Vec<&Vec<f64>> = poly.vertices.iter().collect();
                vs.sort_by(|a, b| key(a).total_cmp(&key(b)));
                for (k, v) in vs.into_iter().enumerate() {
                    push(name, 0, k, v);
                }
            }
            3 => {
                for (f, h) in poly.halfspaces.iter().enumerate() {
                    for (k, v) in facet_polygon(h, &poly.vertices).into_iter().enumerate() {
                        push(name, f, k, v);
                    }
                }
            }
            _ => {
                let mut vs: Vec<DVector<f64>> = poly.vertices.iter().map(|v| dvec(v)).collect();
                vs.sort_by(lex_cmp);
                for (k, v) in vs.iter().enumerate() {
                    push(name, 0, k, v.as_slice());
                }
            }
        }
    }
    write_rows(path, header, rows)
}

/// Vertices tight at `h`, ordered by angle around their centroid.
fn facet_polygon<'a>(h: &HalfSpaceRecord, vertices: &'a [Vec<f64>]) -> Vec<&'a Vec<f64>> {
    let n = Vector3::new(h.normal[0], h.normal[1], h.normal[2]);
    let norm = n.norm();
    if norm == 0.0 {
        return Vec::new();
    }
    let n = n / norm;
    let tight: Vec<&Vec<f64>> = vertices
        .iter()
        .filter(|v| {
            let y = Vector3::new(v[0], v[1], v[2]);
            (n.dot(&y) - h.offset / norm).abs() <= 1e-7 * 1f64.max(y.amax())
        })
        .collect();
    if tight.len() < 3 {
        return tight;
    }
    let centroid = tight.iter().fold(Vector3::zeros(), |acc, v| acc + Vector3::new(v[0], v[1], v[2]))
        / tight.len() as f64;
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = n.cross(&helper).normalize();
    let w = n.cross(&u);
    let mut keyed: Vec<(f64, &Vec<f64>)> = tight
        .into_iter()
        .map(|v| {
            let d = Vector3::new(v[0], v[1], v[2]) - centroid;
            (d.dot(&w).atan2(d.dot(&u)), v)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    keyed.into_iter().map(|(_, v)| v).collect()
}
