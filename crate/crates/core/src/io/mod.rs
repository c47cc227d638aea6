//! Problem files and result bundles.

mod bundle;
pub mod ext_float;
mod problem;

pub use bundle::{
    algorithm_label, read_vrep_csv, stats_row, BundleError, DualPointRecord, HalfSpaceRecord, PolyhedronRecord,
    PrimalPointRecord, ResultBundle, StatsRow,
};
pub use problem::{load_problem, parse_expr, parse_problem, LoadError, ParseError};
