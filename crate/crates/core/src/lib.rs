//! Primal and dual Benson-type outer approximation for convex vector
//! optimization problems.

pub mod duality;
pub mod engine;
pub mod io;
pub mod model;
pub mod polyhedral;
pub mod scalarization;
pub mod solver;
pub mod tol;

pub use tol::Tolerances;
