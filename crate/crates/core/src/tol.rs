use serde::{Deserialize, Serialize};

/// Geometric tolerances shared by the polyhedral kernel and the engines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Norms below this count as zero.
    pub zero: f64,
    /// Allowed constraint violation when testing membership.
    pub feas: f64,
    /// Points or halfspaces closer than this are merged.
    pub dup: f64,
    /// A halfspace is tight at a generator when the slack is below this.
    pub support: f64,
    /// Solution points whose images are closer than this are merged.
    pub merge: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            zero: 1e-12,
            feas: 1e-8,
            dup: 1e-9,
            support: 1e-7,
            merge: 1e-6,
        }
    }
}
