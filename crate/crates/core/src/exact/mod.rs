//! Exact enumeration of the Ising, FK, random-current and Bernoulli laws on
//! small networks, and exact checks of the identities relating them.

mod dist;
mod identities;
mod measures;
pub mod ising;

use serde::{Deserialize, Serialize};

pub use dist::{FiniteDistribution, Space, SpaceKind};
pub use identities::{
    color_clusters_exact, reconstruct_trace_law, sign_assignment_count, superpose_max,
    superpose_max_with, tv_distance, SuperposeRoute,
};
pub use measures::{
    bernoulli_probabilities, exact_measure, fk_open_probabilities, parity_weights,
    partition_functions, trace_from_parity, two_point_exact, PartitionFunctions,
};

/// Per-edge parity class of a current: 0 (zero), 1 (odd) or 2 (positive
/// even).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParityClass(pub Vec<u8>);

/// Largest spin table (2^20).
pub const MAX_SPIN_CONFIGS: usize = 1 << 20;
/// Largest edge-configuration table (2^20).
pub const MAX_EDGE_CONFIGS: usize = 1 << 20;
/// Largest parity-class table (3^13).
pub const MAX_PARITY_CONFIGS: usize = 1_594_323;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    Ising,
    #[serde(rename = "FK")]
    Fk,
    CurrentParity,
    CurrentTrace,
    Bernoulli,
}

impl ModelKind {
    pub fn space(self, vertices: usize, edges: usize) -> Space {
        match self {
            ModelKind::Ising => Space::spins(vertices),
            ModelKind::CurrentParity => Space::parity(edges),
            ModelKind::Fk | ModelKind::CurrentTrace | ModelKind::Bernoulli => Space::edges(edges),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelKind::Ising => "Ising",
            ModelKind::Fk => "FK",
            ModelKind::CurrentParity => "CurrentParity",
            ModelKind::CurrentTrace => "CurrentTrace",
            ModelKind::Bernoulli => "Bernoulli",
        };
        f.write_str(s)
    }
}

pub(crate) fn check_capacity(what: &'static str, radix: usize, dims: usize, limit: usize) -> crate::error::Result<usize> {
    let needed = (radix as f64).powi(dims as i32);
    if needed > limit as f64 {
        return Err(crate::error::LabError::Capacity {
            what,
            needed,
            limit: limit as f64,
        });
    }
    Ok(needed as usize)
}
