//! Exact and Monte Carlo verification of the couplings between the Ising
//! model, random currents, FK-Ising percolation, the discrete Gaussian free
//! field and random-walk loop soups on finite weighted graphs.

pub mod error;
pub mod exact;
pub mod gff;
pub mod graph;
pub mod harness;
pub mod loopsoup;
pub mod sampling;
pub mod sum;
pub mod vrjp;

pub use error::{LabError, Result};
pub use graph::{
    components, cyclomatic_number, incidence_parity_check, Clusters, EdgeConfig, EdgeValues,
    Network, NetworkSpec, Pinning, SignedEdgeConfig, SpinConfig,
};
