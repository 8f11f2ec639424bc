//! Single-site heat-bath dynamics for the Ising model and the Edwards–Sokal
//! maps between spins and FK edges.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{components, Clusters, EdgeConfig, Network, SpinConfig};

use super::LabRng;

/// Burn-in and thinning, in sweeps. `None` means the default: 1000·|X|
/// sweeps of burn-in and |X| sweeps between draws.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainParams {
    pub burn_in_sweeps: Option<usize>,
    pub thin_sweeps: Option<usize>,
}

impl ChainParams {
    pub fn resolve(&self, vertices: usize) -> (usize, usize) {
        (
            self.burn_in_sweeps.unwrap_or(1000 * vertices),
            self.thin_sweeps.unwrap_or(vertices).max(1),
        )
    }
}

#[derive(Debug, Clone)]
pub struct IsingChain {
    /// Non-loop neighbours with coupling, per vertex.
    neighbours: Vec<Vec<(usize, f64)>>,
    spins: Vec<i8>,
    thin: usize,
}

impl IsingChain {
    /// Uniform random start followed by the burn-in.
    pub fn new(net: &Network, params: ChainParams, rng: &mut LabRng) -> Self {
        let n = net.vertex_count();
        let mut neighbours = vec![Vec::new(); n];
        for (e, &(u, v)) in net.edges().iter().enumerate() {
            let b = net.beta()[e];
            if u != v && b > 0.0 {
                neighbours[u].push((v, b));
                neighbours[v].push((u, b));
            }
        }
        let spins = (0..n).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        let (burn_in, thin) = params.resolve(n);
        let mut chain = IsingChain {
            neighbours,
            spins,
            thin,
        };
        for _ in 0..burn_in {
            chain.sweep(rng);
        }
        chain
    }

    pub fn sweep(&mut self, rng: &mut LabRng) {
        for x in 0..self.spins.len() {
            let field: f64 = self.neighbours[x]
                .iter()
                .map(|&(y, b)| b * self.spins[y] as f64)
                .sum();
            let p_up = 1.0 / (1.0 + (-2.0 * field).exp());
            self.spins[x] = if rng.random::<f64>() < p_up { 1 } else { -1 };
        }
    }

    /// Advances by the thinning interval and returns the state.
    pub fn draw(&mut self, rng: &mut LabRng) -> SpinConfig {
        for _ in 0..self.thin {
            self.sweep(rng);
        }
        SpinConfig(self.spins.clone())
    }
}

/// Opens each edge whose endpoints agree with probability 1 - exp(-2β_e).
pub fn edwards_sokal_edges(net: &Network, spins: &SpinConfig, rng: &mut LabRng) -> EdgeConfig {
    EdgeConfig(
        net.edges()
            .iter()
            .zip(net.beta())
            .map(|(&(u, v), &b)| {
                spins.0[u] == spins.0[v] && rng.random::<f64>() < -(-2.0 * b).exp_m1()
            })
            .collect(),
    )
}

/// Independent fair sign per cluster, in order of smallest member.
pub fn cluster_signs(clusters: &Clusters, rng: &mut LabRng) -> SpinConfig {
    let mut sign = vec![0i8; clusters.labels.len()];
    for x in 0..clusters.labels.len() {
        if clusters.labels[x] == x {
            sign[x] = if rng.random::<bool>() { 1 } else { -1 };
        }
    }
    SpinConfig(clusters.labels.iter().map(|&l| sign[l]).collect())
}

/// Colors the clusters of `w` with independent fair signs.
pub fn color_clusters(net: &Network, w: &EdgeConfig, rng: &mut LabRng) -> SpinConfig {
    let clusters = components(net, w).expect("edge configuration matches network");
    cluster_signs(&clusters, rng)
}
