use rayon::prelude::*;

use crate::error::Result;
use crate::graph::{MaskGraph, Network};
use crate::sum::Accumulator;

use super::{
    check_capacity, FiniteDistribution, ModelKind, Space, MAX_EDGE_CONFIGS, MAX_PARITY_CONFIGS,
    MAX_SPIN_CONFIGS,
};

/// Bernoulli bridge probabilities p_e = 1 - exp(-β_e).
pub fn bernoulli_probabilities(beta: &[f64]) -> Vec<f64> {
    beta.iter().map(|&b| -(-b).exp_m1()).collect()
}

/// FK edge probabilities 1 - exp(-2β_e).
pub fn fk_open_probabilities(beta: &[f64]) -> Vec<f64> {
    beta.iter().map(|&b| -(-2.0 * b).exp_m1()).collect()
}

/// Parity-class weights per edge: [1, sinh β, cosh β - 1].
pub fn parity_weights(beta: &[f64]) -> Vec<[f64; 3]> {
    beta.iter()
        .map(|&b| {
            let h = (0.5 * b).sinh();
            [1.0, b.sinh(), 2.0 * h * h]
        })
        .collect()
}

/// Exact law of `kind` on `net` by full enumeration.
pub fn exact_measure(net: &Network, kind: ModelKind) -> Result<FiniteDistribution> {
    let n = net.vertex_count();
    let m = net.edge_count();
    match kind {
        ModelKind::Ising => {
            let size = check_capacity("Ising enumeration", 2, n, MAX_SPIN_CONFIGS)?;
            let ends = net.edges();
            let beta = net.beta();
            let weights: Vec<f64> = (0..size)
                .into_par_iter()
                .map(|s| {
                    let energy: f64 = ends
                        .iter()
                        .zip(beta)
                        .map(|(&(u, v), &b)| if (s >> u ^ s >> v) & 1 == 0 { b } else { -b })
                        .sum();
                    energy.exp()
                })
                .collect();
            FiniteDistribution::from_weights(Space::spins(n), Some(kind), weights)
        }
        ModelKind::Fk => {
            let size = check_capacity("FK enumeration", 2, m, MAX_EDGE_CONFIGS)?;
            let graph = MaskGraph::new(net);
            let p = fk_open_probabilities(net.beta());
            let weights: Vec<f64> = (0..size)
                .into_par_iter()
                .map(|mask| {
                    let k = graph.cluster_count(mask as u64);
                    let bond: f64 = p
                        .iter()
                        .enumerate()
                        .map(|(e, &pe)| if mask >> e & 1 == 1 { pe } else { 1.0 - pe })
                        .product();
                    2f64.powi(k as i32) * bond
                })
                .collect();
            FiniteDistribution::from_weights(Space::edges(m), Some(kind), weights)
        }
        ModelKind::Bernoulli => {
            check_capacity("Bernoulli enumeration", 2, m, MAX_EDGE_CONFIGS)?;
            FiniteDistribution::product(&bernoulli_probabilities(net.beta()), Some(kind))
        }
        ModelKind::CurrentParity => {
            let size = check_capacity("parity-class enumeration", 3, m, MAX_PARITY_CONFIGS)?;
            let graph = MaskGraph::new(net);
            let f = parity_weights(net.beta());
            let weights: Vec<f64> = (0..size)
                .into_par_iter()
                .map(|index| {
                    let mut rest = index;
                    let mut odd = 0u64;
                    let mut w = 1.0;
                    for (e, fe) in f.iter().enumerate() {
                        let d = rest % 3;
                        rest /= 3;
                        if d == 1 {
                            odd |= 1 << e;
                        }
                        w *= fe[d];
                    }
                    if graph.is_even(odd) {
                        w
                    } else {
                        0.0
                    }
                })
                .collect();
            FiniteDistribution::from_weights(Space::parity(m), Some(kind), weights)
        }
        ModelKind::CurrentTrace => {
            let size = check_capacity("current-trace enumeration", 2, m, MAX_EDGE_CONFIGS)?;
            let cycles = CycleSpace::new(net);
            let f = parity_weights(net.beta());
            let weights: Vec<f64> = (0..size)
                .into_par_iter()
                .map(|mask| cycles.trace_weight(mask as u64, &f))
                .collect();
            FiniteDistribution::from_weights(Space::edges(m), Some(kind), weights)
        }
    }
}

/// Marginal of a parity-class law on the trace W_e = 1{U_e ≠ 0}.
pub fn trace_from_parity(parity: &FiniteDistribution) -> Result<FiniteDistribution> {
    let space = parity.space();
    if space.kind != super::SpaceKind::Parity {
        return Err(crate::error::LabError::contract("expected a parity-class law"));
    }
    let m = space.dims;
    parity.push_forward(Space::edges(m), Some(ModelKind::CurrentTrace), |mut index| {
        let mut mask = 0usize;
        for e in 0..m {
            if index % 3 != 0 {
                mask |= 1 << e;
            }
            index /= 3;
        }
        mask
    })
}

/// Enumerates the even subgraphs of an open edge set through a basis of
/// fundamental cycles.
struct CycleSpace {
    n: usize,
    ends: Vec<(usize, usize)>,
}

impl CycleSpace {
    fn new(net: &Network) -> Self {
        CycleSpace {
            n: net.vertex_count(),
            ends: net.edges().to_vec(),
        }
    }

    /// Fundamental cycles (as edge masks) of the subgraph `open`.
    fn basis(&self, open: u64) -> Vec<u64> {
        let mut adj = vec![Vec::new(); self.n];
        for (e, &(u, v)) in self.ends.iter().enumerate() {
            if open >> e & 1 == 1 && u != v {
                adj[u].push((v, e));
                adj[v].push((u, e));
            }
        }
        let mut parent: Vec<Option<(usize, usize)>> = vec![None; self.n];
        let mut depth = vec![usize::MAX; self.n];
        let mut tree = 0u64;
        for root in 0..self.n {
            if depth[root] != usize::MAX {
                continue;
            }
            depth[root] = 0;
            let mut queue = std::collections::VecDeque::from([root]);
            while let Some(x) = queue.pop_front() {
                for &(y, e) in &adj[x] {
                    if depth[y] == usize::MAX {
                        depth[y] = depth[x] + 1;
                        parent[y] = Some((x, e));
                        tree |= 1 << e;
                        queue.push_back(y);
                    }
                }
            }
        }
        let mut basis = Vec::new();
        let mut rest = open & !tree;
        while rest != 0 {
            let e = rest.trailing_zeros() as usize;
            rest &= rest - 1;
            let (mut a, mut b) = self.ends[e];
            let mut cycle = 1u64 << e;
            while a != b {
                if depth[a] < depth[b] {
                    std::mem::swap(&mut a, &mut b);
                }
                let (p, pe) = parent[a].expect("non-root has a parent");
                cycle ^= 1 << pe;
                a = p;
            }
            basis.push(cycle);
        }
        basis
    }

    /// Σ over even S ⊆ W of ∏_S sinh β ∏_{W∖S} (cosh β - 1).
    fn trace_weight(&self, open: u64, f: &[[f64; 3]]) -> f64 {
        let basis = self.basis(open);
        let mut acc = Accumulator::new();
        let mut odd = 0u64;
        for step in 0u64..(1u64 << basis.len()) {
            if step > 0 {
                odd ^= basis[step.trailing_zeros() as usize];
            }
            let mut w = 1.0;
            let mut rest = open;
            while rest != 0 {
                let e = rest.trailing_zeros() as usize;
                rest &= rest - 1;
                w *= f[e][if odd >> e & 1 == 1 { 1 } else { 2 }];
            }
            acc.add(w);
        }
        acc.value()
    }
}

/// The three partition functions, each an unnormalized weight sum.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct PartitionFunctions {
    pub ising: f64,
    pub current: f64,
    pub fk: f64,
}

pub fn partition_functions(net: &Network) -> Result<PartitionFunctions> {
    Ok(PartitionFunctions {
        ising: exact_measure(net, ModelKind::Ising)?.z(),
        current: exact_measure(net, ModelKind::CurrentParity)?.z(),
        fk: exact_measure(net, ModelKind::Fk)?.z(),
    })
}

/// `E[σ_x σ_y]` under the exact Ising law.
pub fn two_point_exact(net: &Network, x: usize, y: usize) -> Result<f64> {
    net.check_vertex(x)?;
    net.check_vertex(y)?;
    if x == y {
        return Ok(1.0);
    }
    let ising = exact_measure(net, ModelKind::Ising)?;
    Ok(ising.expectation(|s| if (s >> x ^ s >> y) & 1 == 0 { 1.0 } else { -1.0 }))
}
