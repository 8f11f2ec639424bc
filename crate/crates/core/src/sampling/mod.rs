//! Seeded Monte Carlo samplers for every model, including the sample-level
//! "current + Bernoulli = FK" coupling.

mod chain;
mod rng;
pub mod stats;

use rand::Rng;
use rand_distr::{weighted::WeightedAliasIndex, Distribution};

use crate::error::{LabError, Result};
use crate::exact::{
    bernoulli_probabilities, exact_measure, FiniteDistribution, ModelKind, ParityClass, Space,
    SpaceKind,
};
use crate::graph::{incidence_parity_check, EdgeConfig, EdgeValues, Network, SpinConfig};

pub use chain::{cluster_signs, color_clusters, edwards_sokal_edges, ChainParams, IsingChain};
pub use rng::{LabRng, SeedSpec};
pub use stats::{counts_compare, empirical_compare, two_sample_compare, CompareReport, Moments, SigmaBand};

/// Full integer current N_e per edge.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CurrentConfig(pub Vec<u64>);

impl CurrentConfig {
    pub fn zeros(m: usize) -> Self {
        CurrentConfig(vec![0; m])
    }

    pub fn parity_class(&self) -> ParityClass {
        ParityClass(
            self.0
                .iter()
                .map(|&n| match n {
                    0 => 0,
                    n if n % 2 == 1 => 1,
                    _ => 2,
                })
                .collect(),
        )
    }

    /// W_e = 1{N_e > 0}.
    pub fn trace(&self) -> EdgeConfig {
        EdgeConfig(self.0.iter().map(|&n| n > 0).collect())
    }

    pub fn is_sourceless(&self, net: &Network) -> Result<bool> {
        incidence_parity_check(net, EdgeValues::Current(&self.0))
    }
}

/// One sampled configuration of any model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Configuration {
    Spins(SpinConfig),
    Edges(EdgeConfig),
    Parity(ParityClass),
    Current(CurrentConfig),
}

impl Configuration {
    /// Index in the table space; None for full currents.
    pub fn index(&self) -> Option<usize> {
        match self {
            Configuration::Spins(s) => Some(spin_index(s)),
            Configuration::Edges(w) => Some(w.to_mask() as usize),
            Configuration::Parity(p) => Some(parity_index(p)),
            Configuration::Current(_) => None,
        }
    }

    pub fn from_index(space: Space, index: usize) -> Self {
        let digits = space.digits(index);
        match space.kind {
            SpaceKind::Spins => Configuration::Spins(SpinConfig(
                digits.iter().map(|&d| if d == 0 { 1 } else { -1 }).collect(),
            )),
            SpaceKind::Edges => Configuration::Edges(EdgeConfig(digits.iter().map(|&d| d == 1).collect())),
            SpaceKind::Parity => Configuration::Parity(ParityClass(digits)),
        }
    }
}

pub fn spin_index(s: &SpinConfig) -> usize {
    s.0.iter()
        .enumerate()
        .fold(0, |acc, (x, &v)| if v < 0 { acc | 1 << x } else { acc })
}

pub fn parity_index(p: &ParityClass) -> usize {
    p.0.iter().rev().fold(0, |acc, &d| acc * 3 + d as usize)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingMethod {
    ExactTable,
    MarkovChain(ChainParams),
}

/// Alias-method sampler over an enumerated table.
#[derive(Debug, Clone)]
pub struct TableSampler {
    dist: FiniteDistribution,
    alias: WeightedAliasIndex<f64>,
}

impl TableSampler {
    pub fn new(dist: FiniteDistribution) -> Result<Self> {
        let alias = WeightedAliasIndex::new(dist.probs().to_vec())
            .map_err(|e| LabError::Numerical(format!("alias table: {e}")))?;
        Ok(TableSampler { dist, alias })
    }

    pub fn for_model(net: &Network, kind: ModelKind) -> Result<Self> {
        Self::new(exact_measure(net, kind)?)
    }

    pub fn dist(&self) -> &FiniteDistribution {
        &self.dist
    }

    pub fn sample_index(&self, rng: &mut LabRng) -> usize {
        self.alias.sample(rng)
    }

    pub fn sample(&self, rng: &mut LabRng) -> Configuration {
        Configuration::from_index(self.dist.space(), self.sample_index(rng))
    }
}

/// One draw of `kind`. The exact-table method is exact within enumeration
/// limits; the Markov-chain method runs single-site heat-bath on spins (FK
/// via Edwards–Sokal) and supports only Ising and FK.
pub fn sample_configuration(net: &Network, kind: ModelKind, seed: SeedSpec, method: SamplingMethod) -> Result<Configuration> {
    let mut rng = seed.rng();
    match method {
        SamplingMethod::ExactTable => Ok(TableSampler::for_model(net, kind)?.sample(&mut rng)),
        SamplingMethod::MarkovChain(params) => {
            let mut chain = match kind {
                ModelKind::Ising | ModelKind::Fk => IsingChain::new(net, params, &mut rng),
                _ => {
                    return Err(LabError::Unsupported(format!(
                        "no Markov chain for {kind}; use the exact table or the VRJP sampler"
                    )))
                }
            };
            let spins = chain.draw(&mut rng);
            Ok(match kind {
                ModelKind::Ising => Configuration::Spins(spins),
                _ => Configuration::Edges(edwards_sokal_edges(net, &spins, &mut rng)),
            })
        }
    }
}

/// Relative tail mass at which the β^n/n! series is cut.
const SERIES_TAIL: f64 = 1e-15;

/// Support and unnormalized weights β^n/n! of N given its parity class,
/// truncated once the remaining tail is below 1e-15 of the total.
fn magnitude_series(class: u8, beta: f64) -> Vec<(u64, f64)> {
    let start: u64 = match class {
        1 => 1,
        2 => 2,
        _ => return vec![(0, 1.0)],
    };
    // Weights relative to the first term of the class.
    let mut terms = vec![(start, 1.0)];
    let mut total = 1.0;
    let mut n = start;
    let mut t = 1.0;
    loop {
        t *= beta * beta / ((n + 1) as f64 * (n + 2) as f64);
        n += 2;
        total += t;
        terms.push((n, t));
        // Past the mode the ratio of successive terms is < 1; bound the tail
        // by a geometric series.
        let ratio = beta * beta / ((n + 1) as f64 * (n + 2) as f64);
        if ratio < 1.0 && t * ratio / (1.0 - ratio) < SERIES_TAIL * total {
            break;
        }
    }
    terms
}

/// Draws N_e given its parity class: 0; odd with P(n) ∝ β^n/n!; or even
/// ≥ 2 with P(n) ∝ β^n/n!.
pub fn sample_magnitude(class: u8, beta: f64, rng: &mut LabRng) -> Result<u64> {
    if class > 2 {
        return Err(LabError::contract(format!("parity class {class} not in 0..=2")));
    }
    if class != 0 && !(beta > 0.0) {
        return Err(LabError::contract("nonzero parity class on a zero-weight edge"));
    }
    let terms = magnitude_series(class, beta);
    let total: f64 = terms.iter().map(|t| t.1).sum();
    let mut u = rng.random::<f64>() * total;
    for &(n, t) in &terms {
        if u < t {
            return Ok(n);
        }
        u -= t;
    }
    Ok(terms.last().expect("nonempty series").0)
}

pub fn complete_magnitudes(parity: &ParityClass, beta: &[f64], rng: &mut LabRng) -> Result<CurrentConfig> {
    if parity.0.len() != beta.len() {
        return Err(LabError::contract("parity class length differs from edge count"));
    }
    parity
        .0
        .iter()
        .zip(beta)
        .map(|(&u, &b)| sample_magnitude(u, b, rng))
        .collect::<Result<Vec<_>>>()
        .map(CurrentConfig)
}

/// Exact random-current sampler: parity class from the table, then
/// magnitudes.
#[derive(Debug, Clone)]
pub struct CurrentSampler {
    parity: TableSampler,
    beta: Vec<f64>,
}

impl CurrentSampler {
    pub fn new(net: &Network) -> Result<Self> {
        Ok(CurrentSampler {
            parity: TableSampler::for_model(net, ModelKind::CurrentParity)?,
            beta: net.beta().to_vec(),
        })
    }

    pub fn parity_law(&self) -> &FiniteDistribution {
        self.parity.dist()
    }

    pub fn draw(&self, rng: &mut LabRng) -> CurrentConfig {
        let index = self.parity.sample_index(rng);
        let class = ParityClass(self.parity.dist().space().digits(index));
        complete_magnitudes(&class, &self.beta, rng).expect("parity table only emits admissible classes")
    }
}

/// A current, independent bridges, and their edgewise maximum.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoupledDraw {
    pub current: CurrentConfig,
    pub xi: EdgeConfig,
    pub v: EdgeConfig,
}

/// Draws ξ_e ~ Bernoulli(1 - e^{-β_e}) independently of `current` and sets
/// V_e = 1 iff N_e > 0 or ξ_e = 1.
pub fn couple_with_current(net: &Network, current: CurrentConfig, rng: &mut LabRng) -> Result<CoupledDraw> {
    if current.0.len() != net.edge_count() {
        return Err(LabError::contract("current length differs from edge count"));
    }
    let p = bernoulli_probabilities(net.beta());
    let xi = EdgeConfig(p.iter().map(|&pe| rng.random::<f64>() < pe).collect());
    let v = EdgeConfig(current.0.iter().zip(&xi.0).map(|(&n, &x)| n > 0 || x).collect());
    Ok(CoupledDraw { current, xi, v })
}

#[derive(Debug, Clone)]
pub struct CoupledSampler {
    currents: CurrentSampler,
    net: Network,
}

impl CoupledSampler {
    pub fn new(net: &Network) -> Result<Self> {
        Ok(CoupledSampler {
            currents: CurrentSampler::new(net)?,
            net: net.clone(),
        })
    }

    pub fn draw(&self, rng: &mut LabRng) -> CoupledDraw {
        let current = self.currents.draw(rng);
        couple_with_current(&self.net, current, rng).expect("lengths match")
    }
}

pub fn coupled_fk_sample(net: &Network, seed: SeedSpec) -> Result<CoupledDraw> {
    Ok(CoupledSampler::new(net)?.draw(&mut seed.rng()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::Space;
    use crate::graph::NetworkSpec;

    fn net(n: usize, edges: &[(usize, usize)], beta: &[f64]) -> Network {
        Network::build(&NetworkSpec {
            vertices: n,
            edges: edges.iter().map(|&(u, v)| [u, v]).collect(),
            beta: beta.to_vec(),
            pinning: None,
        })
        .unwrap()
    }

    #[test]
    fn zero_coupling_is_deterministic() {
        let z = net(3, &[(0, 1), (1, 2)], &[1.0, 1.0]).reweighted(vec![0.0, 0.0]).unwrap();
        for kind in [ModelKind::Fk, ModelKind::CurrentTrace, ModelKind::Bernoulli] {
            let c = sample_configuration(&z, kind, SeedSpec::new(1, 0), SamplingMethod::ExactTable).unwrap();
            assert_eq!(c, Configuration::Edges(EdgeConfig(vec![false, false])));
        }
        let d = coupled_fk_sample(&z, SeedSpec::new(2, 0)).unwrap();
        assert_eq!(d.current, CurrentConfig::zeros(2));
        assert_eq!(d.v, EdgeConfig(vec![false, false]));
    }

    #[test]
    fn chain_rejects_currents() {
        let g = net(2, &[(0, 1)], &[1.0]);
        let err = sample_configuration(&g, ModelKind::CurrentParity, SeedSpec::new(0, 0), SamplingMethod::MarkovChain(ChainParams::default()));
        assert!(matches!(err, Err(LabError::Unsupported(_))));
    }

    #[test]
    fn same_seed_same_draw() {
        let g = net(3, &[(0, 1), (1, 2), (2, 0)], &[0.5; 3]);
        for method in [SamplingMethod::ExactTable, SamplingMethod::MarkovChain(ChainParams::default())] {
            let a = sample_configuration(&g, ModelKind::Fk, SeedSpec::new(9, 1), method).unwrap();
            let b = sample_configuration(&g, ModelKind::Fk, SeedSpec::new(9, 1), method).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn magnitude_given_even_class() {
        // P(N = 2 | U = 2) = (β²/2) / (cosh β - 1) at β = 1.
        let terms = magnitude_series(2, 1.0);
        let total: f64 = terms.iter().map(|t| t.1).sum();
        assert!((terms[0].1 / total - 0.5 / (1f64.cosh() - 1.0)).abs() < 1e-14);
        assert!((terms[0].1 / total - 0.920674).abs() < 1e-6);
        let mut rng = SeedSpec::new(3, 0).rng();
        let n = 100_000;
        let twos = (0..n).filter(|_| sample_magnitude(2, 1.0, &mut rng).unwrap() == 2).count();
        let p = 0.5 / (1f64.cosh() - 1.0);
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!((twos as f64 / n as f64 - p).abs() < 3.0 * sd);
    }

    #[test]
    fn magnitude_series_truncation() {
        for &b in &[1e-6, 0.3, 1.0, 4.0, 30.0] {
            for class in [1u8, 2] {
                let terms = magnitude_series(class, b);
                assert!(terms.iter().all(|t| t.0 % 2 == (class as u64) % 2));
                let total: f64 = terms.iter().map(|t| t.1).sum();
                // Compare against the closed forms sinh and cosh - 1.
                let first = if class == 1 { b } else { b * b / 2.0 };
                let closed = if class == 1 { b.sinh() } else { 2.0 * (0.5 * b).sinh().powi(2) };
                assert!((total * first / closed - 1.0).abs() < 1e-13, "β={b} class={class}");
            }
        }
        assert!(magnitude_series(2, 4.0).len() <= 20);
    }

    #[test]
    fn single_edge_parity_sampling() {
        let g = net(2, &[(0, 1)], &[1.0]);
        let sampler = CurrentSampler::new(&g).unwrap();
        let mut rng = SeedSpec::new(11, 0).rng();
        let n = 100_000;
        let zeros = (0..n).filter(|_| sampler.draw(&mut rng).0[0] == 0).count();
        assert!((zeros as f64 / n as f64 - 0.648).abs() < 0.005);
    }

    #[test]
    fn coupled_draw_definition() {
        let g = net(2, &[(0, 1)], &[1.0]);
        let mut rng = SeedSpec::new(0, 0).rng();
        for _ in 0..100 {
            let d = couple_with_current(&g, CurrentConfig(vec![2]), &mut rng).unwrap();
            assert_eq!(d.v, EdgeConfig(vec![true]));
        }
        let mut rng = SeedSpec::new(4, 0).rng();
        let sampler = CoupledSampler::new(&g).unwrap();
        let n = 100_000;
        let open = (0..n).filter(|_| sampler.draw(&mut rng).v.0[0]).count();
        assert!((open as f64 / n as f64 - 0.7616).abs() < 0.0041);
    }

    #[test]
    fn self_compare_passes() {
        let reference = exact_measure(&net(2, &[(0, 1)], &[1.0]), ModelKind::Fk).unwrap();
        let sampler = TableSampler::new(reference.clone()).unwrap();
        let mut rng = SeedSpec::new(5, 0).rng();
        let samples: Vec<usize> = (0..10_000).map(|_| sampler.sample_index(&mut rng)).collect();
        assert!(empirical_compare(&samples, &reference, SigmaBand::single(3.0)).unwrap().pass);
    }

    #[test]
    fn magnitude_completion_projects_back() {
        let g = net(3, &[(0, 1), (1, 2), (2, 0)], &[0.8; 3]);
        let sampler = CurrentSampler::new(&g).unwrap();
        let mut rng = SeedSpec::new(6, 0).rng();
        let samples: Vec<usize> = (0..20_000)
            .map(|_| {
                let c = sampler.draw(&mut rng);
                assert!(c.is_sourceless(&g).unwrap());
                parity_index(&c.parity_class())
            })
            .collect();
        assert!(empirical_compare(&samples, sampler.parity_law(), SigmaBand::single(3.0)).unwrap().pass);
    }

    #[test]
    fn edwards_sokal_round_trip() {
        let g = net(3, &[(0, 1), (1, 2), (2, 0)], &[0.5; 3]);
        let ising = exact_measure(&g, ModelKind::Ising).unwrap();
        let mut rng = SeedSpec::new(8, 0).rng();
        let mut chain = IsingChain::new(&g, ChainParams::default(), &mut rng);
        let samples: Vec<usize> = (0..20_000)
            .map(|_| {
                let s = chain.draw(&mut rng);
                let w = edwards_sokal_edges(&g, &s, &mut rng);
                spin_index(&color_clusters(&g, &w, &mut rng))
            })
            .collect();
        assert!(empirical_compare(&samples, &ising, SigmaBand::single(3.0)).unwrap().pass);
    }

    #[test]
    fn index_roundtrip() {
        let s = Space::parity(4);
        for i in 0..s.size().unwrap() {
            assert_eq!(Configuration::from_index(s, i).index(), Some(i));
        }
        let spins = Space::spins(3);
        for i in 0..8 {
            assert_eq!(Configuration::from_index(spins, i).index(), Some(i));
        }
    }
}
