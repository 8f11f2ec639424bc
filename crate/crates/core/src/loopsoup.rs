//! Continuous-time random-walk loop soup on a pinned network.
//!
//! The walk jumps across edge `e` at rate β_e and is killed at rate `c` at
//! the pinned vertex, so the holding rate at `x` is
//! `λ_x = Σ_{e ∋ x, non-loop} β_e + c·1{x = x0}`. Self-loops are invisible to
//! the walk. A rooted discrete loop of `n ≥ 2` jumps carries mass
//! `∏ β_e/λ / n`; forgetting the root gives the unrooted loop measure. Each
//! visit gets an independent Exp(λ_x) holding time. Loops with no jump only
//! add occupation; their total at `x` is Gamma(α, λ_x).

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Poisson};
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::gff::{check_magnitudes, reconstruct_field_with, FieldSample};
use crate::graph::{components, Clusters, EdgeConfig, Network};
use crate::sampling::{CurrentConfig, LabRng};

pub const DEFAULT_CUTOFF: usize = 24;
pub const DEFAULT_TRUNCATION_TOLERANCE: f64 = 1e-6;

/// Everything about the soup that depends only on (network, cutoff).
#[derive(Debug, Clone)]
pub struct LoopCatalog {
    cutoff: usize,
    holding_rate: Vec<f64>,
    /// Non-loop incident edges with their jump probability, per vertex.
    steps: Vec<Vec<(usize, usize, f64)>>,
    /// powers[k] = P^k for k = 0..=cutoff.
    powers: Vec<DMatrix<f64>>,
    /// tr(P^n) for n = 0..=cutoff.
    traces: Vec<f64>,
    spectral_radius: f64,
    edge_count: usize,
}

impl LoopCatalog {
    pub fn new(net: &Network, cutoff: usize) -> Result<Self> {
        if cutoff < 2 {
            return Err(LabError::validation("cutoff", "must be at least 2"));
        }
        let n = net.vertex_count();
        let mut holding_rate = vec![0.0; n];
        let mut steps = vec![Vec::new(); n];
        for (e, (&(x, y), &b)) in net.edges().iter().zip(net.beta()).enumerate() {
            if x != y && b > 0.0 {
                holding_rate[x] += b;
                holding_rate[y] += b;
                steps[x].push((e, y, b));
                steps[y].push((e, x, b));
            }
        }
        let pin = net.pinning().filter(|p| p.conductance > 0.0).ok_or(LabError::Unpinned)?;
        holding_rate[pin.vertex] += pin.conductance;
        if let Some(x) = holding_rate.iter().position(|&l| l <= 0.0) {
            return Err(LabError::validation("network", format!("vertex {x} has no positive conductance")));
        }
        for (x, list) in steps.iter_mut().enumerate() {
            for s in list.iter_mut() {
                s.2 /= holding_rate[x];
            }
        }
        let mut p = DMatrix::zeros(n, n);
        let mut sym = DMatrix::zeros(n, n);
        for (x, list) in steps.iter().enumerate() {
            for &(_, y, q) in list {
                p[(x, y)] += q;
                sym[(x, y)] += q * (holding_rate[x] / holding_rate[y]).sqrt();
            }
        }
        let sym = (&sym + sym.transpose()) * 0.5;
        let spectral_radius = sym
            .symmetric_eigenvalues()
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        if spectral_radius >= 1.0 {
            return Err(LabError::validation(
                "network",
                format!("killed walk has spectral radius {spectral_radius} >= 1"),
            ));
        }
        let mut powers = vec![DMatrix::identity(n, n)];
        for k in 1..=cutoff {
            let next = &powers[k - 1] * &p;
            powers.push(next);
        }
        let traces = powers.iter().map(|m| m.trace()).collect();
        Ok(LoopCatalog {
            cutoff,
            holding_rate,
            steps,
            powers,
            traces,
            spectral_radius,
            edge_count: net.edge_count(),
        })
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn spectral_radius(&self) -> f64 {
        self.spectral_radius
    }

    pub fn holding_rates(&self) -> &[f64] {
        &self.holding_rate
    }

    /// Upper bound on the intensity of loops longer than the cutoff:
    /// α|X|ρ^L / (L(1−ρ)).
    pub fn truncation_bound(&self, alpha: f64) -> f64 {
        let l = self.cutoff as f64;
        let rho = self.spectral_radius;
        alpha * self.holding_rate.len() as f64 * rho.powf(l) / (l * (1.0 - rho))
    }

    /// Upper bound on the mean occupation the truncation removes at any
    /// vertex: α ρ^{L+1} / ((1−ρ) min λ).
    pub fn occupation_bias_bound(&self, alpha: f64) -> f64 {
        let rho = self.spectral_radius;
        let lmin = self.holding_rate.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        alpha * rho.powi(self.cutoff as i32 + 1) / ((1.0 - rho) * lmin)
    }

    /// Expected number of loops with exactly `n` jumps.
    pub fn loop_intensity(&self, alpha: f64, n: usize) -> f64 {
        alpha * self.traces[n] / n as f64
    }

    pub fn sample(&self, alpha: f64, rng: &mut LabRng) -> Result<LoopEnsemble> {
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(LabError::validation("alpha", "must be finite and nonnegative"));
        }
        let nv = self.holding_rate.len();
        let mut trivial = vec![0.0; nv];
        let mut grouped: BTreeMap<Vec<(usize, usize)>, LoopRecord> = BTreeMap::new();
        if alpha == 0.0 {
            return Ok(self.ensemble(alpha, grouped, trivial));
        }
        for (x, t) in trivial.iter_mut().enumerate() {
            let g = Gamma::new(alpha, 1.0 / self.holding_rate[x]).expect("positive gamma parameters");
            *t = g.sample(rng);
        }
        for n in 2..=self.cutoff {
            let mean = self.loop_intensity(alpha, n);
            if mean <= 0.0 {
                continue;
            }
            let count = Poisson::new(mean).expect("positive mean").sample(rng) as u64;
            for _ in 0..count {
                let (verts, edges, weight) = self.rooted_loop(n, rng);
                let times: Vec<f64> = verts
                    .iter()
                    .map(|&x| Exp::new(self.holding_rate[x]).expect("positive rate").sample(rng))
                    .collect();
                let steps: Vec<(usize, usize)> = verts.iter().copied().zip(edges.iter().copied()).collect();
                let (shift, period) = canonical_rotation(&steps);
                let key: Vec<(usize, usize)> = (0..n).map(|i| steps[(i + shift) % n]).collect();
                let rec = grouped.entry(key.clone()).or_insert_with(|| LoopRecord {
                    vertices: key.iter().map(|s| s.0).collect(),
                    edges: key.iter().map(|s| s.1).collect(),
                    multiplicity: 0,
                    weight: alpha * weight / period as f64,
                    holding_times: Vec::new(),
                });
                rec.multiplicity += 1;
                rec.holding_times.extend((0..n).map(|i| times[(i + shift) % n]));
            }
        }
        Ok(self.ensemble(alpha, grouped, trivial))
    }

    fn ensemble(&self, alpha: f64, grouped: BTreeMap<Vec<(usize, usize)>, LoopRecord>, trivial: Vec<f64>) -> LoopEnsemble {
        LoopEnsemble {
            alpha,
            cutoff: self.cutoff,
            truncation_bound: self.truncation_bound(alpha),
            edge_count: self.edge_count,
            loops: grouped.into_values().collect(),
            trivial,
        }
    }

    /// A rooted loop of `n` jumps drawn with probability ∏P / tr(Pⁿ):
    /// root ∝ (Pⁿ)_xx, then each step conditioned to return in time.
    fn rooted_loop(&self, n: usize, rng: &mut LabRng) -> (Vec<usize>, Vec<usize>, f64) {
        let diag: Vec<f64> = (0..self.holding_rate.len()).map(|x| self.powers[n][(x, x)]).collect();
        let root = pick(&diag, rng);
        let mut verts = Vec::with_capacity(n);
        let mut edges = Vec::with_capacity(n);
        let mut weight = 1.0;
        let mut z = root;
        for r in (1..=n).rev() {
            let back = &self.powers[r - 1];
            let w: Vec<f64> = self.steps[z].iter().map(|&(_, y, q)| q * back[(y, root)]).collect();
            let (e, y, q) = self.steps[z][pick(&w, rng)];
            verts.push(z);
            edges.push(e);
            weight *= q;
            z = y;
        }
        debug_assert_eq!(z, root);
        (verts, edges, weight)
    }
}

fn pick(weights: &[f64], rng: &mut LabRng) -> usize {
    let total: f64 = weights.iter().sum();
    let mut t = rng.random::<f64>() * total;
    let mut last = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last = i;
            if t < w {
                return i;
            }
            t -= w;
        }
    }
    last
}

/// (shift of the smallest rotation, period) of a cyclic sequence.
fn canonical_rotation<T: Ord>(s: &[T]) -> (usize, usize) {
    let n = s.len();
    let rot = |k: usize| (0..n).map(move |i| &s[(i + k) % n]);
    let best = (1..n).fold(0, |b, k| if rot(k).lt(rot(b)) { k } else { b });
    let period = (1..=n).find(|&p| n % p == 0 && rot(p).eq(rot(0))).unwrap_or(n);
    (best, period)
}

/// One unrooted loop class with all its sampled copies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoopRecord {
    /// Visited vertices in canonical (smallest) rotation.
    pub vertices: Vec<usize>,
    /// `edges[i]` is traversed leaving `vertices[i]`.
    pub edges: Vec<usize>,
    pub multiplicity: usize,
    /// Poisson intensity of this class.
    pub weight: f64,
    /// `len · multiplicity` holding times, copy by copy.
    pub holding_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoopEnsemble {
    pub alpha: f64,
    pub cutoff: usize,
    pub truncation_bound: f64,
    pub edge_count: usize,
    pub loops: Vec<LoopRecord>,
    /// Occupation from loops without jumps.
    pub trivial: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoupFields {
    pub occupation: Vec<f64>,
    pub crossings: CurrentConfig,
}

impl LoopEnsemble {
    pub fn fields(&self) -> SoupFields {
        let mut occupation = self.trivial.clone();
        let mut crossings = vec![0u64; self.edge_count];
        for rec in &self.loops {
            let n = rec.vertices.len();
            for (i, &t) in rec.holding_times.iter().enumerate() {
                occupation[rec.vertices[i % n]] += t;
            }
            for &e in &rec.edges {
                crossings[e] += rec.multiplicity as u64;
            }
        }
        SoupFields {
            occupation,
            crossings: CurrentConfig(crossings),
        }
    }

    /// JSON lines, one loop class per line.
    pub fn dump_jsonl(&self) -> String {
        self.loops
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }
}

pub fn sample_soup(net: &Network, alpha: f64, cutoff: usize, tolerance: f64, rng: &mut LabRng) -> Result<LoopEnsemble> {
    let catalog = LoopCatalog::new(net, cutoff)?;
    let bound = catalog.truncation_bound(alpha);
    if bound > tolerance {
        return Err(LabError::Truncation { bound, tolerance });
    }
    catalog.sample(alpha, rng)
}

/// u_x = √(2 ℓ_x), so that ℓ = h²/2 corresponds to u = |h|.
pub fn magnitudes(occupation: &[f64]) -> Vec<f64> {
    occupation.iter().map(|&l| (2.0 * l).sqrt()).collect()
}

/// Independent bridges, open with probability 1 − exp(−β_e u_x u_y).
/// Self-loops never open.
pub fn sample_bridges(net: &Network, u: &[f64], rng: &mut LabRng) -> Result<EdgeConfig> {
    check_magnitudes(net, u)?;
    Ok(EdgeConfig(
        net.edges()
            .iter()
            .zip(net.beta())
            .map(|(&(x, y), &b)| {
                let p = -(-b * u[x] * u[y]).exp_m1();
                x != y && rng.random::<f64>() < p
            })
            .collect(),
    ))
}

/// Components of {N_e > 0} ∪ {bridge_e}.
pub fn cable_clusters(net: &Network, crossings: &CurrentConfig, bridges: &EdgeConfig) -> Result<Clusters> {
    if crossings.0.len() != net.edge_count() || bridges.len() != net.edge_count() {
        return Err(LabError::contract("crossing or bridge length differs from edge count"));
    }
    let open = EdgeConfig::from_fn(net.edge_count(), |e| crossings.0[e] > 0 || bridges.0[e]);
    components(net, &open)
}

/// Soup → magnitudes → bridges → cable clusters → signed field.
pub fn soup_field(net: &Network, catalog: &LoopCatalog, alpha: f64, rng: &mut LabRng) -> Result<FieldSample> {
    let fields = catalog.sample(alpha, rng)?.fields();
    let u = magnitudes(&fields.occupation);
    let bridges = sample_bridges(net, &u, rng)?;
    let clusters = cable_clusters(net, &fields.crossings, &bridges)?;
    reconstruct_field_with(&u, &clusters, rng)
}
