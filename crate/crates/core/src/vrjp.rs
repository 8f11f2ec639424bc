//! Magnetized inverse vertex-reinforced jump process.
//!
//! Pass `i` starts at `x_i` with the weights left by pass `i − 1`. While the
//! walker sits at `x`, every edge incident to `x` decays as `β_e e^{−t}`, and
//! the walker crosses `e = {x, y}` at rate
//! `β_e(t) ⟨σ_{x_i} σ_y⟩_t / ⟨σ_{x_i} σ_x⟩_t` (two-point functions of the Ising
//! model with the current weights). Self-loops are crossed at rate `β_e(t)`.
//! The total crossings over all passes form a random current.
//!
//! Events are simulated exactly by thinning. Away from the root the envelope
//! over a horizon `[t0, t0 + Δ]` is
//! `Σ_e β_e(t0) ⟨σ_{x_i}σ_y⟩_{t0} / ⟨σ_{x_i}σ_x⟩_{t0+Δ}`, valid because
//! two-point functions only decrease as weights decrease. At the root the
//! denominator is 1, so `Σ_e β_e(t) e^{−(s−t)}` dominates and has finite
//! total mass, which lets the pass end with an exact "no more jumps" draw.

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::exact::ising::IsingEnumerator;
use crate::graph::{incidence_parity_check, EdgeValues, Network};
use crate::sampling::{CurrentConfig, LabRng, SeedSpec};

const CLAMP: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VrjpParams {
    pub max_vertices: usize,
    pub horizon: f64,
    pub event_cap: usize,
}

impl Default for VrjpParams {
    fn default() -> Self {
        VrjpParams {
            max_vertices: 12,
            horizon: 0.5,
            event_cap: 10_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VrjpState {
    /// 0-based pass index into `order`.
    pub pass: usize,
    pub order: Vec<usize>,
    pub position: usize,
    pub clock: f64,
    pub weights: Vec<f64>,
    pub crossings: Vec<u64>,
}

impl VrjpState {
    pub fn root(&self) -> usize {
        self.order[self.pass]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JumpEvent {
    pub pass: usize,
    pub time: f64,
    pub from: usize,
    pub to: usize,
    pub edge: usize,
}

/// Parses a comma-separated vertex permutation.
pub fn parse_order(text: &str, vertices: usize) -> Result<Vec<usize>> {
    let order = text
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| LabError::validation("order", format!("'{}' is not a vertex id", s.trim())))
        })
        .collect::<Result<Vec<_>>>()?;
    check_order(&order, vertices)?;
    Ok(order)
}

pub fn check_order(order: &[usize], vertices: usize) -> Result<()> {
    if order.len() != vertices {
        return Err(LabError::validation(
            "order",
            format!("{} entries for {vertices} vertices", order.len()),
        ));
    }
    let mut seen = vec![false; vertices];
    for &x in order {
        if x >= vertices {
            return Err(LabError::validation("order", format!("vertex {x} out of range")));
        }
        if std::mem::replace(&mut seen[x], true) {
            return Err(LabError::validation("order", format!("vertex {x} repeated")));
        }
    }
    Ok(())
}

/// Topology plus the two-point engine; shared by all runs on one network.
#[derive(Debug, Clone)]
pub struct Vrjp {
    edges: Vec<(usize, usize)>,
    beta: Vec<f64>,
    incidence: Vec<Vec<usize>>,
    ising: IsingEnumerator,
    params: VrjpParams,
}

impl Vrjp {
    pub fn new(net: &Network, params: VrjpParams) -> Result<Self> {
        if net.vertex_count() > params.max_vertices {
            return Err(LabError::Capacity {
                what: "VRJP two-point enumeration (vertices)",
                needed: net.vertex_count() as f64,
                limit: params.max_vertices as f64,
            });
        }
        if !(params.horizon > 0.0 && params.horizon.is_finite()) {
            return Err(LabError::validation("horizon", "must be positive"));
        }
        Ok(Vrjp {
            edges: net.edges().to_vec(),
            beta: net.beta().to_vec(),
            incidence: net.incidence(),
            ising: IsingEnumerator::new(net.vertex_count(), net.edges()),
            params,
        })
    }

    pub fn start(&self, order: &[usize]) -> Result<VrjpState> {
        check_order(order, self.incidence.len())?;
        Ok(VrjpState {
            pass: 0,
            order: order.to_vec(),
            position: order[0],
            clock: 0.0,
            weights: self.beta.clone(),
            crossings: vec![0; self.edges.len()],
        })
    }

    fn other(&self, e: usize, x: usize) -> usize {
        let (u, v) = self.edges[e];
        if u == x {
            v
        } else {
            u
        }
    }

    /// Rate of crossing `e` from the current position.
    pub fn jump_rate(&self, state: &VrjpState, e: usize) -> Result<f64> {
        let x = state.position;
        if !self.incidence[x].contains(&e) {
            return Err(LabError::contract(format!("edge {e} is not incident to vertex {x}")));
        }
        let c = self.ising.correlations_from(state.root(), &state.weights);
        self.rate_with(&c, state, e)
    }

    fn rate_with(&self, c: &[f64], state: &VrjpState, e: usize) -> Result<f64> {
        let x = state.position;
        let w = state.weights[e];
        if w == 0.0 {
            return Ok(0.0);
        }
        let y = self.other(e, x);
        if c[x] < CLAMP {
            return Err(LabError::Degenerate(format!(
                "two-point function at vertex {x} underflowed to {:e}",
                c[x]
            )));
        }
        Ok(w * c[y] / c[x])
    }

    fn decay(&self, state: &mut VrjpState, dt: f64) {
        let f = (-dt).exp();
        for &e in &self.incidence[state.position] {
            let w = &mut state.weights[e];
            *w *= f;
            if *w < CLAMP {
                *w = 0.0;
            }
        }
        state.clock += dt;
    }

    fn jump(&self, state: &mut VrjpState, e: usize, events: &mut Vec<JumpEvent>) {
        let from = state.position;
        let to = self.other(e, from);
        state.crossings[e] += 1;
        state.position = to;
        events.push(JumpEvent {
            pass: state.pass,
            time: state.clock,
            from,
            to,
            edge: e,
        });
    }

    /// Picks an incident edge with probability ∝ `rates`, or `None` with the
    /// remaining probability `1 − Σ rates / bound`.
    fn thin(&self, x: usize, rates: &[f64], bound: f64, rng: &mut LabRng) -> Option<usize> {
        let mut t = rng.random::<f64>() * bound;
        for (k, &r) in rates.iter().enumerate() {
            if t < r {
                return Some(self.incidence[x][k]);
            }
            t -= r;
        }
        None
    }

    /// Runs the current pass to completion and, if any passes remain, sets
    /// the state up at the start of the next one.
    pub fn run_pass(&self, state: &mut VrjpState, rng: &mut LabRng) -> Result<Vec<JumpEvent>> {
        let root = state.root();
        if state.position != root {
            return Err(LabError::contract("pass must start at its root"));
        }
        let mut events = Vec::new();
        let mut proposals = 0usize;
        loop {
            proposals += 1;
            if proposals > self.params.event_cap {
                return Err(LabError::Runaway { cap: self.params.event_cap });
            }
            let x = state.position;
            if x == root {
                let b: f64 = self.incidence[x].iter().map(|&e| state.weights[e]).sum();
                let e1: f64 = Exp1.sample(rng);
                if e1 >= b {
                    break;
                }
                let tau = -(-e1 / b).ln_1p();
                self.decay(state, tau);
                let c = self.ising.correlations_from(root, &state.weights);
                let rates = self.incidence[x]
                    .iter()
                    .map(|&e| self.rate_with(&c, state, e))
                    .collect::<Result<Vec<_>>>()?;
                let bound: f64 = self.incidence[x].iter().map(|&e| state.weights[e]).sum();
                self.check_envelope(&rates, bound)?;
                if let Some(e) = self.thin(x, &rates, bound, rng) {
                    self.jump(state, e, &mut events);
                }
            } else {
                let delta = self.params.horizon;
                let c0 = self.ising.correlations_from(root, &state.weights);
                let mut later = state.weights.clone();
                let f = (-delta).exp();
                for &e in &self.incidence[x] {
                    later[e] *= f;
                }
                let c1 = self.ising.correlations_from(root, &later);
                if c1[x] < CLAMP {
                    return Err(LabError::Degenerate(format!(
                        "two-point function at vertex {x} underflowed to {:e}",
                        c1[x]
                    )));
                }
                let bound: f64 = self.incidence[x]
                    .iter()
                    .map(|&e| state.weights[e] * c0[self.other(e, x)])
                    .sum::<f64>()
                    / c1[x];
                let end = state.clock + delta;
                loop {
                    let e1: f64 = Exp1.sample(rng);
                    let step = if bound > 0.0 { e1 / bound } else { f64::INFINITY };
                    if state.clock + step >= end {
                        self.decay(state, end - state.clock);
                        break;
                    }
                    proposals += 1;
                    if proposals > self.params.event_cap {
                        return Err(LabError::Runaway { cap: self.params.event_cap });
                    }
                    self.decay(state, step);
                    let c = self.ising.correlations_from(root, &state.weights);
                    let rates = self.incidence[x]
                        .iter()
                        .map(|&e| self.rate_with(&c, state, e))
                        .collect::<Result<Vec<_>>>()?;
                    self.check_envelope(&rates, bound)?;
                    if let Some(e) = self.thin(x, &rates, bound, rng) {
                        self.jump(state, e, &mut events);
                        break;
                    }
                }
            }
        }
        // Edges at the root decay to zero as t → ∞.
        for &e in &self.incidence[root] {
            state.weights[e] = 0.0;
        }
        if state.pass + 1 < state.order.len() {
            state.pass += 1;
            state.position = state.order[state.pass];
            state.clock = 0.0;
        }
        Ok(events)
    }

    fn check_envelope(&self, rates: &[f64], bound: f64) -> Result<()> {
        let total: f64 = rates.iter().sum();
        if total > bound * (1.0 + 1e-12) + 1e-300 {
            return Err(LabError::InvariantViolation(format!(
                "jump rate {total} exceeds thinning envelope {bound}"
            )));
        }
        Ok(())
    }

    /// All passes; returns the total crossings and every jump.
    pub fn run_traced(&self, order: &[usize], rng: &mut LabRng) -> Result<(CurrentConfig, Vec<JumpEvent>)> {
        let mut state = self.start(order)?;
        let mut events = Vec::new();
        for _ in 0..order.len() {
            events.extend(self.run_pass(&mut state, rng)?);
        }
        Ok((CurrentConfig(state.crossings), events))
    }

    pub fn run(&self, order: &[usize], rng: &mut LabRng) -> Result<CurrentConfig> {
        Ok(self.run_traced(order, rng)?.0)
    }
}

pub fn run_vrjp(net: &Network, order: &[usize], seed: SeedSpec) -> Result<CurrentConfig> {
    let current = Vrjp::new(net, VrjpParams::default())?.run(order, &mut seed.rng())?;
    debug_assert!(incidence_parity_check(net, EdgeValues::Current(&current.0)).unwrap_or(false));
    Ok(current)
}

/// JSON lines: one per jump, then the final current.
pub fn trace_jsonl(events: &[JumpEvent], current: &CurrentConfig) -> String {
    let mut s: String = events
        .iter()
        .map(|e| serde_json::to_string(e).expect("event serializes") + "\n")
        .collect();
    s.push_str(&serde_json::json!({ "current": current.0 }).to_string());
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::NetworkSpec;

    fn net(n: usize, edges: &[(usize, usize)], beta: &[f64]) -> Network {
        let spec = NetworkSpec {
            vertices: n,
            edges: edges.iter().map(|&(u, v)| [u, v]).collect(),
            beta: vec![1.0; edges.len()],
            pinning: None,
        };
        Network::build(&spec).unwrap().reweighted(beta.to_vec()).unwrap()
    }

    #[test]
    fn order_parsing() {
        assert_eq!(parse_order("2, 0,1", 3).unwrap(), vec![2, 0, 1]);
        assert!(parse_order("0,0,1", 3).is_err());
        assert!(parse_order("0,1", 3).is_err());
        assert!(parse_order("0,x,1", 3).is_err());
        assert!(parse_order("0,1,3", 3).is_err());
    }

    #[test]
    fn rate_examples() {
        let n = net(2, &[(0, 1)], &[1.0]);
        let v = Vrjp::new(&n, VrjpParams::default()).unwrap();
        let mut s = v.start(&[0, 1]).unwrap();
        assert!((v.jump_rate(&s, 0).unwrap() - 1f64.tanh()).abs() < 1e-15);
        s.weights = vec![0.0];
        assert_eq!(v.jump_rate(&s, 0).unwrap(), 0.0);
        let tri = net(3, &[(0, 1), (1, 2)], &[1.0, 1.0]);
        let v = Vrjp::new(&tri, VrjpParams::default()).unwrap();
        let s = v.start(&[0, 1, 2]).unwrap();
        assert!(v.jump_rate(&s, 1).is_err());
    }

    #[test]
    fn isolated_root_terminates_at_once() {
        let n = net(2, &[(0, 1)], &[0.0]);
        let (c, ev) = Vrjp::new(&n, VrjpParams::default())
            .unwrap()
            .run_traced(&[0, 1], &mut SeedSpec::new(0, 0).rng())
            .unwrap();
        assert_eq!(c.0, vec![0]);
        assert!(ev.is_empty());
    }

    #[test]
    fn passes_are_sourceless_and_root_weights_vanish() {
        let n = net(4, &[(0, 1), (1, 2), (2, 3), (3, 0), (0, 2), (2, 2)], &[0.8, 1.1, 0.5, 0.9, 0.3, 0.6]);
        let v = Vrjp::new(&n, VrjpParams::default()).unwrap();
        let mut rng = SeedSpec::new(11, 0).rng();
        for _ in 0..200 {
            let mut s = v.start(&[2, 0, 3, 1]).unwrap();
            for i in 0..4 {
                let root = s.root();
                let before = s.crossings.clone();
                let ev = v.run_pass(&mut s, &mut rng).unwrap();
                assert!(ev.windows(2).all(|w| w[0].time < w[1].time));
                let diff: Vec<u64> = s.crossings.iter().zip(&before).map(|(a, b)| a - b).collect();
                assert!(incidence_parity_check(&n, EdgeValues::Current(&diff)).unwrap(), "pass {i}");
                for &e in &n.incidence()[root] {
                    assert!(s.weights[e] <= 1e-12);
                }
            }
            assert!(s.weights.iter().all(|&w| w == 0.0));
        }
    }

    #[test]
    fn single_edge_zero_probability() {
        let n = net(2, &[(0, 1)], &[1.0]);
        let v = Vrjp::new(&n, VrjpParams::default()).unwrap();
        let mut rng = SeedSpec::new(5, 0).rng();
        let runs = 20_000;
        let mut zero = 0;
        for _ in 0..runs {
            let c = v.run(&[0, 1], &mut rng).unwrap();
            assert_eq!(c.0[0] % 2, 0);
            zero += (c.0[0] == 0) as usize;
        }
        let p = 1.0 / 1f64.cosh();
        let se = (p * (1.0 - p) / runs as f64).sqrt();
        assert!((zero as f64 / runs as f64 - p).abs() < 4.0 * se);
    }

    #[test]
    fn too_many_vertices() {
        let edges: Vec<(usize, usize)> = (0..12).map(|i| (i, i + 1)).collect();
        let n = net(13, &edges, &[1.0; 12]);
        assert!(matches!(Vrjp::new(&n, VrjpParams::default()), Err(LabError::Capacity { .. })));
    }
}
