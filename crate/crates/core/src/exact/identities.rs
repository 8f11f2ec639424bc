use crate::error::{LabError, Result};
use crate::graph::{cyclomatic_number, EdgeConfig, MaskGraph, Network};
use crate::sum::{compensated_sum, Accumulator};

use super::{check_capacity, exact_measure, FiniteDistribution, ModelKind, Space, SpaceKind, MAX_EDGE_CONFIGS, MAX_SPIN_CONFIGS};

/// How [`superpose_max_with`] combines the two laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SuperposeRoute {
    /// Per-edge mixing; requires the second law to be a product measure.
    PerEdge,
    /// Sum over all pairs of configurations.
    Convolution,
}

/// Largest edge count for the pairwise convolution route (4^12 pairs).
const MAX_CONVOLUTION_EDGES: usize = 12;

fn edge_space(d: &FiniteDistribution, name: &str) -> Result<usize> {
    match d.space().kind {
        SpaceKind::Edges => Ok(d.space().dims),
        _ => Err(LabError::contract(format!("{name} is not a law on edge configurations"))),
    }
}

/// Law of the edgewise maximum of independent draws from `a` and `b`.
pub fn superpose_max(a: &FiniteDistribution, b: &FiniteDistribution) -> Result<FiniteDistribution> {
    let route = if b.product_marginals().is_some() {
        SuperposeRoute::PerEdge
    } else {
        SuperposeRoute::Convolution
    };
    superpose_max_with(a, b, route)
}

pub fn superpose_max_with(a: &FiniteDistribution, b: &FiniteDistribution, route: SuperposeRoute) -> Result<FiniteDistribution> {
    let m = edge_space(a, "first law")?;
    if edge_space(b, "second law")? != m {
        return Err(LabError::contract(format!(
            "edge counts differ: {m} vs {}",
            b.space().dims
        )));
    }
    let probs = match route {
        SuperposeRoute::PerEdge => {
            let p = b
                .product_marginals()
                .ok_or_else(|| LabError::contract("per-edge route needs a product measure"))?;
            let mut t = a.probs().to_vec();
            for (e, &pe) in p.iter().enumerate() {
                let bit = 1usize << e;
                for mask in 0..t.len() {
                    if mask & bit == 0 {
                        let closed = t[mask];
                        t[mask | bit] += pe * closed;
                        t[mask] = (1.0 - pe) * closed;
                    }
                }
            }
            t
        }
        SuperposeRoute::Convolution => {
            if m > MAX_CONVOLUTION_EDGES {
                return Err(LabError::Capacity {
                    what: "pairwise convolution",
                    needed: 4f64.powi(m as i32),
                    limit: 4f64.powi(MAX_CONVOLUTION_EDGES as i32),
                });
            }
            let mut acc = vec![Accumulator::new(); a.len()];
            for (i, &pa) in a.probs().iter().enumerate() {
                if pa == 0.0 {
                    continue;
                }
                for (j, &pb) in b.probs().iter().enumerate() {
                    acc[i | j].add(pa * pb);
                }
            }
            acc.iter().map(Accumulator::value).collect()
        }
    };
    Ok(FiniteDistribution::from_raw(Space::edges(m), None, probs.clone(), probs, 1.0))
}

/// Half the L1 distance between two tables on the same space.
pub fn tv_distance(a: &FiniteDistribution, b: &FiniteDistribution) -> Result<f64> {
    if a.space() != b.space() {
        return Err(LabError::contract(format!(
            "spaces differ: {:?} vs {:?}",
            a.space(),
            b.space()
        )));
    }
    Ok(0.5 * compensated_sum(a.probs().iter().zip(b.probs()).map(|(x, y)| (x - y).abs())))
}

/// Largest open-edge count for the brute-force sign count.
const MAX_SIGN_EDGES: usize = 25;

/// Number of sign assignments to the open edges of `v` with an even number
/// of negative signs at every vertex, by brute force; checked against
/// 2^(o + k - |X|).
pub fn sign_assignment_count(net: &Network, v: &EdgeConfig) -> Result<u64> {
    let cyc = cyclomatic_number(net, v)?;
    let open: Vec<usize> = (0..v.len()).filter(|&e| v.0[e]).collect();
    if open.len() > MAX_SIGN_EDGES {
        return Err(LabError::Capacity {
            what: "sign-assignment brute force",
            needed: 2f64.powi(open.len() as i32),
            limit: 2f64.powi(MAX_SIGN_EDGES as i32),
        });
    }
    // Incidence masks over the compressed index of open edges.
    let mut incident = vec![0u32; net.vertex_count()];
    for (j, &e) in open.iter().enumerate() {
        let (x, y) = net.edge(e);
        if x != y {
            incident[x] |= 1 << j;
            incident[y] |= 1 << j;
        }
    }
    incident.retain(|&m| m != 0);
    let count = (0u32..(1u32 << open.len()))
        .filter(|&neg| incident.iter().all(|&m| (m & neg).count_ones() % 2 == 0))
        .count() as u64;
    let formula = 1u64 << cyc;
    if count != formula {
        return Err(LabError::InvariantViolation(format!(
            "brute-force sign count {count} differs from 2^{cyc}"
        )));
    }
    Ok(count)
}

/// Spin law obtained by giving every FK cluster an independent fair sign.
pub fn color_clusters_exact(net: &Network) -> Result<FiniteDistribution> {
    let n = net.vertex_count();
    let spins = check_capacity("cluster coloring", 2, n, MAX_SPIN_CONFIGS)?;
    check_capacity("cluster coloring", 2, net.edge_count(), MAX_EDGE_CONFIGS)?;
    let fk = exact_measure(net, ModelKind::Fk)?;
    let graph = MaskGraph::new(net);
    let mut acc = vec![Accumulator::new(); spins];
    for (w, &pw) in fk.probs().iter().enumerate() {
        if pw == 0.0 {
            continue;
        }
        let clusters = graph.clusters(w as u64).members();
        let cluster_masks: Vec<usize> = clusters.iter().map(|c| c.iter().map(|&x| 1usize << x).sum()).collect();
        let share = pw * 0.5f64.powi(clusters.len() as i32);
        for coloring in 0usize..(1 << clusters.len()) {
            let s = cluster_masks
                .iter()
                .enumerate()
                .filter(|&(c, _)| coloring >> c & 1 == 1)
                .fold(0, |s, (_, &mask)| s | mask);
            acc[s].add(share);
        }
    }
    let probs: Vec<f64> = acc.iter().map(Accumulator::value).collect();
    Ok(FiniteDistribution::from_raw(Space::spins(n), Some(ModelKind::Ising), probs.clone(), probs, 1.0))
}

/// Largest edge count for the triangular solve (3^16 subset pairs).
const MAX_RECONSTRUCT_EDGES: usize = 16;

/// Tolerated negative rounding dust in a reconstructed table.
const NEGATIVE_DUST: f64 = 1e-9;

/// The unique law Q with `superpose_max(Q, Bernoulli(p)) = fk`.
///
/// Solved by induction on the number of occupied edges:
/// `Q(v) = fk(v) / ∏_{e∉v}(1-p_e) - Σ_{w ⊊ v} Q(w) ∏_{e∈v∖w} p_e`.
pub fn reconstruct_trace_law(fk: &FiniteDistribution, p: &[f64]) -> Result<FiniteDistribution> {
    let m = edge_space(fk, "target law")?;
    if p.len() != m {
        return Err(LabError::contract(format!("{} probabilities for {m} edges", p.len())));
    }
    for (e, &pe) in p.iter().enumerate() {
        if pe >= 1.0 {
            return Err(LabError::Division(format!("p[{e}] = 1 leaves edge {e} never closed")));
        }
        if !(pe >= 0.0) {
            return Err(LabError::contract(format!("p[{e}] = {pe} is not a probability")));
        }
    }
    if m > MAX_RECONSTRUCT_EDGES {
        return Err(LabError::Capacity {
            what: "trace reconstruction",
            needed: 3f64.powi(m as i32),
            limit: 3f64.powi(MAX_RECONSTRUCT_EDGES as i32),
        });
    }
    let size = 1usize << m;
    let full = size - 1;
    // open[s] = ∏_{e∈s} p_e, closed[s] = ∏_{e∈s} (1 - p_e)
    let mut open = vec![1.0; size];
    let mut closed = vec![1.0; size];
    for s in 1..size {
        let e = s.trailing_zeros() as usize;
        let rest = s & (s - 1);
        open[s] = open[rest] * p[e];
        closed[s] = closed[rest] * (1.0 - p[e]);
    }
    let mut order: Vec<usize> = (0..size).collect();
    order.sort_by_key(|&v| (v.count_ones(), v));
    let mut q = vec![0.0; size];
    for &v in &order {
        let mut acc = Accumulator::new();
        acc.add(fk.prob(v) / closed[full & !v]);
        // proper subsets w of v
        let mut w = v;
        while w != 0 {
            w = (w - 1) & v;
            acc.add(-q[w] * open[v & !w]);
        }
        let value = acc.value();
        if value < -NEGATIVE_DUST {
            return Err(LabError::NotSuperposition {
                config: Space::edges(m).config_string(v),
                mass: value,
            });
        }
        q[v] = value.max(0.0);
    }
    Ok(FiniteDistribution::from_raw(Space::edges(m), Some(ModelKind::CurrentTrace), q.clone(), q, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact::bernoulli_probabilities;
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

    const TRIANGLE: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

    #[test]
    fn superpose_identity_element() {
        let b = FiniteDistribution::product(&[0.2, 0.7], None).unwrap();
        let zero = FiniteDistribution::point_mass(Space::edges(2), 0).unwrap();
        let s = superpose_max(&zero, &b).unwrap();
        assert!(tv_distance(&s, &b).unwrap() < 1e-16);
    }

    #[test]
    fn superpose_single_edge_is_tanh() {
        let g = net(2, &[(0, 1)], &[1.0]);
        let trace = exact_measure(&g, ModelKind::CurrentTrace).unwrap();
        let bern = exact_measure(&g, ModelKind::Bernoulli).unwrap();
        let s = superpose_max(&trace, &bern).unwrap();
        let closed_form = 1.0 - (-1f64).exp() / 1f64.cosh();
        assert!((s.prob(1) - closed_form).abs() < 1e-15);
        assert!((s.prob(1) - 1f64.tanh()).abs() < 1e-15);
    }

    #[test]
    fn routes_agree_on_joint_table() {
        let g = net(3, &TRIANGLE, &[0.4, 0.9, 1.2]);
        let trace = exact_measure(&g, ModelKind::CurrentTrace).unwrap();
        let bern = exact_measure(&g, ModelKind::Bernoulli).unwrap();
        let a = superpose_max_with(&trace, &bern, SuperposeRoute::PerEdge).unwrap();
        let b = superpose_max_with(&trace, &bern, SuperposeRoute::Convolution).unwrap();
        assert!(tv_distance(&a, &b).unwrap() < 1e-15);
    }

    #[test]
    fn coupling_on_triangle() {
        let g = net(3, &TRIANGLE, &[0.5; 3]);
        let s = superpose_max(
            &exact_measure(&g, ModelKind::CurrentTrace).unwrap(),
            &exact_measure(&g, ModelKind::Bernoulli).unwrap(),
        )
        .unwrap();
        assert!(tv_distance(&s, &exact_measure(&g, ModelKind::Fk).unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn superpose_dimension_mismatch() {
        let a = FiniteDistribution::point_mass(Space::edges(2), 0).unwrap();
        let b = FiniteDistribution::product(&[0.5], None).unwrap();
        assert!(matches!(superpose_max(&a, &b), Err(LabError::Contract(_))));
        let s = FiniteDistribution::point_mass(Space::spins(2), 0).unwrap();
        assert!(matches!(superpose_max(&s, &a), Err(LabError::Contract(_))));
    }

    #[test]
    fn tv_examples() {
        let a = FiniteDistribution::point_mass(Space::edges(1), 0).unwrap();
        let b = FiniteDistribution::point_mass(Space::edges(1), 1).unwrap();
        assert_eq!(tv_distance(&a, &a).unwrap(), 0.0);
        assert_eq!(tv_distance(&a, &b).unwrap(), 1.0);
        let g = net(2, &[(0, 1)], &[1.0]);
        let tv = tv_distance(
            &exact_measure(&g, ModelKind::CurrentTrace).unwrap(),
            &exact_measure(&g, ModelKind::Fk).unwrap(),
        )
        .unwrap();
        assert!((tv - 0.409648).abs() < 1e-6);
        assert!(matches!(
            tv_distance(&a, &FiniteDistribution::point_mass(Space::spins(1), 0).unwrap()),
            Err(LabError::Contract(_))
        ));
    }

    #[test]
    fn sign_counts() {
        let tri = net(3, &TRIANGLE, &[1.0; 3]);
        assert_eq!(sign_assignment_count(&tri, &EdgeConfig(vec![true; 3])).unwrap(), 2);
        assert_eq!(sign_assignment_count(&tri, &EdgeConfig(vec![true, true, false])).unwrap(), 1);
        let square = net(4, &[(0, 1), (1, 2), (2, 3), (3, 0)], &[1.0; 4]);
        assert_eq!(sign_assignment_count(&square, &EdgeConfig(vec![true; 4])).unwrap(), 2);
        let kite = net(4, &[(0, 1), (1, 2), (2, 0), (1, 3), (3, 2)], &[1.0; 5]);
        assert_eq!(sign_assignment_count(&kite, &EdgeConfig(vec![true; 5])).unwrap(), 4);
        let looped = net(2, &[(0, 1), (1, 1)], &[1.0; 2]);
        assert_eq!(sign_assignment_count(&looped, &EdgeConfig(vec![true; 2])).unwrap(), 2);
    }

    #[test]
    fn coloring_examples() {
        let zero = net(3, &TRIANGLE, &[1.0; 3]).reweighted(vec![0.0; 3]).unwrap();
        let c = color_clusters_exact(&zero).unwrap();
        assert!(c.probs().iter().all(|&p| (p - 0.125).abs() < 1e-16));
        let g = net(2, &[(0, 1)], &[1.0]);
        let c = color_clusters_exact(&g).unwrap();
        assert!((c.prob(0) - 0.440399).abs() < 1e-6);
        assert!(tv_distance(&c, &exact_measure(&g, ModelKind::Ising).unwrap()).unwrap() < 1e-15);
        let t = net(3, &TRIANGLE, &[0.5; 3]);
        assert!(tv_distance(&color_clusters_exact(&t).unwrap(), &exact_measure(&t, ModelKind::Ising).unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn reconstruct_single_edge() {
        let g = net(2, &[(0, 1)], &[1.0]);
        let fk = exact_measure(&g, ModelKind::Fk).unwrap();
        let q = reconstruct_trace_law(&fk, &bernoulli_probabilities(g.beta())).unwrap();
        assert!((q.prob(0) - (1.0 - 1f64.tanh()) * 1f64.exp()).abs() < 1e-15);
        assert!((q.prob(0) - 1.0 / 1f64.cosh()).abs() < 1e-15);
    }

    #[test]
    fn reconstruct_bernoulli_gives_empty() {
        let p = [0.3, 0.6, 0.1];
        let b = FiniteDistribution::product(&p, None).unwrap();
        let q = reconstruct_trace_law(&b, &p).unwrap();
        assert!((q.prob(0) - 1.0).abs() < 1e-15);
        assert!(q.probs()[1..].iter().all(|&x| x.abs() < 1e-15));
    }

    #[test]
    fn reconstruct_triangle() {
        let g = net(3, &TRIANGLE, &[0.5; 3]);
        let fk = exact_measure(&g, ModelKind::Fk).unwrap();
        let q = reconstruct_trace_law(&fk, &bernoulli_probabilities(g.beta())).unwrap();
        let trace = exact_measure(&g, ModelKind::CurrentTrace).unwrap();
        assert!(tv_distance(&q, &trace).unwrap() < 1e-10);
    }

    #[test]
    fn reconstruct_errors() {
        let b = FiniteDistribution::product(&[0.5], None).unwrap();
        assert!(matches!(reconstruct_trace_law(&b, &[1.0]), Err(LabError::Division(_))));
        // A law with less open mass than the bridges alone cannot be a superposition.
        let closed = FiniteDistribution::point_mass(Space::edges(1), 0).unwrap();
        assert!(matches!(reconstruct_trace_law(&closed, &[0.5]), Err(LabError::NotSuperposition { .. })));
        let wide = FiniteDistribution::point_mass(Space::edges(1), 0).unwrap();
        assert!(matches!(reconstruct_trace_law(&wide, &[0.1, 0.2]), Err(LabError::Contract(_))));
    }
}
