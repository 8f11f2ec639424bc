//! Finite weighted multigraphs and the combinatorial primitives on them.
//!
//! Edge identity is positional: parallel edges and self-loops are distinct
//! entries of the edge list. The boundary vertex `o` of a pinned network is
//! implicit; only the attachment `(x0, c)` is stored.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Attachment of vertex `vertex` to the implicit boundary vertex.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pinning {
    pub vertex: usize,
    pub conductance: f64,
}

/// On-disk description of a network, as read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkSpec {
    pub vertices: usize,
    pub edges: Vec<[usize; 2]>,
    pub beta: Vec<f64>,
    #[serde(default)]
    pub pinning: Option<Pinning>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
    beta: Vec<f64>,
    pinning: Option<Pinning>,
}

impl Network {
    /// Validates a spec: ids in range, weights finite and nonnegative, and
    /// the subgraph of positive-weight edges connected.
    pub fn build(spec: &NetworkSpec) -> Result<Network> {
        let net = Self::from_parts(
            spec.vertices,
            spec.edges.iter().map(|e| (e[0], e[1])).collect(),
            spec.beta.clone(),
            spec.pinning,
        )?;
        let positive = EdgeConfig::from_fn(net.edge_count(), |e| net.beta[e] > 0.0);
        let clusters = components(&net, &positive)?;
        if clusters.count > 1 {
            let component = (0..net.vertex_count)
                .filter(|&x| clusters.labels[x] != clusters.labels[0])
                .collect::<Vec<_>>();
            let first = clusters.labels[component[0]];
            return Err(LabError::Disconnected {
                component: component
                    .into_iter()
                    .filter(|&x| clusters.labels[x] == first)
                    .collect(),
            });
        }
        Ok(net)
    }

    fn from_parts(
        vertex_count: usize,
        edges: Vec<(usize, usize)>,
        beta: Vec<f64>,
        pinning: Option<Pinning>,
    ) -> Result<Network> {
        if vertex_count == 0 {
            return Err(LabError::validation("vertices", "must be positive"));
        }
        if edges.len() != beta.len() {
            return Err(LabError::validation(
                "beta",
                format!("{} weights for {} edges", beta.len(), edges.len()),
            ));
        }
        for (i, &(u, v)) in edges.iter().enumerate() {
            if u >= vertex_count || v >= vertex_count {
                return Err(LabError::validation(
                    format!("edges[{i}]"),
                    format!("vertex id out of range 0..{vertex_count}"),
                ));
            }
        }
        for (i, &b) in beta.iter().enumerate() {
            if !b.is_finite() || b < 0.0 {
                return Err(LabError::validation(
                    format!("beta[{i}]"),
                    format!("weight must be finite and nonnegative, got {b}"),
                ));
            }
        }
        if let Some(p) = pinning {
            if p.vertex >= vertex_count {
                return Err(LabError::validation(
                    "pinning.vertex",
                    format!("vertex id out of range 0..{vertex_count}"),
                ));
            }
            if !p.conductance.is_finite() || p.conductance < 0.0 {
                return Err(LabError::validation(
                    "pinning.conductance",
                    format!("must be finite and nonnegative, got {}", p.conductance),
                ));
            }
        }
        Ok(Network {
            vertex_count,
            edges,
            beta,
            pinning,
        })
    }

    /// Parses the JSON network format and validates it.
    pub fn from_json(text: &str) -> Result<Network> {
        let spec: NetworkSpec = serde_json::from_str(text)
            .map_err(|e| LabError::validation("network JSON", e.to_string()))?;
        Self::build(&spec)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Network> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| LabError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| match e {
            LabError::Validation { field, message } => LabError::Validation {
                field: format!("{}: {field}", path.display()),
                message,
            },
            other => other,
        })
    }

    pub fn to_spec(&self) -> NetworkSpec {
        NetworkSpec {
            vertices: self.vertex_count,
            edges: self.edges.iter().map(|&(u, v)| [u, v]).collect(),
            beta: self.beta.clone(),
            pinning: self.pinning,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_spec()).expect("network spec serializes")
    }

    /// Same topology and pinning with new weights. Zero weights are allowed,
    /// so the result need not satisfy the positive-weight connectivity check.
    pub fn reweighted(&self, beta: Vec<f64>) -> Result<Network> {
        Self::from_parts(self.vertex_count, self.edges.clone(), beta, self.pinning)
    }

    pub fn with_pinning(&self, pinning: Option<Pinning>) -> Result<Network> {
        Self::from_parts(
            self.vertex_count,
            self.edges.clone(),
            self.beta.clone(),
            pinning,
        )
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn pinning(&self) -> Option<Pinning> {
        self.pinning
    }

    /// Endpoint of `e` opposite to `x` (itself for a self-loop).
    pub fn other_end(&self, e: usize, x: usize) -> usize {
        let (u, v) = self.edges[e];
        if u == x {
            v
        } else {
            u
        }
    }

    /// Edge indices incident to each vertex; a self-loop is listed once.
    pub fn incidence(&self) -> Vec<Vec<usize>> {
        let mut inc = vec![Vec::new(); self.vertex_count];
        for (e, &(u, v)) in self.edges.iter().enumerate() {
            inc[u].push(e);
            if v != u {
                inc[v].push(e);
            }
        }
        inc
    }

    pub(crate) fn check_vertex(&self, x: usize) -> Result<()> {
        if x >= self.vertex_count {
            return Err(LabError::contract(format!(
                "vertex {x} out of range 0..{}",
                self.vertex_count
            )));
        }
        Ok(())
    }
}

/// Open/closed state per edge.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeConfig(pub Vec<bool>);

impl EdgeConfig {
    pub fn from_fn(len: usize, f: impl FnMut(usize) -> bool) -> Self {
        EdgeConfig((0..len).map(f).collect())
    }

    /// Edge `e` is open iff bit `e` of `mask` is set.
    pub fn from_mask(mask: u64, len: usize) -> Self {
        Self::from_fn(len, |e| mask >> e & 1 == 1)
    }

    pub fn to_mask(&self) -> u64 {
        self.0
            .iter()
            .enumerate()
            .fold(0, |m, (e, &b)| if b { m | 1 << e } else { m })
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn open_count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

/// Per-edge value in {-1, 0, +1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedEdgeConfig(pub Vec<i8>);

/// Per-vertex spin in {-1, +1}.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SpinConfig(pub Vec<i8>);

/// Vertex partition; `labels[x]` is the smallest vertex id in x's cluster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Clusters {
    pub labels: Vec<usize>,
    pub count: usize,
}

impl Clusters {
    /// Singleton clusters.
    pub fn discrete(n: usize) -> Self {
        Clusters {
            labels: (0..n).collect(),
            count: n,
        }
    }

    /// Validates an arbitrary labelling and canonicalizes it.
    pub fn from_labels(labels: &[usize]) -> Result<Self> {
        let n = labels.len();
        if n == 0 {
            return Err(LabError::contract("empty partition"));
        }
        let mut uf = UnionFind::new(n);
        let mut first = std::collections::HashMap::new();
        for (x, &l) in labels.iter().enumerate() {
            if let Some(&y) = first.get(&l) {
                uf.union(x, y);
            } else {
                first.insert(l, x);
            }
        }
        Ok(uf.into_clusters())
    }

    /// Vertex lists per cluster, ordered by smallest member.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = Vec::new();
        let mut index = vec![usize::MAX; self.labels.len()];
        for (x, &l) in self.labels.iter().enumerate() {
            if index[l] == usize::MAX {
                index[l] = out.len();
                out.push(Vec::new());
            }
            out[index[l]].push(x);
        }
        out
    }
}

/// Union-find whose roots are always the smallest id of their set.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        while self.parent[x] != root {
            let next = self.parent[x];
            self.parent[x] = root;
            x = next;
        }
        root
    }

    /// Returns true if the two sets were distinct.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi] = lo;
        true
    }

    pub fn into_clusters(mut self) -> Clusters {
        let n = self.parent.len();
        let labels: Vec<usize> = (0..n).map(|x| self.find(x)).collect();
        let count = labels.iter().enumerate().filter(|&(x, &l)| x == l).count();
        Clusters { labels, count }
    }
}

fn check_len(net: &Network, len: usize) -> Result<()> {
    if len != net.edge_count() {
        return Err(LabError::contract(format!(
            "configuration has {len} entries, network has {} edges",
            net.edge_count()
        )));
    }
    Ok(())
}

/// Connected components of the open subgraph.
pub fn components(net: &Network, w: &EdgeConfig) -> Result<Clusters> {
    check_len(net, w.len())?;
    let mut uf = UnionFind::new(net.vertex_count());
    for (e, &(u, v)) in net.edges().iter().enumerate() {
        if w.0[e] {
            uf.union(u, v);
        }
    }
    Ok(uf.into_clusters())
}

/// o(v) + k(v) - |X|: the number of independent cycles of the open subgraph.
pub fn cyclomatic_number(net: &Network, v: &EdgeConfig) -> Result<usize> {
    let k = components(net, v)?.count;
    Ok(v.open_count() + k - net.vertex_count())
}

/// Edge data for [`incidence_parity_check`].
#[derive(Debug, Clone, Copy)]
pub enum EdgeValues<'a> {
    /// Entries in {-1, 0, +1}; parity counts the -1 entries.
    Signs(&'a [i8]),
    /// Nonnegative integer currents; parity counts their sum.
    Current(&'a [u64]),
}

/// True iff at every vertex the incident sum is even. Self-loops count twice
/// and so never break parity.
pub fn incidence_parity_check(net: &Network, values: EdgeValues<'_>) -> Result<bool> {
    let mut odd = vec![false; net.vertex_count()];
    match values {
        EdgeValues::Signs(s) => {
            check_len(net, s.len())?;
            for (e, &x) in s.iter().enumerate() {
                if !(-1..=1).contains(&x) {
                    return Err(LabError::contract(format!(
                        "sign entry {x} at edge {e} is not in {{-1, 0, +1}}"
                    )));
                }
                let (u, v) = net.edge(e);
                if x == -1 && u != v {
                    odd[u] ^= true;
                    odd[v] ^= true;
                }
            }
        }
        EdgeValues::Current(n) => {
            check_len(net, n.len())?;
            for (e, &x) in n.iter().enumerate() {
                let (u, v) = net.edge(e);
                if x & 1 == 1 && u != v {
                    odd[u] ^= true;
                    odd[v] ^= true;
                }
            }
        }
    }
    Ok(odd.iter().all(|&o| !o))
}

/// Bitmask form of the graph for enumeration loops (edge count ≤ 64).
#[derive(Debug, Clone)]
pub(crate) struct MaskGraph {
    pub n: usize,
    pub ends: Vec<(usize, usize)>,
    /// Per vertex: mask of incident non-loop edges.
    pub incident: Vec<u64>,
}

impl MaskGraph {
    pub fn new(net: &Network) -> Self {
        assert!(net.edge_count() <= 64);
        let mut incident = vec![0u64; net.vertex_count()];
        for (e, &(u, v)) in net.edges().iter().enumerate() {
            if u != v {
                incident[u] |= 1 << e;
                incident[v] |= 1 << e;
            }
        }
        MaskGraph {
            n: net.vertex_count(),
            ends: net.edges().to_vec(),
            incident,
        }
    }

    /// Cluster count of the open subgraph `mask`.
    pub fn cluster_count(&self, mask: u64) -> usize {
        self.clusters(mask).count
    }

    pub fn clusters(&self, mut mask: u64) -> Clusters {
        let mut uf = UnionFind::new(self.n);
        while mask != 0 {
            let e = mask.trailing_zeros() as usize;
            mask &= mask - 1;
            let (u, v) = self.ends[e];
            uf.union(u, v);
        }
        uf.into_clusters()
    }

    /// Every vertex has an even number of `odd_mask` edges (loops ignored).
    pub fn is_even(&self, odd_mask: u64) -> bool {
        self.incident
            .iter()
            .all(|&inc| (inc & odd_mask).count_ones() % 2 == 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn net(n: usize, edges: &[(usize, usize)], beta: f64) -> Network {
        Network::build(&NetworkSpec {
            vertices: n,
            edges: edges.iter().map(|&(u, v)| [u, v]).collect(),
            beta: vec![beta; edges.len()],
            pinning: None,
        })
        .unwrap()
    }

    fn triangle() -> Network {
        net(3, &[(0, 1), (1, 2), (2, 0)], 0.5)
    }

    #[test]
    fn builds_minimal_and_triangle() {
        let single = net(2, &[(0, 1)], 1.0);
        assert_eq!(single.vertex_count(), 2);
        assert_eq!(single.edge_count(), 1);
        assert_eq!(triangle().edge_count(), 3);
    }

    #[test]
    fn rejects_disconnected() {
        let err = Network::build(&NetworkSpec {
            vertices: 2,
            edges: vec![],
            beta: vec![],
            pinning: None,
        })
        .unwrap_err();
        assert!(err.to_string().contains("disconnected"), "{err}");
        match err {
            LabError::Disconnected { component } => assert_eq!(component, vec![1]),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn zero_weight_edges_do_not_connect() {
        let err = Network::build(&NetworkSpec {
            vertices: 3,
            edges: vec![[0, 1], [1, 2]],
            beta: vec![1.0, 0.0],
            pinning: None,
        })
        .unwrap_err();
        assert!(matches!(err, LabError::Disconnected { .. }));
    }

    #[test]
    fn rejects_negative_weight_with_index() {
        let err = Network::build(&NetworkSpec {
            vertices: 2,
            edges: vec![[0, 1], [0, 1]],
            beta: vec![1.0, -0.5],
            pinning: None,
        })
        .unwrap_err();
        assert!(err.to_string().contains("beta[1]"), "{err}");
    }

    #[test]
    fn rejects_out_of_range_vertex() {
        let err = Network::from_json(r#"{"vertices":2,"edges":[[0,2]],"beta":[1.0]}"#)
            .unwrap_err();
        assert!(err.to_string().contains("edges[0]"), "{err}");
    }

    #[test]
    fn json_roundtrip_with_pinning() {
        let text = r#"{"vertices":2,"edges":[[0,1]],"beta":[1.0],"pinning":{"vertex":0,"conductance":2.0}}"#;
        let n = Network::from_json(text).unwrap();
        assert_eq!(n.pinning().unwrap().conductance, 2.0);
        assert_eq!(Network::from_json(&n.to_json()).unwrap(), n);
        let null = r#"{"vertices":1,"edges":[],"beta":[],"pinning":null}"#;
        assert!(Network::from_json(null).unwrap().pinning().is_none());
    }

    #[test]
    fn unknown_field_is_named() {
        let err = Network::from_json(r#"{"vertices":1,"edges":[],"beta":[],"weights":[]}"#)
            .unwrap_err();
        assert!(err.to_string().contains("weights"), "{err}");
    }

    #[test]
    fn triangle_components() {
        let t = triangle();
        let all = EdgeConfig(vec![true; 3]);
        let none = EdgeConfig(vec![false; 3]);
        let one = EdgeConfig(vec![false, true, false]);
        assert_eq!(components(&t, &all).unwrap().count, 1);
        assert_eq!(components(&t, &none).unwrap().count, 3);
        let c = components(&t, &one).unwrap();
        assert_eq!(c.count, 2);
        assert_eq!(c.labels, vec![0, 1, 1]);
    }

    #[test]
    fn components_length_mismatch() {
        assert!(matches!(
            components(&triangle(), &EdgeConfig(vec![true])),
            Err(LabError::Contract(_))
        ));
    }

    #[test]
    fn cyclomatic_examples() {
        let t = triangle();
        assert_eq!(cyclomatic_number(&t, &EdgeConfig(vec![true; 3])).unwrap(), 1);
        assert_eq!(
            cyclomatic_number(&t, &EdgeConfig(vec![true, true, false])).unwrap(),
            0
        );
        let square = net(4, &[(0, 1), (1, 2), (2, 3), (3, 0)], 1.0);
        assert_eq!(
            cyclomatic_number(&square, &EdgeConfig(vec![true; 4])).unwrap(),
            1
        );
        let looped = net(2, &[(0, 1), (1, 1), (0, 1)], 1.0);
        assert_eq!(
            cyclomatic_number(&looped, &EdgeConfig(vec![true; 3])).unwrap(),
            2
        );
    }

    #[test]
    fn parity_examples() {
        let single = net(2, &[(0, 1)], 1.0);
        assert!(!incidence_parity_check(&single, EdgeValues::Current(&[1])).unwrap());
        assert!(incidence_parity_check(&single, EdgeValues::Current(&[2])).unwrap());
        assert!(incidence_parity_check(&triangle(), EdgeValues::Signs(&[-1, -1, -1])).unwrap());
        assert!(!incidence_parity_check(&triangle(), EdgeValues::Signs(&[-1, 1, 1])).unwrap());
        let looped = net(1, &[(0, 0)], 1.0);
        assert!(incidence_parity_check(&looped, EdgeValues::Current(&[3])).unwrap());
    }

    #[test]
    fn parity_mode_mismatch() {
        assert!(matches!(
            incidence_parity_check(&triangle(), EdgeValues::Signs(&[2, 0, 0])),
            Err(LabError::Contract(_))
        ));
    }

    #[test]
    fn clusters_from_labels_canonicalizes() {
        let c = Clusters::from_labels(&[7, 3, 7, 9]).unwrap();
        assert_eq!(c.labels, vec![0, 1, 0, 3]);
        assert_eq!(c.count, 3);
        assert_eq!(c.members(), vec![vec![0, 2], vec![1], vec![3]]);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn arb_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>, u64)> {
            (1usize..7).prop_flat_map(|n| {
                (
                    Just(n),
                    proptest::collection::vec((0..n, 0..n), 0..10),
                    any::<u64>(),
                )
            })
        }

        fn raw(n: usize, edges: &[(usize, usize)]) -> Network {
            Network::from_parts(n, edges.to_vec(), vec![0.0; edges.len()], None).unwrap()
        }

        proptest! {
            #[test]
            fn partition_is_independent_of_edge_order((n, edges, mask) in arb_graph(), seed in any::<u64>()) {
                let m = edges.len();
                let w = EdgeConfig::from_mask(mask, m);
                let a = components(&raw(n, &edges), &w).unwrap();
                let mut perm: Vec<usize> = (0..m).collect();
                let mut s = seed;
                for i in (1..m).rev() {
                    s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                    perm.swap(i, (s >> 33) as usize % (i + 1));
                }
                let shuffled: Vec<_> = perm.iter().map(|&e| edges[e]).collect();
                let w2 = EdgeConfig(perm.iter().map(|&e| w.0[e]).collect());
                prop_assert_eq!(a, components(&raw(n, &shuffled), &w2).unwrap());
            }

            #[test]
            fn cyclomatic_steps_by_zero_or_one((n, edges, mask) in arb_graph()) {
                let g = raw(n, &edges);
                let w = EdgeConfig::from_mask(mask, edges.len());
                let c = cyclomatic_number(&g, &w).unwrap();
                for e in 0..edges.len() {
                    if !w.0[e] {
                        let mut w2 = w.clone();
                        w2.0[e] = true;
                        let c2 = cyclomatic_number(&g, &w2).unwrap();
                        prop_assert!(c2 == c || c2 == c + 1);
                    }
                }
            }

            #[test]
            fn parity_ignores_adding_two((n, edges, _m) in arb_graph(), cur in proptest::collection::vec(0u64..5, 10), at in 0usize..10) {
                let g = raw(n, &edges);
                let m = edges.len();
                let mut cur = cur[..m].to_vec();
                let before = incidence_parity_check(&g, EdgeValues::Current(&cur)).unwrap();
                if m > 0 {
                    cur[at % m] += 2;
                }
                prop_assert_eq!(before, incidence_parity_check(&g, EdgeValues::Current(&cur)).unwrap());
            }
        }
    }
}
