//! Undirected networks, activation configurations and vectors indexed over
//! nodes and edges.
//!
//! Nodes are 0-based internally. Everything human-facing (labels, CSV
//! headers, JSON keys) is 1-based: node `k` is `n{k+1}` and the edge between
//! nodes `i < j` is `e{i+1}_{j+1}`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest network for which the 2^|V| configuration space is enumerated.
pub const ENUMERATION_CAP: usize = 20;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TopologyKind {
    Line,
    Star,
    Complete,
    Random,
}

impl FromStr for TopologyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "line" => Ok(TopologyKind::Line),
            "star" => Ok(TopologyKind::Star),
            "complete" | "comp" => Ok(TopologyKind::Complete),
            "random" | "rand" => Ok(TopologyKind::Random),
            other => Err(Error::config(format!("unknown topology kind `{other}`"))),
        }
    }
}

impl fmt::Display for TopologyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TopologyKind::Line => "line",
            TopologyKind::Star => "star",
            TopologyKind::Complete => "complete",
            TopologyKind::Random => "random",
        };
        f.write_str(s)
    }
}

/// A coordinate of a [`NodeEdgeVector`]: either a node or an edge index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Entry {
    Node(usize),
    Edge(usize),
}

/// Fixed undirected simple graph.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    // (neighbor, edge index) pairs, same order as `adjacency`
    incident: Vec<Vec<(usize, usize)>>,
    edge_index: HashMap<(usize, usize), usize>,
}

impl Network {
    /// Builds a network from an edge list. Endpoint order is normalized to
    /// `(min, max)`; self-loops, out-of-range endpoints and duplicates are
    /// rejected.
    pub fn new(node_count: usize, edge_list: &[(usize, usize)]) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::config("a network needs at least one node"));
        }
        let mut edges = Vec::with_capacity(edge_list.len());
        let mut edge_index = HashMap::with_capacity(edge_list.len());
        let mut adjacency = vec![Vec::new(); node_count];
        let mut incident = vec![Vec::new(); node_count];
        for &(a, b) in edge_list {
            if a >= node_count || b >= node_count {
                return Err(Error::config(format!(
                    "edge ({a}, {b}) references a node outside 0..{node_count}"
                )));
            }
            if a == b {
                return Err(Error::config(format!("self-loop on node {a}")));
            }
            let key = (a.min(b), a.max(b));
            if edge_index.contains_key(&key) {
                return Err(Error::config(format!("duplicate edge ({a}, {b})")));
            }
            let e = edges.len();
            edge_index.insert(key, e);
            edges.push(key);
            adjacency[key.0].push(key.1);
            adjacency[key.1].push(key.0);
            incident[key.0].push((key.1, e));
            incident[key.1].push((key.0, e));
        }
        Ok(Network {
            node_count,
            edges,
            adjacency,
            incident,
            edge_index,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// |V| + |E|, the dimension of θ.
    pub fn dim(&self) -> usize {
        self.node_count + self.edges.len()
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge(&self, e: usize) -> (usize, usize) {
        self.edges[e]
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    /// `(neighbor, edge index)` for every edge touching `i`.
    pub fn incident(&self, i: usize) -> &[(usize, usize)] {
        &self.incident[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn edge_between(&self, i: usize, j: usize) -> Option<usize> {
        self.edge_index.get(&(i.min(j), i.max(j))).copied()
    }

    /// All coordinates, nodes first then edges.
    pub fn entries(&self) -> impl Iterator<Item = Entry> + '_ {
        (0..self.node_count)
            .map(Entry::Node)
            .chain((0..self.edges.len()).map(Entry::Edge))
    }

    /// Human-facing 1-based label of a coordinate.
    pub fn label(&self, entry: Entry) -> String {
        match entry {
            Entry::Node(i) => format!("n{}", i + 1),
            Entry::Edge(e) => {
                let (i, j) = self.edges[e];
                format!("e{}_{}", i + 1, j + 1)
            }
        }
    }

    pub fn labels(&self) -> Vec<String> {
        self.entries().map(|en| self.label(en)).collect()
    }

    pub fn check_enumerable(&self, cap: usize) -> Result<()> {
        if self.node_count > cap {
            Err(Error::TooLarge {
                nodes: self.node_count,
                cap,
            })
        } else {
            Ok(())
        }
    }
}

/// Builds one of the standard topologies.
///
/// `line` is the path 1–2–…–n, `star` connects hub node 1 to every other
/// node, `complete` contains every pair and `random` draws `m` distinct
/// pairs uniformly without replacement (a G(n, m) graph), determined by
/// `seed`. Connectivity is not enforced.
pub fn build_topology(kind: TopologyKind, n: usize, m: Option<usize>, seed: u64) -> Result<Network> {
    if n == 0 {
        return Err(Error::config("topology needs n >= 1"));
    }
    let edges: Vec<(usize, usize)> = match kind {
        TopologyKind::Line => (1..n).map(|i| (i - 1, i)).collect(),
        TopologyKind::Star => (1..n).map(|i| (0, i)).collect(),
        TopologyKind::Complete => all_pairs(n),
        TopologyKind::Random => {
            let m = m.ok_or_else(|| Error::config("random topology needs an edge count m"))?;
            let pairs = all_pairs(n);
            if m > pairs.len() {
                return Err(Error::config(format!(
                    "m = {m} exceeds the {} possible edges on {n} nodes",
                    pairs.len()
                )));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut picked = sample(&mut rng, pairs.len(), m).into_vec();
            picked.sort_unstable();
            picked.into_iter().map(|k| pairs[k]).collect()
        }
    };
    Network::new(n, &edges)
}

fn all_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            pairs.push((i, j));
        }
    }
    pairs
}

/// Binary activation vector σ ∈ {0,1}^|V|.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Configuration {
    sigma: Vec<u8>,
}

impl Configuration {
    pub fn zeros(n: usize) -> Self {
        Configuration { sigma: vec![0; n] }
    }

    pub fn new(sigma: Vec<u8>) -> Result<Self> {
        if let Some(bad) = sigma.iter().find(|&&s| s > 1) {
            return Err(Error::usage(format!("configuration entry {bad} is not binary")));
        }
        Ok(Configuration { sigma })
    }

    /// Bit `i` of `mask` is the state of node `i`.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        Configuration {
            sigma: (0..n).map(|i| ((mask >> i) & 1) as u8).collect(),
        }
    }

    pub fn mask(&self) -> u64 {
        self.sigma
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &s)| acc | (u64::from(s) << i))
    }

    pub fn len(&self) -> usize {
        self.sigma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sigma.is_empty()
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.sigma[i] == 1
    }

    pub fn set(&mut self, i: usize, active: bool) {
        self.sigma[i] = u8::from(active);
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.sigma
    }
}

/// Real vector indexed over V ∪ E.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeEdgeVector {
    pub nodes: Vec<f64>,
    pub edges: Vec<f64>,
}

impl NodeEdgeVector {
    pub fn zeros(net: &Network) -> Self {
        Self::filled(net, 0.0)
    }

    pub fn filled(net: &Network, value: f64) -> Self {
        NodeEdgeVector {
            nodes: vec![value; net.node_count()],
            edges: vec![value; net.edge_count()],
        }
    }

    pub fn from_parts(net: &Network, nodes: Vec<f64>, edges: Vec<f64>) -> Result<Self> {
        let v = NodeEdgeVector { nodes, edges };
        v.check_shape(net)?;
        Ok(v)
    }

    /// Inverse of [`NodeEdgeVector::to_flat`].
    pub fn from_flat(net: &Network, flat: &[f64]) -> Result<Self> {
        if flat.len() != net.dim() {
            return Err(Error::usage(format!(
                "expected {} values, got {}",
                net.dim(),
                flat.len()
            )));
        }
        let (n, e) = flat.split_at(net.node_count());
        Ok(NodeEdgeVector {
            nodes: n.to_vec(),
            edges: e.to_vec(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.iter().collect()
    }

    pub fn check_shape(&self, net: &Network) -> Result<()> {
        if self.nodes.len() != net.node_count() || self.edges.len() != net.edge_count() {
            return Err(Error::usage(format!(
                "vector shape ({}, {}) does not match network ({}, {})",
                self.nodes.len(),
                self.edges.len(),
                net.node_count(),
                net.edge_count()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nodes.len() + self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, entry: Entry) -> f64 {
        match entry {
            Entry::Node(i) => self.nodes[i],
            Entry::Edge(e) => self.edges[e],
        }
    }

    pub fn set(&mut self, entry: Entry, value: f64) {
        match entry {
            Entry::Node(i) => self.nodes[i] = value,
            Entry::Edge(e) => self.edges[e] = value,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().chain(self.edges.iter()).copied()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.nodes.iter_mut().chain(self.edges.iter_mut())
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        NodeEdgeVector {
            nodes: self.nodes.iter().map(|&x| f(x)).collect(),
            edges: self.edges.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn dot(&self, other: &Self) -> f64 {
        self.iter().zip(other.iter()).map(|(a, b)| a * b).sum()
    }

    /// `‖self − other‖∞`
    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.iter()
            .zip(other.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.iter().map(f64::abs).fold(0.0, f64::max)
    }
}

/// The coordination configuration φ(σ): node states followed by the
/// products σ_iσ_j over edges.
pub fn phi(net: &Network, config: &Configuration) -> Result<NodeEdgeVector> {
    if config.len() != net.node_count() {
        return Err(Error::usage(format!(
            "configuration has {} entries, network has {} nodes",
            config.len(),
            net.node_count()
        )));
    }
    let nodes = config.as_slice().iter().map(|&s| f64::from(s)).collect();
    let edges = net
        .edges()
        .iter()
        .map(|&(i, j)| f64::from(config.sigma[i] * config.sigma[j]))
        .collect();
    Ok(NodeEdgeVector { nodes, edges })
}

/// All 2^|V| configurations in binary counting order (node 0 is the least
/// significant bit), refusing networks above `ENUMERATION_CAP`.
pub fn enumerate_configurations(net: &Network) -> Result<Vec<Configuration>> {
    net.check_enumerable(ENUMERATION_CAP)?;
    let n = net.node_count();
    Ok((0..1u64 << n).map(|mask| Configuration::from_mask(n, mask)).collect())
}
