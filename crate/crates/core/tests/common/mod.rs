#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use muxnav::network::FlowEdge;
use muxnav::{build_multiplex, LayerId, MultiplexNetwork, NodeId, NodeTable};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn labels(n: usize) -> NodeTable {
    NodeTable::from_labels((0..n).map(|i| format!("v{i:02}"))).unwrap()
}

pub fn edge(layer: usize, s: usize, t: usize, flow: f64) -> FlowEdge {
    FlowEdge {
        source: NodeId(s),
        target: NodeId(t),
        layer: LayerId(layer),
        flow,
    }
}

pub fn network(n: usize, layers: usize, directed: bool, edges: &[FlowEdge]) -> MultiplexNetwork {
    build_multiplex(labels(n), edges, layers, directed, 1.0).unwrap()
}

/// Each ordered pair `s != t` appears in each layer with probability `p`.
pub fn random_edges(r: &mut ChaCha8Rng, n: usize, layers: usize, p: f64) -> Vec<FlowEdge> {
    let mut out = Vec::new();
    for layer in 0..layers {
        for s in 0..n {
            for t in 0..n {
                if s != t && r.random_bool(p) {
                    out.push(edge(layer, s, t, r.random_range(0.5..5.0)));
                }
            }
        }
    }
    out
}

/// A random spanning tree on layer 0 plus random extra edges everywhere, so
/// the undirected union is connected through layer 0.
pub fn random_connected(r: &mut ChaCha8Rng, n: usize, layers: usize, p: f64) -> Vec<FlowEdge> {
    let mut out = Vec::new();
    for v in 1..n {
        let parent = r.random_range(0..v);
        out.push(edge(0, parent, v, r.random_range(0.5..5.0)));
    }
    for layer in 0..layers {
        for s in 0..n {
            for t in s + 1..n {
                if r.random_bool(p) {
                    out.push(edge(layer, s, t, r.random_range(0.5..5.0)));
                }
            }
        }
    }
    out
}

/// Independent reference for exclusive-neighbour scores, working straight
/// from the edge list with dense boolean adjacency.
pub struct Oracle {
    n: usize,
    layers: usize,
    adj: Vec<Vec<Vec<bool>>>,
}

impl Oracle {
    pub fn new(n: usize, layers: usize, edges: &[FlowEdge]) -> Self {
        let mut adj = vec![vec![vec![false; n]; n]; layers];
        for e in edges {
            if e.flow > 0.0 {
                adj[e.layer.0][e.source.0][e.target.0] = true;
                adj[e.layer.0][e.target.0][e.source.0] = true;
            }
        }
        Self { n, layers, adj }
    }

    fn exclusive(&self, v: usize, subset: &[usize]) -> BTreeSet<usize> {
        (0..self.n)
            .filter(|&w| {
                let inside = subset.iter().any(|&a| self.adj[a][v][w]);
                let outside = (0..self.layers).filter(|a| !subset.contains(a)).any(|a| self.adj[a][v][w]);
                inside && !outside
            })
            .collect()
    }

    fn degree(&self, v: usize, subset: &[usize]) -> usize {
        (0..self.n).filter(|&w| subset.iter().any(|&a| self.adj[a][v][w])).count()
    }

    fn candidate(&self, u: usize, v: usize, subset: &[usize]) -> bool {
        !subset.iter().any(|&a| self.adj[a][u][v])
    }

    pub fn jaccard(&self, subset: &[usize]) -> BTreeMap<(usize, usize), f64> {
        let mut out = BTreeMap::new();
        for u in 0..self.n {
            for v in u + 1..self.n {
                if !self.candidate(u, v, subset) {
                    continue;
                }
                let (xu, xv) = (self.exclusive(u, subset), self.exclusive(v, subset));
                let union = xu.union(&xv).count();
                if union > 0 {
                    out.insert((u, v), xu.intersection(&xv).count() as f64 / union as f64);
                }
            }
        }
        out
    }

    pub fn adamic_adar(&self, subset: &[usize]) -> BTreeMap<(usize, usize), f64> {
        let mut out = BTreeMap::new();
        for u in 0..self.n {
            for v in u + 1..self.n {
                if !self.candidate(u, v, subset) {
                    continue;
                }
                let (xu, xv) = (self.exclusive(u, subset), self.exclusive(v, subset));
                let shared: Vec<usize> = xu.intersection(&xv).copied().collect();
                if shared.is_empty() {
                    continue;
                }
                let score = shared
                    .iter()
                    .map(|&w| self.degree(w, subset))
                    .filter(|&d| d > 1)
                    .map(|d| 1.0 / (d as f64).ln())
                    .sum();
                out.insert((u, v), score);
            }
        }
        out
    }
}

/// Every subset of `0..layers` with `k` members, lexicographic.
pub fn subsets(layers: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, layers: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for a in start..layers {
            cur.push(a);
            go(a + 1, layers, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, layers, k, &mut Vec::new(), &mut out);
    out
}

pub fn toy_path() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("data/toy.csv")
}
