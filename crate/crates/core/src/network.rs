//! Weighted multiplex network model.
//!
//! A [`MultiplexNetwork`] holds `N` physical nodes replicated over `L` layers.
//! Each layer carries its own weighted adjacency `W^(k)` and every node carries
//! a symmetric `L x L` block of inter-layer coupling weights. Values are
//! immutable once built; every mutation returns a new network.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predict::PredictedLink;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NodeId(pub usize);

impl NodeId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LayerId(pub usize);

impl LayerId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for LayerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Bijection between node labels and dense indices, in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeTable {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl NodeTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_labels<I, S>(labels: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut table = Self::new();
        for label in labels {
            let label = label.into();
            if table.index.contains_key(&label) {
                return Err(Error::Construction(format!("duplicate node label `{label}`")));
            }
            table.intern(&label);
        }
        Ok(table)
    }

    /// Index of `label`, allocating the next free index on first sight.
    pub fn intern(&mut self, label: &str) -> NodeId {
        if let Some(&i) = self.index.get(label) {
            return NodeId(i);
        }
        let i = self.labels.len();
        self.labels.push(label.to_owned());
        self.index.insert(label.to_owned(), i);
        NodeId(i)
    }

    pub fn get(&self, label: &str) -> Option<NodeId> {
        self.index.get(label).copied().map(NodeId)
    }

    pub fn label(&self, id: NodeId) -> &str {
        &self.labels[id.0]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// One row of an edge list: `flow` units carried from `source` to `target` in `layer`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowEdge {
    pub source: NodeId,
    pub target: NodeId,
    pub layer: LayerId,
    pub flow: f64,
}

/// Sorted, duplicate-free set of layers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LayerSubset(Vec<usize>);

impl LayerSubset {
    pub fn new(mut members: Vec<usize>, n_layers: usize) -> Result<Self> {
        members.sort_unstable();
        if members.is_empty() {
            return Err(Error::InvalidArgument("layer subset must be non-empty".into()));
        }
        if members.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidArgument(format!(
                "layer subset {members:?} has duplicates"
            )));
        }
        if let Some(&m) = members.iter().find(|&&m| m >= n_layers) {
            return Err(Error::InvalidArgument(format!(
                "layer {m} out of range for {n_layers} layers"
            )));
        }
        Ok(Self(members))
    }

    pub fn single(layer: usize) -> Self {
        Self(vec![layer])
    }

    pub fn members(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, layer: usize) -> bool {
        self.0.binary_search(&layer).is_ok()
    }
}

impl fmt::Display for LayerSubset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, m) in self.0.iter().enumerate() {
            if k > 0 {
                f.write_str("+")?;
            }
            write!(f, "{m}")?;
        }
        Ok(())
    }
}

impl FromStr for LayerSubset {
    type Err = Error;

    /// Parses the `0+2+3` form produced by `Display`. Range is checked later.
    fn from_str(s: &str) -> Result<Self> {
        let members = s
            .split('+')
            .map(|p| {
                p.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::InvalidArgument(format!("bad layer subset `{s}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(members, usize::MAX)
    }
}

/// All `C(n_layers, k)` subsets of size `k`, in lexicographic order.
pub fn enumerate_layer_subsets(n_layers: usize, k: usize) -> Result<Vec<LayerSubset>> {
    if k == 0 || k > n_layers {
        return Err(Error::InvalidArgument(format!(
            "subset size {k} must lie in 1..={n_layers}"
        )));
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(LayerSubset(idx.clone()));
        // advance the rightmost index that still has room
        let mut pos = k;
        while pos > 0 {
            pos -= 1;
            if idx[pos] < n_layers - k + pos {
                idx[pos] += 1;
                for q in pos + 1..k {
                    idx[q] = idx[q - 1] + 1;
                }
                break;
            }
            if pos == 0 {
                return Ok(out);
            }
        }
    }
}

/// Where integrated links are placed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Placement {
    /// Every layer of the subset that produced the link.
    #[default]
    SubsetLayers,
    AllLayers,
}

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    out: Vec<BTreeMap<usize, f64>>,
    inc: Vec<BTreeMap<usize, f64>>,
}

impl Layer {
    fn empty(n: usize) -> Self {
        Self {
            out: vec![BTreeMap::new(); n],
            inc: vec![BTreeMap::new(); n],
        }
    }

    fn set(&mut self, i: usize, j: usize, w: f64) {
        if w > 0.0 {
            self.out[i].insert(j, w);
            self.inc[j].insert(i, w);
        } else {
            self.out[i].remove(&j);
            self.inc[j].remove(&i);
        }
    }

    fn get(&self, i: usize, j: usize) -> f64 {
        self.out[i].get(&j).copied().unwrap_or(0.0)
    }

    fn entry_count(&self) -> usize {
        self.out.iter().map(BTreeMap::len).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplexNetwork {
    nodes: NodeTable,
    directed: bool,
    layers: Vec<Layer>,
    /// `coupling[(i * L + a) * L + b]`, zero on `a == b`.
    coupling: Vec<f64>,
}

/// Builds the multiplex from flow edges.
///
/// Duplicate edges are summed. In undirected mode `u -> v` and `v -> u` rows
/// contribute to the same symmetric entry. Every node receives coupling weight
/// `coupling` between each ordered pair of distinct layers. Zero-flow rows add
/// no entry.
pub fn build_multiplex(
    nodes: NodeTable,
    edges: &[FlowEdge],
    n_layers: usize,
    directed: bool,
    coupling: f64,
) -> Result<MultiplexNetwork> {
    if n_layers == 0 {
        return Err(Error::Construction("a multiplex needs at least one layer".into()));
    }
    if !(coupling.is_finite() && coupling >= 0.0) {
        return Err(Error::Construction(format!(
            "coupling must be finite and non-negative, got {coupling}"
        )));
    }
    let n = nodes.len();
    let mut layers = vec![Layer::empty(n); n_layers];
    for e in edges {
        if e.layer.0 >= n_layers {
            return Err(Error::Construction(format!(
                "edge layer {} out of range for {n_layers} layers",
                e.layer
            )));
        }
        if e.source.0 >= n || e.target.0 >= n {
            return Err(Error::Construction(format!(
                "edge endpoint out of range for {n} nodes"
            )));
        }
        if e.source == e.target {
            return Err(Error::Construction(format!(
                "self-loop on node `{}`",
                nodes.label(e.source)
            )));
        }
        if !(e.flow.is_finite() && e.flow >= 0.0) {
            return Err(Error::Construction(format!("invalid flow {}", e.flow)));
        }
        let layer = &mut layers[e.layer.0];
        let (i, j) = (e.source.0, e.target.0);
        let w = layer.get(i, j) + e.flow;
        layer.set(i, j, w);
        if !directed {
            layer.set(j, i, w);
        }
    }
    let mut coupling_block = vec![0.0; n * n_layers * n_layers];
    for i in 0..n {
        for a in 0..n_layers {
            for b in 0..n_layers {
                if a != b {
                    coupling_block[(i * n_layers + a) * n_layers + b] = coupling;
                }
            }
        }
    }
    Ok(MultiplexNetwork {
        nodes,
        directed,
        layers,
        coupling: coupling_block,
    })
}

impl MultiplexNetwork {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    pub fn nodes(&self) -> &NodeTable {
        &self.nodes
    }

    pub fn label(&self, id: NodeId) -> &str {
        self.nodes.label(id)
    }

    /// `W^(layer)[i][j]`, zero when absent.
    pub fn weight(&self, layer: usize, i: usize, j: usize) -> f64 {
        self.layers[layer].get(i, j)
    }

    /// Outgoing entries of row `i` in `layer`, ascending by column.
    pub fn out_edges(&self, layer: usize, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.layers[layer].out[i].iter().map(|(&j, &w)| (j, w))
    }

    pub fn in_edges(&self, layer: usize, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.layers[layer].inc[i].iter().map(|(&j, &w)| (j, w))
    }

    /// True when `u` and `v` are joined in `layer` in either orientation.
    pub fn adjacent(&self, layer: usize, u: usize, v: usize) -> bool {
        let l = &self.layers[layer];
        l.out[u].contains_key(&v) || l.out[v].contains_key(&u)
    }

    /// Number of stored (oriented) non-zero entries of `W^(layer)`.
    pub fn entry_count(&self, layer: usize) -> usize {
        self.layers[layer].entry_count()
    }

    /// `D_(i)^{ab}`.
    pub fn coupling(&self, i: usize, a: usize, b: usize) -> f64 {
        let l = self.n_layers();
        self.coupling[(i * l + a) * l + b]
    }

    /// Replaces `D_(i)^{ab}` and `D_(i)^{ba}` for one node.
    pub fn with_node_coupling(mut self, i: usize, a: usize, b: usize, w: f64) -> Result<Self> {
        let l = self.n_layers();
        if i >= self.n_nodes() || a >= l || b >= l || a == b || !(w.is_finite() && w >= 0.0) {
            return Err(Error::Construction(format!(
                "invalid coupling entry ({i}, {a}, {b}) = {w}"
            )));
        }
        self.coupling[(i * l + a) * l + b] = w;
        self.coupling[(i * l + b) * l + a] = w;
        Ok(self)
    }

    /// Neighbors of `v` in `layer`. Directed mode unions in- and out-neighbors.
    pub fn neighbors(&self, v: NodeId, layer: LayerId) -> BTreeSet<NodeId> {
        let l = &self.layers[layer.0];
        let mut set: BTreeSet<NodeId> = l.out[v.0].keys().map(|&j| NodeId(j)).collect();
        if self.directed {
            set.extend(l.inc[v.0].keys().map(|&j| NodeId(j)));
        }
        set
    }

    /// Neighbors of `v` in the union graph of `layers`.
    pub fn union_neighbors(&self, v: NodeId, layers: &[usize]) -> BTreeSet<NodeId> {
        let mut set = BTreeSet::new();
        for &k in layers {
            set.extend(self.neighbors(v, LayerId(k)));
        }
        set
    }

    /// Edge list in layer, row, column order; undirected layers emit `i < j` only.
    pub fn to_edges(&self) -> Vec<FlowEdge> {
        let mut edges = Vec::new();
        for (k, layer) in self.layers.iter().enumerate() {
            for (i, row) in layer.out.iter().enumerate() {
                for (&j, &w) in row {
                    if self.directed || i < j {
                        edges.push(FlowEdge {
                            source: NodeId(i),
                            target: NodeId(j),
                            layer: LayerId(k),
                            flow: w,
                        });
                    }
                }
            }
        }
        edges
    }

    pub fn is_symmetric(&self) -> bool {
        self.layers.iter().all(|layer| {
            layer
                .out
                .iter()
                .enumerate()
                .all(|(i, row)| row.iter().all(|(&j, &w)| layer.get(j, i) == w))
        })
    }
}

/// Removes every edge of `layer` incident to a victim. Other layers and the
/// node set are untouched.
pub fn knockout_nodes(
    net: &MultiplexNetwork,
    victims: &BTreeSet<NodeId>,
    layer: LayerId,
) -> MultiplexNetwork {
    let mut out = net.clone();
    let target = &mut out.layers[layer.0];
    for v in victims {
        let outgoing: Vec<usize> = target.out[v.0].keys().copied().collect();
        for j in outgoing {
            target.set(v.0, j, 0.0);
        }
        let incoming: Vec<usize> = target.inc[v.0].keys().copied().collect();
        for i in incoming {
            target.set(i, v.0, 0.0);
        }
    }
    out
}

/// Adds predicted links as edges. Existing entries keep `max(existing, new)`;
/// both orientations are written in either mode.
pub fn integrate_links(
    net: &MultiplexNetwork,
    links: &[PredictedLink],
    placement: Placement,
) -> MultiplexNetwork {
    let mut out = net.clone();
    let all: Vec<usize> = (0..net.n_layers()).collect();
    for link in links {
        let layers = match placement {
            Placement::SubsetLayers => link.subset.members(),
            Placement::AllLayers => &all[..],
        };
        let (u, v) = (link.u.0, link.v.0);
        for &k in layers {
            let layer = &mut out.layers[k];
            let uv = layer.get(u, v).max(link.weight);
            layer.set(u, v, uv);
            let vu = layer.get(v, u).max(link.weight);
            layer.set(v, u, vu);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::predict::Algorithm;

    fn table(n: usize) -> NodeTable {
        NodeTable::from_labels((0..n).map(|i| format!("n{i}"))).unwrap()
    }

    fn edge(u: usize, v: usize, layer: usize, flow: f64) -> FlowEdge {
        FlowEdge {
            source: NodeId(u),
            target: NodeId(v),
            layer: LayerId(layer),
            flow,
        }
    }

    fn link(u: usize, v: usize, w: f64, subset: &[usize]) -> PredictedLink {
        PredictedLink {
            u: NodeId(u),
            v: NodeId(v),
            raw_score: 1.0,
            normalized_score: 1.0,
            weight: w,
            algorithm: Algorithm::Jaccard,
            subset: LayerSubset::new(subset.to_vec(), 8).unwrap(),
            stage: 1,
            contributors: Vec::new(),
        }
    }

    fn triangle(n_layers: usize) -> MultiplexNetwork {
        let edges = [edge(0, 1, 0, 1.0), edge(1, 2, 0, 1.0), edge(0, 2, 0, 1.0)];
        build_multiplex(table(3), &edges, n_layers, false, 1.0).unwrap()
    }

    #[test]
    fn undirected_edge_is_symmetrized() {
        let net = build_multiplex(table(2), &[edge(0, 1, 0, 7.0)], 1, false, 1.0).unwrap();
        assert_eq!(net.weight(0, 0, 1), 7.0);
        assert_eq!(net.weight(0, 1, 0), 7.0);
    }

    #[test]
    fn duplicate_edges_sum() {
        let edges = [edge(0, 1, 0, 3.0), edge(0, 1, 0, 3.0)];
        let net = build_multiplex(table(2), &edges, 1, true, 1.0).unwrap();
        assert_eq!(net.weight(0, 0, 1), 6.0);
        assert_eq!(net.weight(0, 1, 0), 0.0);
    }

    #[test]
    fn uniform_coupling_fill() {
        let net = build_multiplex(table(2), &[], 3, false, 1.0).unwrap();
        for i in 0..2 {
            let mut off = 0;
            for a in 0..3 {
                for b in 0..3 {
                    let d = net.coupling(i, a, b);
                    if a == b {
                        assert_eq!(d, 0.0);
                    } else {
                        assert_eq!(d, 1.0);
                        off += 1;
                    }
                }
            }
            assert_eq!(off, 6);
        }
    }

    #[test]
    fn out_of_range_layer_is_rejected() {
        let err = build_multiplex(table(2), &[edge(0, 1, 2, 1.0)], 2, false, 1.0);
        assert!(matches!(err, Err(Error::Construction(_))));
    }

    #[test]
    fn neighbor_sets() {
        let net = triangle(1);
        for v in 0..3 {
            let expected: BTreeSet<_> = (0..3).filter(|&u| u != v).map(NodeId).collect();
            assert_eq!(net.neighbors(NodeId(v), LayerId(0)), expected);
        }
        let lonely = build_multiplex(table(3), &[edge(0, 1, 0, 1.0)], 1, false, 1.0).unwrap();
        assert!(lonely.neighbors(NodeId(2), LayerId(0)).is_empty());

        let edges = [edge(0, 1, 0, 1.0), edge(1, 2, 0, 1.0)];
        let directed = build_multiplex(table(3), &edges, 1, true, 1.0).unwrap();
        let expected: BTreeSet<_> = [NodeId(0), NodeId(2)].into();
        assert_eq!(directed.neighbors(NodeId(1), LayerId(0)), expected);
    }

    #[test]
    fn subset_counts() {
        assert_eq!(enumerate_layer_subsets(5, 1).unwrap().len(), 5);
        assert_eq!(enumerate_layer_subsets(5, 2).unwrap().len(), 10);
        let three = enumerate_layer_subsets(5, 3).unwrap();
        assert_eq!(three.len(), 10);
        assert_eq!(three[0].members(), &[0, 1, 2]);
        assert_eq!(three[9].members(), &[2, 3, 4]);
        assert!(three.windows(2).all(|w| w[0] < w[1]));
        assert!(enumerate_layer_subsets(2, 3).is_err());
        assert_eq!(enumerate_layer_subsets(1, 1).unwrap(), vec![LayerSubset::single(0)]);
    }

    #[test]
    fn subset_text_form() {
        let s: LayerSubset = "2+0".parse().unwrap();
        assert_eq!(s.members(), &[0, 2]);
        assert_eq!(s.to_string(), "0+2");
        assert!("1+1".parse::<LayerSubset>().is_err());
        assert!("".parse::<LayerSubset>().is_err());
    }

    #[test]
    fn knockout_cases() {
        let net = triangle(2);
        assert_eq!(knockout_nodes(&net, &BTreeSet::new(), LayerId(0)), net);

        let all: BTreeSet<_> = (0..3).map(NodeId).collect();
        let wiped = knockout_nodes(&net, &all, LayerId(0));
        assert_eq!(wiped.entry_count(0), 0);

        let one = knockout_nodes(&net, &[NodeId(0)].into(), LayerId(0));
        assert_eq!(one.to_edges().len(), 1);
        assert_eq!(one.weight(0, 1, 2), 1.0);
        assert_eq!(one.n_nodes(), 3);
    }

    #[test]
    fn integration_cases() {
        let edges = [edge(0, 1, 0, 8.0)];
        let net = build_multiplex(table(3), &edges, 2, false, 1.0).unwrap();
        assert_eq!(integrate_links(&net, &[], Placement::SubsetLayers), net);

        let added = integrate_links(&net, &[link(1, 2, 5.0, &[1])], Placement::SubsetLayers);
        assert_eq!(added.weight(1, 1, 2), 5.0);
        assert_eq!(added.weight(1, 2, 1), 5.0);
        assert_eq!(added.weight(0, 1, 2), 0.0);

        let kept = integrate_links(&net, &[link(0, 1, 5.0, &[0])], Placement::SubsetLayers);
        assert_eq!(kept.weight(0, 0, 1), 8.0);

        let everywhere = integrate_links(&net, &[link(1, 2, 5.0, &[1])], Placement::AllLayers);
        assert_eq!(everywhere.weight(0, 1, 2), 5.0);
    }

    #[test]
    fn directed_integration_adds_both_orientations() {
        let net = build_multiplex(table(2), &[], 1, true, 0.0).unwrap();
        let out = integrate_links(&net, &[link(0, 1, 2.0, &[0])], Placement::SubsetLayers);
        assert_eq!(out.weight(0, 0, 1), 2.0);
        assert_eq!(out.weight(0, 1, 0), 2.0);
    }

    #[test]
    fn export_orders_and_dedups_undirected() {
        let edges = [edge(2, 0, 0, 1.5), edge(0, 1, 1, 2.0)];
        let net = build_multiplex(table(3), &edges, 2, false, 1.0).unwrap();
        let out = net.to_edges();
        assert_eq!(out, vec![edge(0, 2, 0, 1.5), edge(0, 1, 1, 2.0)]);
    }
}
