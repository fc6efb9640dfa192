//! Exclusive-neighbor link prediction over layer subsets.
//!
//! For a subset `D` of layers, the exclusive neighborhood of `v` keeps the
//! nodes joined to `v` somewhere inside `D` and nowhere outside it. The
//! modified Jaccard and Adamic-Adar scorers replace ordinary neighborhoods with
//! exclusive ones and score every pair that is a non-edge in the union graph
//! of `D`. Scores are normalized per (algorithm, subset) group, filtered by a
//! strict threshold, weighted by the flows around the shared exclusive
//! neighbors, and finally merged into one link per node pair.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{enumerate_layer_subsets, LayerId, LayerSubset, MultiplexNetwork, NodeId, NodeTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Jaccard,
    AdamicAdar,
    JaccardClassic,
    #[serde(rename = "aa_classic")]
    AdamicAdarClassic,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Jaccard => "jaccard",
            Algorithm::AdamicAdar => "adamic_adar",
            Algorithm::JaccardClassic => "jaccard_classic",
            Algorithm::AdamicAdarClassic => "aa_classic",
        }
    }
}

// Ordered by tag text so tie-breaking follows the exported labels.
impl Ord for Algorithm {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.as_str().cmp(other.as_str())
    }
}

impl PartialOrd for Algorithm {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jaccard" => Ok(Algorithm::Jaccard),
            "adamic_adar" | "aa" => Ok(Algorithm::AdamicAdar),
            "jaccard_classic" => Ok(Algorithm::JaccardClassic),
            "aa_classic" => Ok(Algorithm::AdamicAdarClassic),
            other => Err(Error::InvalidArgument(format!("unknown algorithm `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExclusiveNeighborhood {
    pub node: NodeId,
    pub subset: LayerSubset,
    pub members: BTreeSet<NodeId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredPair {
    pub u: NodeId,
    pub v: NodeId,
    pub raw_score: f64,
    pub algorithm: Algorithm,
    pub subset: LayerSubset,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedPair {
    pub pair: ScoredPair,
    pub normalized: f64,
}

/// Output of [`normalize_scores`]: surviving pairs plus the groups whose
/// maximum was zero and were therefore dropped.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Normalization {
    pub pairs: Vec<NormalizedPair>,
    pub dropped: Vec<(Algorithm, LayerSubset)>,
}

/// Where a predicted link came from.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Provenance {
    pub algorithm: Algorithm,
    pub subset: LayerSubset,
    pub stage: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictedLink {
    pub u: NodeId,
    pub v: NodeId,
    pub raw_score: f64,
    pub normalized_score: f64,
    pub weight: f64,
    pub algorithm: Algorithm,
    pub subset: LayerSubset,
    pub stage: usize,
    /// Every (algorithm, subset, stage) that predicted this pair, sorted.
    /// Filled by [`dedupe_links`]; empty on freshly weighted links.
    pub contributors: Vec<Provenance>,
}

impl PredictedLink {
    pub fn provenance(&self) -> Provenance {
        Provenance {
            algorithm: self.algorithm,
            subset: self.subset.clone(),
            stage: self.stage,
        }
    }
}

/// `NeighborsXOR(v, D)`: nodes adjacent to `v` in some layer of `D` and in no
/// layer outside `D`.
pub fn exclusive_neighbors(net: &MultiplexNetwork, v: NodeId, subset: &LayerSubset) -> ExclusiveNeighborhood {
    let outside: Vec<usize> = (0..net.n_layers()).filter(|&k| !subset.contains(k)).collect();
    let members = net
        .union_neighbors(v, subset.members())
        .into_iter()
        .filter(|u| outside.iter().all(|&k| !net.adjacent(k, u.0, v.0)))
        .collect();
    ExclusiveNeighborhood {
        node: v,
        subset: subset.clone(),
        members,
    }
}

fn ratio_of(a: &BTreeSet<NodeId>, b: &BTreeSet<NodeId>) -> Option<f64> {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    (union > 0).then(|| inter as f64 / union as f64)
}

/// Single-layer Jaccard coefficient; zero when both neighborhoods are empty.
pub fn jaccard_classic(net: &MultiplexNetwork, layer: LayerId, u: NodeId, v: NodeId) -> f64 {
    ratio_of(&net.neighbors(u, layer), &net.neighbors(v, layer)).unwrap_or(0.0)
}

/// Single-layer Adamic-Adar index with natural logarithm.
pub fn adamic_adar_classic(net: &MultiplexNetwork, layer: LayerId, u: NodeId, v: NodeId) -> f64 {
    let gu = net.neighbors(u, layer);
    let gv = net.neighbors(v, layer);
    gu.intersection(&gv)
        .map(|&w| net.neighbors(w, layer).len())
        .filter(|&d| d > 1)
        .map(|d| 1.0 / (d as f64).ln())
        .sum()
}

/// Classic scores of every single-layer non-edge pair, tagged with the
/// classic algorithm variants.
pub fn score_classic(net: &MultiplexNetwork, layer: LayerId, algorithm: Algorithm) -> Result<Vec<ScoredPair>> {
    let subset = LayerSubset::single(layer.0);
    let mut out = Vec::new();
    for u in 0..net.n_nodes() {
        for v in u + 1..net.n_nodes() {
            if net.adjacent(layer.0, u, v) {
                continue;
            }
            let (nu, nv) = (NodeId(u), NodeId(v));
            let raw_score = match algorithm {
                Algorithm::JaccardClassic => jaccard_classic(net, layer, nu, nv),
                Algorithm::AdamicAdarClassic => adamic_adar_classic(net, layer, nu, nv),
                other => {
                    return Err(Error::InvalidArgument(format!("`{other}` is not a classic scorer")))
                }
            };
            out.push(ScoredPair {
                u: nu,
                v: nv,
                raw_score,
                algorithm,
                subset: subset.clone(),
            });
        }
    }
    Ok(out)
}

struct SubsetContext {
    exclusive: Vec<BTreeSet<NodeId>>,
}

impl SubsetContext {
    fn new(net: &MultiplexNetwork, subset: &LayerSubset) -> Self {
        let exclusive = (0..net.n_nodes())
            .map(|v| exclusive_neighbors(net, NodeId(v), subset).members)
            .collect();
        Self { exclusive }
    }
}

fn is_non_edge(net: &MultiplexNetwork, subset: &LayerSubset, u: usize, v: usize) -> bool {
    subset.members().iter().all(|&k| !net.adjacent(k, u, v))
}

/// Modified Jaccard over the exclusive neighborhoods of `subset`. Pairs whose
/// exclusive union is empty are omitted.
pub fn modified_jaccard(net: &MultiplexNetwork, subset: &LayerSubset) -> Vec<ScoredPair> {
    let ctx = SubsetContext::new(net, subset);
    let mut out = Vec::new();
    for u in 0..net.n_nodes() {
        for v in u + 1..net.n_nodes() {
            if !is_non_edge(net, subset, u, v) {
                continue;
            }
            if let Some(score) = ratio_of(&ctx.exclusive[u], &ctx.exclusive[v]) {
                out.push(ScoredPair {
                    u: NodeId(u),
                    v: NodeId(v),
                    raw_score: score,
                    algorithm: Algorithm::Jaccard,
                    subset: subset.clone(),
                });
            }
        }
    }
    out
}

/// Modified Adamic-Adar: sum of `1 / ln deg_D(w)` over shared exclusive
/// neighbors `w`, where `deg_D` is the degree in the union graph of `subset`.
/// Pairs with no shared exclusive neighbor are omitted.
pub fn modified_adamic_adar(net: &MultiplexNetwork, subset: &LayerSubset) -> Vec<ScoredPair> {
    let ctx = SubsetContext::new(net, subset);
    let union_degree: Vec<usize> = (0..net.n_nodes())
        .map(|w| net.union_neighbors(NodeId(w), subset.members()).len())
        .collect();
    let mut out = Vec::new();
    for u in 0..net.n_nodes() {
        for v in u + 1..net.n_nodes() {
            if !is_non_edge(net, subset, u, v) {
                continue;
            }
            let mut shared = ctx.exclusive[u].intersection(&ctx.exclusive[v]).peekable();
            if shared.peek().is_none() {
                continue;
            }
            let score: f64 = shared
                .map(|w| union_degree[w.0])
                .filter(|&d| d > 1)
                .map(|d| 1.0 / (d as f64).ln())
                .sum();
            out.push(ScoredPair {
                u: NodeId(u),
                v: NodeId(v),
                raw_score: score,
                algorithm: Algorithm::AdamicAdar,
                subset: subset.clone(),
            });
        }
    }
    out
}

/// Divides each raw score by the maximum of its (algorithm, subset) group.
/// Input order is kept. Groups whose maximum is zero are dropped and listed.
pub fn normalize_scores(pairs: Vec<ScoredPair>) -> Normalization {
    let mut max: BTreeMap<(Algorithm, LayerSubset), f64> = BTreeMap::new();
    for p in &pairs {
        let slot = max.entry((p.algorithm, p.subset.clone())).or_insert(0.0);
        *slot = slot.max(p.raw_score);
    }
    let dropped: Vec<_> = max
        .iter()
        .filter(|(_, &m)| m <= 0.0)
        .map(|(k, _)| k.clone())
        .collect();
    for (algorithm, subset) in &dropped {
        log::warn!("all {algorithm} scores for subset {subset} are zero; group dropped");
    }
    let pairs = pairs
        .into_iter()
        .filter_map(|pair| {
            let m = max[&(pair.algorithm, pair.subset.clone())];
            (m > 0.0).then(|| NormalizedPair {
                normalized: pair.raw_score / m,
                pair,
            })
        })
        .collect();
    Normalization { pairs, dropped }
}

/// Keeps pairs whose normalized score strictly exceeds `threshold`.
pub fn threshold_filter(pairs: Vec<NormalizedPair>, threshold: f64) -> Vec<NormalizedPair> {
    pairs.into_iter().filter(|p| p.normalized > threshold).collect()
}

fn flow_context(net: &MultiplexNetwork, subset: &LayerSubset, u: NodeId, v: NodeId) -> Vec<f64> {
    let nu = exclusive_neighbors(net, u, subset).members;
    let nv = exclusive_neighbors(net, v, subset).members;
    let mut flows = Vec::new();
    for w in nu.intersection(&nv) {
        for &k in subset.members() {
            for x in [u, v] {
                let forward = net.weight(k, x.0, w.0);
                if forward > 0.0 {
                    flows.push(forward);
                }
                if net.directed() {
                    let back = net.weight(k, w.0, x.0);
                    if back > 0.0 {
                        flows.push(back);
                    }
                }
            }
        }
    }
    flows
}

fn subset_mean_weight(net: &MultiplexNetwork, subset: &LayerSubset) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for e in net.to_edges() {
        if subset.contains(e.layer.0) {
            sum += e.flow;
            count += 1;
        }
    }
    (count > 0).then(|| sum / count as f64)
}

/// Weight = normalized score times the mean flow on edges (within `subset`)
/// joining `u` or `v` to their shared exclusive neighbors. Without such edges
/// the mean edge weight over the layers of `subset` is used instead.
pub fn assign_weights(
    pairs: &[NormalizedPair],
    net: &MultiplexNetwork,
    subset: &LayerSubset,
    stage: usize,
) -> Vec<PredictedLink> {
    let fallback = subset_mean_weight(net, subset);
    pairs
        .iter()
        .filter_map(|p| {
            let flows = flow_context(net, subset, p.pair.u, p.pair.v);
            let base = if flows.is_empty() {
                fallback?
            } else {
                flows.iter().sum::<f64>() / flows.len() as f64
            };
            let weight = p.normalized * base;
            if weight <= 0.0 {
                log::warn!(
                    "pair ({}, {}) has no positive flow context; skipped",
                    p.pair.u,
                    p.pair.v
                );
                return None;
            }
            Some(PredictedLink {
                u: p.pair.u,
                v: p.pair.v,
                raw_score: p.pair.raw_score,
                normalized_score: p.normalized,
                weight,
                algorithm: p.pair.algorithm,
                subset: p.pair.subset.clone(),
                stage,
                contributors: Vec::new(),
            })
        })
        .collect()
}

/// One link per unordered pair: the heaviest instance wins, ties go to the
/// smallest (algorithm, subset, stage). Every contributing provenance is
/// recorded. Output is sorted by pair.
pub fn dedupe_links(links: Vec<PredictedLink>) -> Vec<PredictedLink> {
    let mut groups: BTreeMap<(NodeId, NodeId), Vec<PredictedLink>> = BTreeMap::new();
    for link in links {
        let key = if link.u <= link.v { (link.u, link.v) } else { (link.v, link.u) };
        groups.entry(key).or_default().push(link);
    }
    groups
        .into_iter()
        .map(|((u, v), group)| {
            let mut contributors: Vec<Provenance> = group
                .iter()
                .flat_map(|l| l.contributors.iter().cloned().chain(std::iter::once(l.provenance())))
                .collect();
            contributors.sort();
            contributors.dedup();
            let mut best = group
                .into_iter()
                .reduce(|a, b| {
                    if b.weight > a.weight || (b.weight == a.weight && b.provenance() < a.provenance()) {
                        b
                    } else {
                        a
                    }
                })
                .expect("groups are non-empty");
            best.u = u;
            best.v = v;
            best.contributors = contributors;
            best
        })
        .collect()
}

/// Runs one stage: every subset of size `k` is scored, normalized,
/// thresholded and weighted; results are merged in subset order and
/// deduplicated.
pub fn run_stage(net: &MultiplexNetwork, k: usize, algorithm: Algorithm, threshold: f64) -> Result<Vec<PredictedLink>> {
    let scorer: fn(&MultiplexNetwork, &LayerSubset) -> Vec<ScoredPair> = match algorithm {
        Algorithm::Jaccard => modified_jaccard,
        Algorithm::AdamicAdar => modified_adamic_adar,
        other => {
            return Err(Error::InvalidArgument(format!(
                "`{other}` cannot drive a multiplex stage"
            )))
        }
    };
    let subsets = enumerate_layer_subsets(net.n_layers(), k)?;
    let per_subset: Vec<Vec<PredictedLink>> = subsets
        .par_iter()
        .map(|subset| {
            let normalized = normalize_scores(scorer(net, subset));
            let kept = threshold_filter(normalized.pairs, threshold);
            assign_weights(&kept, net, subset, k)
        })
        .collect();
    Ok(dedupe_links(per_subset.into_iter().flatten().collect()))
}

pub fn write_links<W: Write>(sink: W, links: &[PredictedLink], nodes: &NodeTable) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record([
        "u_label",
        "v_label",
        "algorithm",
        "subset",
        "stage",
        "raw_score",
        "normalized_score",
        "weight",
    ])?;
    for l in links {
        writer.write_record([
            nodes.label(l.u).to_owned(),
            nodes.label(l.v).to_owned(),
            l.algorithm.to_string(),
            l.subset.to_string(),
            l.stage.to_string(),
            l.raw_score.to_string(),
            l.normalized_score.to_string(),
            l.weight.to_string(),
        ])?;
    }
    writer.flush().map_err(|e| Error::io("<links>", e))?;
    Ok(())
}

#[derive(Deserialize)]
struct LinkRow {
    u_label: String,
    v_label: String,
    algorithm: String,
    subset: String,
    stage: usize,
    raw_score: f64,
    normalized_score: f64,
    weight: f64,
}

/// Reads a predicted-links file against an existing node table. Unknown
/// labels and subsets outside `n_layers` are errors.
pub fn read_links<R: Read>(source: R, nodes: &NodeTable, n_layers: usize) -> Result<Vec<PredictedLink>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
    let mut out = Vec::new();
    for row in reader.deserialize::<LinkRow>() {
        let row = row?;
        let line = out.len() as u64 + 2;
        let bad = |message: String| Error::Parse { line, message };
        let lookup = |label: &str| nodes.get(label).ok_or_else(|| bad(format!("unknown node `{label}`")));
        let (u, v) = (lookup(&row.u_label)?, lookup(&row.v_label)?);
        let parsed: LayerSubset = row.subset.parse().map_err(|e: Error| bad(e.to_string()))?;
        let subset = LayerSubset::new(parsed.members().to_vec(), n_layers).map_err(|e| bad(e.to_string()))?;
        if !(row.weight.is_finite() && row.weight > 0.0) {
            return Err(bad(format!("weight {} must be positive", row.weight)));
        }
        out.push(PredictedLink {
            u,
            v,
            raw_score: row.raw_score,
            normalized_score: row.normalized_score,
            weight: row.weight,
            algorithm: row.algorithm.parse().map_err(|e: Error| bad(e.to_string()))?,
            subset,
            stage: row.stage,
            contributors: Vec::new(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{build_multiplex, FlowEdge};
    use approx::assert_abs_diff_eq;

    fn net_from(n: usize, n_layers: usize, edges: &[(usize, usize, usize, f64)]) -> MultiplexNetwork {
        let nodes = NodeTable::from_labels((0..n).map(|i| format!("n{i}"))).unwrap();
        let edges: Vec<FlowEdge> = edges
            .iter()
            .map(|&(u, v, k, flow)| FlowEdge {
                source: NodeId(u),
                target: NodeId(v),
                layer: LayerId(k),
                flow,
            })
            .collect();
        build_multiplex(nodes, &edges, n_layers, false, 1.0).unwrap()
    }

    fn set(ids: &[usize]) -> BTreeSet<NodeId> {
        ids.iter().map(|&i| NodeId(i)).collect()
    }

    fn scored(u: usize, v: usize, score: f64, algorithm: Algorithm, subset: &[usize]) -> ScoredPair {
        ScoredPair {
            u: NodeId(u),
            v: NodeId(v),
            raw_score: score,
            algorithm,
            subset: LayerSubset::new(subset.to_vec(), 8).unwrap(),
        }
    }

    fn link(u: usize, v: usize, weight: f64, algorithm: Algorithm, subset: &[usize], stage: usize) -> PredictedLink {
        PredictedLink {
            u: NodeId(u),
            v: NodeId(v),
            raw_score: 1.0,
            normalized_score: 1.0,
            weight,
            algorithm,
            subset: LayerSubset::new(subset.to_vec(), 8).unwrap(),
            stage,
            contributors: Vec::new(),
        }
    }

    #[test]
    fn exclusive_membership() {
        let only0 = net_from(2, 2, &[(0, 1, 0, 1.0)]);
        let d0 = LayerSubset::single(0);
        assert_eq!(exclusive_neighbors(&only0, NodeId(1), &d0).members, set(&[0]));

        let both = net_from(2, 2, &[(0, 1, 0, 1.0), (0, 1, 1, 1.0)]);
        assert!(exclusive_neighbors(&both, NodeId(1), &d0).members.is_empty());
        let d01 = LayerSubset::new(vec![0, 1], 2).unwrap();
        assert_eq!(exclusive_neighbors(&both, NodeId(1), &d01).members, set(&[0]));

        let single = net_from(4, 1, &[(0, 1, 0, 1.0), (0, 2, 0, 1.0), (3, 1, 0, 1.0)]);
        assert_eq!(
            exclusive_neighbors(&single, NodeId(0), &d0).members,
            single.neighbors(NodeId(0), LayerId(0))
        );
    }

    // star-like layer: 0 and 4 share {1,2,3}, and a separate hub 5 of degree 4.
    fn hand_graph() -> MultiplexNetwork {
        net_from(
            7,
            1,
            &[
                (0, 1, 0, 1.0),
                (0, 2, 0, 1.0),
                (0, 3, 0, 1.0),
                (4, 2, 0, 1.0),
                (4, 3, 0, 1.0),
                (4, 6, 0, 1.0),
                (5, 1, 0, 1.0),
            ],
        )
    }

    #[test]
    fn jaccard_hand_cases() {
        let net = hand_graph();
        let l0 = LayerId(0);
        // {1,2,3} vs {2,3,6}: |∩| = 2, |∪| = 4
        assert_abs_diff_eq!(jaccard_classic(&net, l0, NodeId(0), NodeId(4)), 0.5, epsilon = 1e-15);
        // 2 and 3 share neighbors {0, 4}
        assert_eq!(jaccard_classic(&net, l0, NodeId(2), NodeId(3)), 1.0);
        // {0,5} vs {4}: disjoint
        assert_eq!(jaccard_classic(&net, l0, NodeId(1), NodeId(6)), 0.0);
    }

    #[test]
    fn adamic_adar_hand_cases() {
        // w = 0 has degree 4 and is the only common neighbor of 1 and 2
        let net = net_from(5, 1, &[(0, 1, 0, 1.0), (0, 2, 0, 1.0), (0, 3, 0, 1.0), (0, 4, 0, 1.0)]);
        let l0 = LayerId(0);
        assert_abs_diff_eq!(adamic_adar_classic(&net, l0, NodeId(1), NodeId(2)), 0.721_347_520_444_481_7, epsilon = 1e-12);

        // common neighbors 0 (degree 2) and 1 (degree 3) of nodes 2 and 3
        let two = net_from(5, 1, &[(0, 2, 0, 1.0), (0, 3, 0, 1.0), (1, 2, 0, 1.0), (1, 3, 0, 1.0), (1, 4, 0, 1.0)]);
        assert_abs_diff_eq!(adamic_adar_classic(&two, l0, NodeId(2), NodeId(3)), 2.352_934_267_515_801, epsilon = 1e-12);
        assert_eq!(adamic_adar_classic(&two, l0, NodeId(0), NodeId(4)), 0.0);
    }

    #[test]
    fn modified_jaccard_cases() {
        let net = hand_graph();
        let d0 = LayerSubset::single(0);
        let scores = modified_jaccard(&net, &d0);
        let get = |u: usize, v: usize| scores.iter().find(|p| p.u == NodeId(u) && p.v == NodeId(v));
        assert_eq!(get(2, 3).unwrap().raw_score, 1.0);
        // 0 and 4 are not adjacent, score 0.5
        assert_abs_diff_eq!(get(0, 4).unwrap().raw_score, 0.5, epsilon = 1e-15);
        // existing edge is not a candidate
        assert!(get(0, 1).is_none());

        // exclusive neighbors vanish when the edges repeat in layer 1
        let twin = net_from(3, 2, &[(0, 1, 0, 1.0), (0, 1, 1, 1.0), (0, 2, 0, 1.0), (0, 2, 1, 1.0)]);
        assert!(modified_jaccard(&twin, &d0).is_empty());
    }

    #[test]
    fn modified_adamic_adar_union_degree() {
        // shared exclusive neighbor 0 of 1 and 2 (layer 0); 0 also touches 3 in
        // layer 1, so its union degree over {0,1} is 3.
        let net = net_from(4, 2, &[(0, 1, 0, 1.0), (0, 2, 0, 1.0), (0, 3, 1, 1.0)]);
        let d01 = LayerSubset::new(vec![0, 1], 2).unwrap();
        let scores = modified_adamic_adar(&net, &d01);
        let p = scores.iter().find(|p| p.u == NodeId(1) && p.v == NodeId(2)).unwrap();
        assert_abs_diff_eq!(p.raw_score, 0.910_239_226_626_837_4, epsilon = 1e-12);
        // D spans every layer, so 0 is exclusive to 1 and 3 as well
        let q = scores.iter().find(|p| p.u == NodeId(1) && p.v == NodeId(3)).unwrap();
        assert_abs_diff_eq!(q.raw_score, p.raw_score, epsilon = 1e-15);
        // over {0} alone, 3 has no exclusive neighbor
        let d0 = LayerSubset::single(0);
        let single = modified_adamic_adar(&net, &d0);
        assert!(single.iter().all(|p| p.v != NodeId(3)));
    }

    #[test]
    fn normalization_cases() {
        let pairs = vec![
            scored(0, 1, 2.0, Algorithm::AdamicAdar, &[0]),
            scored(0, 2, 1.2, Algorithm::AdamicAdar, &[0]),
            scored(1, 2, 0.8, Algorithm::AdamicAdar, &[0]),
            scored(0, 1, 0.3, Algorithm::Jaccard, &[0]),
            scored(0, 1, 0.0, Algorithm::Jaccard, &[1]),
            scored(1, 2, 0.0, Algorithm::Jaccard, &[1]),
        ];
        let out = normalize_scores(pairs);
        let values: Vec<f64> = out.pairs.iter().map(|p| p.normalized).collect();
        assert_eq!(values.len(), 4);
        assert_abs_diff_eq!(values[0], 1.0);
        assert_abs_diff_eq!(values[1], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(values[2], 0.4, epsilon = 1e-15);
        assert_eq!(values[3], 1.0);
        assert_eq!(out.dropped, vec![(Algorithm::Jaccard, LayerSubset::single(1))]);
    }

    #[test]
    fn threshold_is_strict() {
        let mk = |s: f64| NormalizedPair {
            pair: scored(0, 1, s, Algorithm::Jaccard, &[0]),
            normalized: s,
        };
        let input: Vec<_> = [1.0, 0.6, 0.5, 0.4].into_iter().map(mk).collect();
        let kept: Vec<f64> = threshold_filter(input.clone(), 0.5).iter().map(|p| p.normalized).collect();
        assert_eq!(kept, vec![1.0, 0.6]);
        let mut with_zero = input;
        with_zero.push(mk(0.0));
        assert_eq!(threshold_filter(with_zero, 0.0).len(), 4);
        assert!(threshold_filter(Vec::new(), 0.5).is_empty());
    }

    #[test]
    fn weights_from_exclusive_flow_context() {
        // 1 and 2 share exclusive neighbor 0 with flows 10 and 20
        let net = net_from(3, 1, &[(0, 1, 0, 10.0), (0, 2, 0, 20.0)]);
        let d0 = LayerSubset::single(0);
        let mk = |s: f64, u: usize, v: usize| NormalizedPair {
            pair: scored(u, v, s, Algorithm::Jaccard, &[0]),
            normalized: s,
        };
        let links = assign_weights(&[mk(1.0, 1, 2)], &net, &d0, 1);
        assert_abs_diff_eq!(links[0].weight, 15.0);

        let three = net_from(3, 1, &[(0, 1, 0, 10.0), (0, 2, 0, 10.0)]);
        let links = assign_weights(&[mk(0.6, 1, 2)], &three, &d0, 1);
        assert_abs_diff_eq!(links[0].weight, 6.0, epsilon = 1e-12);

        // no shared exclusive neighbor: fall back to the subset mean (8)
        let fall = net_from(4, 1, &[(0, 1, 0, 4.0), (2, 3, 0, 12.0)]);
        let links = assign_weights(&[mk(1.0, 0, 2)], &fall, &d0, 1);
        assert_abs_diff_eq!(links[0].weight, 8.0);
    }

    #[test]
    fn dedupe_cases() {
        let a = link(0, 1, 5.0, Algorithm::Jaccard, &[0], 1);
        let b = link(1, 0, 9.0, Algorithm::AdamicAdar, &[0, 1], 2);
        let out = dedupe_links(vec![a.clone(), b]);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].weight, 9.0);
        assert_eq!((out[0].u, out[0].v), (NodeId(0), NodeId(1)));
        assert_eq!(out[0].contributors.len(), 2);

        let c = link(2, 3, 1.0, Algorithm::Jaccard, &[0], 1);
        assert_eq!(dedupe_links(vec![a.clone(), c]).len(), 2);

        let tie_j = link(0, 1, 5.0, Algorithm::Jaccard, &[0], 1);
        let tie_aa = link(0, 1, 5.0, Algorithm::AdamicAdar, &[1], 1);
        let first = dedupe_links(vec![tie_j.clone(), tie_aa.clone()]);
        let second = dedupe_links(vec![tie_aa, tie_j]);
        assert_eq!(first, second);
        assert_eq!(first[0].algorithm, Algorithm::AdamicAdar);
        assert_eq!(dedupe_links(first.clone()), first);
    }

    #[test]
    fn stage_on_empty_network() {
        let empty = build_multiplex(NodeTable::new(), &[], 3, false, 1.0).unwrap();
        assert!(run_stage(&empty, 2, Algorithm::AdamicAdar, 0.5).unwrap().is_empty());
        assert!(run_stage(&empty, 4, Algorithm::Jaccard, 0.5).is_err());
        assert!(run_stage(&empty, 1, Algorithm::JaccardClassic, 0.5).is_err());
    }

    #[test]
    fn algorithm_tag_order() {
        let mut tags = [
            Algorithm::JaccardClassic,
            Algorithm::Jaccard,
            Algorithm::AdamicAdar,
            Algorithm::AdamicAdarClassic,
        ];
        tags.sort();
        let names: Vec<_> = tags.iter().map(|a| a.as_str()).collect();
        assert_eq!(names, ["aa_classic", "adamic_adar", "jaccard", "jaccard_classic"]);
    }

    #[test]
    fn links_csv_round_trip() {
        let net = net_from(3, 2, &[(0, 1, 0, 1.0)]);
        let links = vec![link(0, 2, 2.5, Algorithm::AdamicAdar, &[0, 1], 2)];
        let mut buf = Vec::new();
        write_links(&mut buf, &links, net.nodes()).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("u_label,v_label,algorithm,subset,stage,raw_score,normalized_score,weight\n"));
        assert!(text.contains("n0,n2,adamic_adar,0+1,2,1,1,2.5"));
        assert_eq!(read_links(&buf[..], net.nodes(), 2).unwrap(), links);
        assert!(read_links(&buf[..], net.nodes(), 1).is_err());
    }
}
