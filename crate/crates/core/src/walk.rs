//! Supra-transition matrices for walks over a multiplex, and a seeded walker.
//!
//! Supra-states are `(node i, layer a)` replicas laid out node-major inside
//! layer blocks: `i + a * N`.

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{MultiplexNetwork, NodeId};

pub const DEFAULT_DAMPING: f64 = 0.85;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Classical walk: strength-normalized moves and layer switches.
    Rwc,
    /// Diffusive walk: moves normalized by the global maximum strength, with a
    /// lazy remainder on the diagonal.
    Rwd,
    /// Classical walk mixed with uniform teleportation over all supra-states.
    PageRank,
}

impl Strategy {
    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Rwc => "rwc",
            Strategy::Rwd => "rwd",
            Strategy::PageRank => "pagerank",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rwc" => Ok(Strategy::Rwc),
            "rwd" => Ok(Strategy::Rwd),
            "pagerank" | "pr" => Ok(Strategy::PageRank),
            other => Err(Error::InvalidArgument(format!("unknown strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkOptions {
    /// Probability of following the classical walk under PageRank.
    pub damping: f64,
}

impl Default for WalkOptions {
    fn default() -> Self {
        Self {
            damping: DEFAULT_DAMPING,
        }
    }
}

/// Per-replica intra-layer strength `s`, inter-layer strength `S`, and the
/// global maximum of `s + S`. Indexed by supra-index.
#[derive(Debug, Clone, PartialEq)]
pub struct StrengthProfile {
    pub n_nodes: usize,
    pub n_layers: usize,
    pub intra: Vec<f64>,
    pub inter: Vec<f64>,
    pub s_max: f64,
}

impl StrengthProfile {
    pub fn intra(&self, i: usize, a: usize) -> f64 {
        self.intra[i + a * self.n_nodes]
    }

    pub fn inter(&self, i: usize, a: usize) -> f64 {
        self.inter[i + a * self.n_nodes]
    }

    pub fn total(&self, state: usize) -> f64 {
        self.intra[state] + self.inter[state]
    }
}

/// Inter-layer strength of replica `(i, a)`: the summed coupling towards the
/// node's other replicas. This is the single place where that quantity is
/// defined.
fn inter_layer_strength(net: &MultiplexNetwork, i: usize, a: usize) -> f64 {
    (0..net.n_layers())
        .filter(|&b| b != a)
        .map(|b| net.coupling(i, a, b))
        .sum()
}

/// Strengths of every replica. Directed networks use out-strength.
pub fn strength_profile(net: &MultiplexNetwork) -> StrengthProfile {
    let (n, l) = (net.n_nodes(), net.n_layers());
    let mut intra = vec![0.0; n * l];
    let mut inter = vec![0.0; n * l];
    for a in 0..l {
        for i in 0..n {
            intra[i + a * n] = net.out_edges(a, i).map(|(_, w)| w).sum();
            inter[i + a * n] = inter_layer_strength(net, i, a);
        }
    }
    let s_max = intra
        .iter()
        .zip(&inter)
        .map(|(s, c)| s + c)
        .fold(0.0, f64::max);
    StrengthProfile {
        n_nodes: n,
        n_layers: l,
        intra,
        inter,
        s_max,
    }
}

/// Row-stochastic matrix over the `N * L` supra-states.
#[derive(Debug, Clone, PartialEq)]
pub struct SupraTransitionMatrix {
    n_nodes: usize,
    n_layers: usize,
    strategy: Strategy,
    directed: bool,
    /// Sparse rows, ascending by column.
    rows: Vec<Vec<(usize, f64)>>,
    /// Positive weights `w` such that `diag(w) * P` is symmetric, when known.
    symmetrizer: Option<Vec<f64>>,
}

impl SupraTransitionMatrix {
    /// Wraps hand-built rows. Nothing is validated; see [`row_stochastic_check`].
    pub fn from_rows(
        n_nodes: usize,
        n_layers: usize,
        strategy: Strategy,
        directed: bool,
        rows: Vec<Vec<(usize, f64)>>,
    ) -> Self {
        let mut rows = rows;
        for row in &mut rows {
            row.sort_by_key(|&(c, _)| c);
        }
        Self {
            n_nodes,
            n_layers,
            strategy,
            directed,
            rows,
            symmetrizer: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_layers(&self) -> usize {
        self.n_layers
    }

    pub fn strategy(&self) -> Strategy {
        self.strategy
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    pub fn row(&self, state: usize) -> &[(usize, f64)] {
        &self.rows[state]
    }

    pub fn symmetrizer(&self) -> Option<&[f64]> {
        self.symmetrizer.as_deref()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let row = &self.rows[r];
        row.binary_search_by_key(&c, |&(j, _)| j)
            .map_or(0.0, |k| row[k].1)
    }

    pub fn supra_index(&self, node: usize, layer: usize) -> usize {
        node + layer * self.n_nodes
    }

    /// Physical node of a supra-state.
    pub fn node_of(&self, state: usize) -> usize {
        state % self.n_nodes
    }

    pub fn layer_of(&self, state: usize) -> usize {
        state / self.n_nodes
    }

    pub fn to_dense(&self) -> Mat<f64> {
        let dim = self.dim();
        let mut m = Mat::<f64>::zeros(dim, dim);
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                m[(r, c)] = v;
            }
        }
        m
    }

    /// Coordinate dump, one `row col value` line per stored entry.
    pub fn write_coordinates<W: Write>(&self, mut sink: W) -> Result<()> {
        for (r, row) in self.rows.iter().enumerate() {
            for &(c, v) in row {
                writeln!(sink, "{r} {c} {v:.16e}").map_err(|e| Error::io("<matrix>", e))?;
            }
        }
        Ok(())
    }
}

pub fn build_supra_transition(net: &MultiplexNetwork, strategy: Strategy) -> Result<SupraTransitionMatrix> {
    build_supra_transition_with(net, strategy, &WalkOptions::default())
}

pub fn build_supra_transition_with(
    net: &MultiplexNetwork,
    strategy: Strategy,
    options: &WalkOptions,
) -> Result<SupraTransitionMatrix> {
    let (n, l) = (net.n_nodes(), net.n_layers());
    for a in 0..l {
        for i in 0..n {
            if net.out_edges(a, i).any(|(_, w)| !(w.is_finite() && w >= 0.0)) {
                return Err(Error::Construction(format!(
                    "negative or non-finite weight in row {i} of layer {a}"
                )));
            }
            for b in 0..l {
                let d = net.coupling(i, a, b);
                if !(d.is_finite() && d >= 0.0) {
                    return Err(Error::Construction(format!(
                        "negative or non-finite coupling at node {i}, layers ({a}, {b})"
                    )));
                }
            }
        }
    }
    if strategy == Strategy::PageRank && !(options.damping > 0.0 && options.damping <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "damping {} must lie in (0, 1]",
            options.damping
        )));
    }

    let profile = strength_profile(net);
    let dim = n * l;
    let mut rows = Vec::with_capacity(dim);
    let mut sym = vec![0.0; dim];

    // Entries of the supra-adjacency row of (i, a), ascending by column.
    let adjacency_row = |i: usize, a: usize| {
        let mut row: Vec<(usize, f64)> = Vec::new();
        for b in 0..l {
            if b == a {
                row.extend(net.out_edges(a, i).map(|(j, w)| (j + a * n, w)));
            } else {
                let d = net.coupling(i, a, b);
                if d > 0.0 {
                    row.push((i + b * n, d));
                }
            }
        }
        row.sort_by_key(|&(c, _)| c);
        row
    };

    match strategy {
        Strategy::Rwc | Strategy::PageRank => {
            for a in 0..l {
                for i in 0..n {
                    let state = i + a * n;
                    let total = profile.total(state);
                    if total > 0.0 {
                        let row = adjacency_row(i, a)
                            .into_iter()
                            .map(|(c, w)| (c, w / total))
                            .collect();
                        rows.push(row);
                        sym[state] = total;
                    } else {
                        // dangling replica keeps the walker in place
                        rows.push(vec![(state, 1.0)]);
                        sym[state] = 1.0;
                    }
                }
            }
            if strategy == Strategy::PageRank && dim > 0 {
                let r = options.damping;
                let jump = (1.0 - r) / dim as f64;
                rows = rows
                    .into_iter()
                    .map(|row| {
                        let mut dense = vec![jump; dim];
                        for (c, v) in row {
                            dense[c] += r * v;
                        }
                        dense.into_iter().enumerate().collect()
                    })
                    .collect();
            }
        }
        Strategy::Rwd => {
            let s_max = profile.s_max;
            for a in 0..l {
                for i in 0..n {
                    let state = i + a * n;
                    sym[state] = 1.0;
                    if s_max <= 0.0 {
                        rows.push(vec![(state, 1.0)]);
                        continue;
                    }
                    let mut row: Vec<(usize, f64)> = adjacency_row(i, a)
                        .into_iter()
                        .map(|(c, w)| (c, w / s_max))
                        .collect();
                    let off: f64 = row.iter().map(|&(_, v)| v).sum();
                    let lazy = (1.0 - off).max(0.0);
                    if lazy > 0.0 {
                        let pos = row.partition_point(|&(c, _)| c < state);
                        row.insert(pos, (state, lazy));
                    }
                    rows.push(row);
                }
            }
        }
    }

    let symmetrizer = (!net.directed() && strategy != Strategy::PageRank).then_some(sym);
    Ok(SupraTransitionMatrix {
        n_nodes: n,
        n_layers: l,
        strategy,
        directed: net.directed(),
        rows,
        symmetrizer,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticCheck {
    pub ok: bool,
    pub max_deviation: f64,
    pub worst_row: Option<usize>,
}

/// True iff every row sums to one within `1e-12`.
pub fn row_stochastic_check(p: &SupraTransitionMatrix) -> StochasticCheck {
    let mut max_deviation = 0.0;
    let mut worst_row = None;
    for (r, row) in p.rows.iter().enumerate() {
        let dev = (row.iter().map(|&(_, v)| v).sum::<f64>() - 1.0).abs();
        if worst_row.is_none() || dev > max_deviation {
            max_deviation = dev;
            worst_row = Some(r);
        }
    }
    StochasticCheck {
        ok: max_deviation <= 1e-12,
        max_deviation,
        worst_row,
    }
}

/// splitmix64 finalizer, used to derive independent stream seeds.
pub fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Cumulative rows for inverse-CDF sampling.
#[derive(Debug, Clone)]
pub struct Sampler {
    columns: Vec<Vec<usize>>,
    cumulative: Vec<Vec<f64>>,
}

impl Sampler {
    pub fn new(p: &SupraTransitionMatrix) -> Self {
        let mut columns = Vec::with_capacity(p.dim());
        let mut cumulative = Vec::with_capacity(p.dim());
        for row in &p.rows {
            let mut acc = 0.0;
            let mut cols = Vec::with_capacity(row.len());
            let mut cum = Vec::with_capacity(row.len());
            for &(c, v) in row {
                if v > 0.0 {
                    acc += v;
                    cols.push(c);
                    cum.push(acc);
                }
            }
            columns.push(cols);
            cumulative.push(cum);
        }
        Self { columns, cumulative }
    }

    pub fn step<R: Rng>(&self, state: usize, rng: &mut R) -> usize {
        let cum = &self.cumulative[state];
        let Some(&total) = cum.last() else {
            return state;
        };
        let target = rng.random::<f64>() * total;
        let k = cum.partition_point(|&c| c <= target).min(cum.len() - 1);
        self.columns[state][k]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WalkTrajectory {
    pub origin: usize,
    /// Supra-states at steps `0..=horizon`; `steps[0] == origin`.
    pub steps: Vec<usize>,
    /// Step at which each physical node was first visited.
    pub first_visit: Vec<Option<usize>>,
}

impl WalkTrajectory {
    /// Physical nodes visited by step `t`.
    pub fn visited_by(&self, t: usize) -> BTreeSet<NodeId> {
        self.first_visit
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_some_and(|s| s <= t))
            .map(|(i, _)| NodeId(i))
            .collect()
    }
}

pub(crate) fn walk_rng(seed: u64, origin: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(mix_seed(seed, origin as u64))
}

/// Samples a discrete-time trajectory; the generator is seeded by
/// `(seed, origin)` only.
pub fn simulate_walk(p: &SupraTransitionMatrix, origin: usize, horizon: usize, seed: u64) -> Result<WalkTrajectory> {
    if origin >= p.dim() {
        return Err(Error::InvalidArgument(format!(
            "origin {origin} outside {} supra-states",
            p.dim()
        )));
    }
    let sampler = Sampler::new(p);
    let mut rng = walk_rng(seed, origin);
    let mut steps = Vec::with_capacity(horizon + 1);
    let mut first_visit = vec![None; p.n_nodes()];
    let mut state = origin;
    steps.push(state);
    first_visit[p.node_of(state)] = Some(0);
    for t in 1..=horizon {
        state = sampler.step(state, &mut rng);
        steps.push(state);
        first_visit[p.node_of(state)].get_or_insert(t);
    }
    Ok(WalkTrajectory {
        origin,
        steps,
        first_visit,
    })
}
