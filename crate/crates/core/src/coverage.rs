//! Coverage dynamics `rho(t)`: the expected fraction of physical nodes a
//! walker has visited by time `t`, averaged over origins.
//!
//! `rho(t) = 1 - (1/N^2) sum_{i,j} delta_ij(t)` where `delta_ij(t)` is the
//! probability that a walker that started at node `j` has not yet reached
//! node `i`. The analytic engine runs the continuous-time walk
//! `p(t) = p(0) exp(-L t)` and expands every survival term over an
//! eigenbasis, so `d/dt delta_ij = -sum_l exp(-lambda_l t) C_ij(l)`.
//!
//! Two survival models are available:
//!
//! * [`CoverageModel::Exact`] makes the replicas of target `i` absorbing and
//!   decomposes the remaining generator. `delta_ij` is then the exact
//!   survival probability of the walk.
//! * [`CoverageModel::MeanField`] decomposes the full supra-Laplacian once and
//!   sets `delta_ij(t) = delta_ij(0) exp(-int_0^t p_j(s) . E_i ds)`, treating
//!   the accumulated occupation of `i` as a hitting rate. It is cheaper, but
//!   overestimates survival on small or sparse graphs.
//!
//! The Monte Carlo engine samples discrete-time walkers; one step is one time
//! unit.

use std::collections::BTreeMap;
use std::io::Write;

use faer::c64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::network::MultiplexNetwork;
use crate::spectral::{decompose, decompose_reversible, decompose_walk, supra_laplacian, SpectralDecomposition};
use crate::walk::{build_supra_transition, mix_seed, Sampler, Strategy, SupraTransitionMatrix};

/// Eigenvalues below this modulus are treated as zero modes.
const ZERO_MODE: f64 = 1e-10;
/// Largest tolerated decrease between consecutive analytic samples.
const MONOTONE_SLACK: f64 = 1e-9;
const DECAYED: f64 = 60.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CoverageModel {
    #[default]
    Exact,
    MeanField,
}

/// Which replicas of a physical origin start walkers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OriginMode {
    /// The layer-0 replica.
    #[default]
    FirstLayer,
    /// Mass spread evenly over all replicas.
    AllReplicas,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CoverageMethod {
    Analytic,
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoverageOptions {
    pub model: CoverageModel,
    pub origins: OriginMode,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageCurve {
    pub times: Vec<f64>,
    pub rho: Vec<f64>,
    pub method: CoverageMethod,
    pub strategy: Strategy,
    pub directed: bool,
}

impl CoverageCurve {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest absolute difference between two curves sampled on the same grid.
    pub fn sup_distance(&self, other: &CoverageCurve) -> Result<f64> {
        if self.times != other.times {
            return Err(Error::InvalidArgument("curves are sampled on different grids".into()));
        }
        Ok(self
            .rho
            .iter()
            .zip(&other.rho)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max))
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut writer = csv::Writer::from_writer(sink);
        writer.write_record(["time", "rho"])?;
        for (t, r) in self.times.iter().zip(&self.rho) {
            writer.write_record([t.to_string(), r.to_string()])?;
        }
        writer.flush().map_err(|e| Error::io("<curve>", e))?;
        Ok(())
    }
}

/// `0` followed by `per_decade` log-spaced points per decade over `[start, end]`.
pub fn log_time_grid(start: f64, end: f64, per_decade: usize) -> Result<Vec<f64>> {
    if !(start > 0.0 && end > start && per_decade > 0) {
        return Err(Error::InvalidArgument(format!(
            "bad time grid [{start}, {end}] with {per_decade} points per decade"
        )));
    }
    let (lo, hi) = (start.log10(), end.log10());
    let steps = ((hi - lo) * per_decade as f64).round().max(1.0) as usize;
    let mut grid = Vec::with_capacity(steps + 2);
    grid.push(0.0);
    for k in 0..=steps {
        grid.push(10f64.powf(lo + (hi - lo) * k as f64 / steps as f64));
    }
    Ok(grid)
}

/// Default analytic grid: `0` plus `1e-2 .. 1e7`, 400 points per decade.
pub fn default_time_grid() -> Vec<f64> {
    log_time_grid(1e-2, 1e7, 400).expect("constant grid is valid")
}

fn check_grid(times: &[f64]) -> Result<()> {
    if times.first() != Some(&0.0) {
        return Err(Error::InvalidArgument("time grid must start at 0".into()));
    }
    if times.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(std::cmp::Ordering::Greater)) {
        return Err(Error::InvalidArgument("time grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Initial distribution of a walker from physical node `j`, as
/// `(supra-state, mass)` pairs.
fn origin_mass(p: &SupraTransitionMatrix, j: usize, mode: OriginMode) -> Vec<(usize, f64)> {
    match mode {
        OriginMode::FirstLayer => vec![(p.supra_index(j, 0), 1.0)],
        OriginMode::AllReplicas => {
            let share = 1.0 / p.n_layers() as f64;
            (0..p.n_layers()).map(|a| (p.supra_index(j, a), share)).collect()
        }
    }
}

/// Survival of a walker against one absorbing target node.
///
/// With `G` the generator restricted to states outside the target's
/// replicas, `delta_ij(t) = p_j(0) exp(-G t) 1 = sum_l exp(-mu_l t) a_j(l) b_l`,
/// where `a_j(l) = p_j(0) V_l` and `b = V^{-1} 1`.
#[derive(Debug, Clone)]
pub struct TargetSurvival {
    pub target: usize,
    pub eigenvalues: Vec<c64>,
    /// `amplitudes[j][l] = a_j(l) b_l`; the target's own row is empty.
    amplitudes: Vec<Vec<c64>>,
    pub condition: f64,
}

impl TargetSurvival {
    pub fn new(p: &SupraTransitionMatrix, target: usize, mode: OriginMode) -> Result<Self> {
        let (n, l) = (p.n_nodes(), p.n_layers());
        let keep: Vec<usize> = (0..p.dim()).filter(|&s| p.node_of(s) != target).collect();
        let mut position = vec![usize::MAX; p.dim()];
        for (k, &s) in keep.iter().enumerate() {
            position[s] = k;
        }
        let full = supra_laplacian(p);
        let m = keep.len();
        let generator = faer::Mat::<f64>::from_fn(m, m, |r, c| full[(keep[r], keep[c])]);
        let decomposition = match p.symmetrizer() {
            Some(w) => {
                let weights: Vec<f64> = keep.iter().map(|&s| w[s]).collect();
                decompose_reversible(&generator, &weights)?
            }
            None => decompose(&generator)?,
        };
        decomposition.ensure_usable()?;

        let b: Vec<c64> = (0..m)
            .map(|row| (0..m).map(|c| decomposition.inverse[(row, c)]).sum())
            .collect();
        let mut amplitudes = vec![Vec::new(); n];
        for (j, slot) in amplitudes.iter_mut().enumerate() {
            if j == target {
                continue;
            }
            *slot = (0..m)
                .map(|mode_l| {
                    let a: c64 = origin_mass(p, j, mode)
                        .into_iter()
                        .map(|(s, w)| decomposition.vectors[(position[s], mode_l)] * w)
                        .sum();
                    a * b[mode_l]
                })
                .collect();
        }
        debug_assert_eq!(m, (n - 1) * l);
        Ok(Self {
            target,
            eigenvalues: decomposition.eigenvalues,
            amplitudes,
            condition: decomposition.condition,
        })
    }

    /// `delta_ij(t)` for origin `j`.
    pub fn delta(&self, origin: usize, t: f64) -> f64 {
        if origin == self.target {
            return 0.0;
        }
        decay_sum(&self.amplitudes[origin], &self.eigenvalues, t)
    }

    /// `C_ij(l) = mu_l a_j(l) b_l`, so that `d/dt delta_ij = -sum_l exp(-mu_l t) C_ij(l)`.
    pub fn coefficients(&self, origin: usize) -> Vec<c64> {
        self.amplitudes[origin]
            .iter()
            .zip(&self.eigenvalues)
            .map(|(a, mu)| a * mu)
            .collect()
    }

    /// `sum_{j != target} delta_ij(t)` on every grid time.
    fn summed(&self, times: &[f64]) -> Vec<f64> {
        let mut pooled = vec![c64::new(0.0, 0.0); self.eigenvalues.len()];
        for row in &self.amplitudes {
            for (acc, a) in pooled.iter_mut().zip(row) {
                *acc += a;
            }
        }
        times.iter().map(|&t| decay_sum(&pooled, &self.eigenvalues, t)).collect()
    }
}

/// `Re sum_l exp(-mu_l t) a_l`. Modes with `Re mu_l t > DECAYED` are dropped;
/// their weight is below `1e-26` of the amplitude.
fn decay_sum(amplitudes: &[c64], eigenvalues: &[c64], t: f64) -> f64 {
    let mut acc = 0.0;
    for (a, mu) in amplitudes.iter().zip(eigenvalues) {
        let x = mu.re * t;
        if x > DECAYED {
            continue;
        }
        let m = (-x).exp();
        if mu.im == 0.0 {
            acc += m * a.re;
        } else {
            let (sin, cos) = (mu.im * t).sin_cos();
            acc += m * (a.re * cos + a.im * sin);
        }
    }
    acc
}

/// `sum_{j != i} delta_ij(t)` on `times`. The eigen-expansion is used when
/// its basis is well conditioned and the result is non-increasing; otherwise
/// the survival is evaluated by uniformization.
fn target_survival(p: &SupraTransitionMatrix, target: usize, mode: OriginMode, times: &[f64]) -> Result<Vec<f64>> {
    match TargetSurvival::new(p, target, mode) {
        Ok(s) => {
            let summed = s.summed(times);
            if summed.windows(2).all(|w| w[1] <= w[0] + MONOTONE_SLACK) {
                return Ok(summed);
            }
        }
        Err(Error::Degraded { .. }) => {}
        Err(e) => return Err(e),
    }
    uniformized_survival(p, target, mode, times)
}

/// Upper bound on `steps * stored entries` for [`uniformized_survival`].
const UNIFORMIZATION_BUDGET: usize = 200_000_000;
/// Half-width of the Poisson window in standard deviations.
const POISSON_WIDTH: f64 = 12.0;

/// `sum_{j != i} delta_ij(t) = sum_k Pois(k; t) S(k)` with
/// `S(k) = pi Q^k 1`, where `Q` is `P` restricted to states outside the
/// target's replicas and `pi` pools the origin distributions. `S` is
/// iterated until its decrease over a trailing window falls below `1e-14`.
pub fn uniformized_survival(p: &SupraTransitionMatrix, target: usize, mode: OriginMode, times: &[f64]) -> Result<Vec<f64>> {
    let dim = p.dim();
    let alive: Vec<bool> = (0..dim).map(|s| p.node_of(s) != target).collect();
    let entries: usize = (0..dim).filter(|&s| alive[s]).map(|s| p.row(s).len()).sum::<usize>().max(1);
    let max_steps = UNIFORMIZATION_BUDGET / entries;

    let mut x = vec![0.0; dim];
    for j in (0..p.n_nodes()).filter(|&j| j != target) {
        for (s, w) in origin_mass(p, j, mode) {
            x[s] += w;
        }
    }
    let mut survival = vec![x.iter().sum::<f64>()];
    let mut next = vec![0.0; dim];
    loop {
        let k = survival.len();
        let window = 50.max(k / 10);
        if k > window && survival[k - 1 - window] - survival[k - 1] < 1e-14 {
            break;
        }
        if k > max_steps {
            return Err(Error::Degraded { condition: f64::INFINITY });
        }
        next.fill(0.0);
        for (r, &mass) in x.iter().enumerate() {
            if mass == 0.0 || !alive[r] {
                continue;
            }
            for &(c, q) in p.row(r) {
                if alive[c] {
                    next[c] += mass * q;
                }
            }
        }
        std::mem::swap(&mut x, &mut next);
        survival.push(x.iter().sum());
    }

    let last = survival.len() - 1;
    let mut ln_fact = Vec::with_capacity(last + 1);
    ln_fact.push(0.0);
    for k in 1..=last {
        ln_fact.push(ln_fact[k - 1] + (k as f64).ln());
    }
    Ok(times
        .iter()
        .map(|&t| {
            if t == 0.0 {
                return survival[0];
            }
            let spread = POISSON_WIDTH * t.sqrt() + POISSON_WIDTH;
            let lo = (t - spread).floor().max(0.0) as usize;
            if lo > last {
                return survival[last];
            }
            let hi = ((t + spread).ceil() as usize).min(last);
            let (mut acc, mut mass) = (0.0, 0.0);
            for k in lo..=hi {
                let w = (k as f64 * t.ln() - t - ln_fact[k]).exp();
                acc += w * survival[k];
                mass += w;
            }
            acc + (1.0 - mass).max(0.0) * survival[last]
        })
        .collect())
}

/// Mean-field survival state built on one decomposition of the full
/// supra-Laplacian.
#[derive(Debug, Clone)]
pub struct AnalyticCoverageState {
    pub n_nodes: usize,
    pub n_layers: usize,
    pub decomposition: SpectralDecomposition,
    /// `initial[j]`: the origin distribution `P_j(0)` as sparse mass.
    pub initial: Vec<Vec<(usize, f64)>>,
    /// `origin_weights[j][l] = P_j(0) V_l`.
    origin_weights: Vec<Vec<c64>>,
    /// `target_weights[i][l] = (V^{-1} E_i)_l`, `E_i` the replica indicator of `i`.
    target_weights: Vec<Vec<c64>>,
}

impl AnalyticCoverageState {
    pub fn new(p: &SupraTransitionMatrix, mode: OriginMode) -> Result<Self> {
        let decomposition = decompose_walk(p)?;
        decomposition.ensure_usable()?;
        let (n, l) = (p.n_nodes(), p.n_layers());
        let dim = p.dim();
        let initial: Vec<Vec<(usize, f64)>> = (0..n).map(|j| origin_mass(p, j, mode)).collect();
        let origin_weights = initial
            .iter()
            .map(|mass| {
                (0..dim)
                    .map(|k| mass.iter().map(|&(s, w)| decomposition.vectors[(s, k)] * w).sum())
                    .collect()
            })
            .collect();
        let target_weights = (0..n)
            .map(|i| {
                (0..dim)
                    .map(|k| (0..l).map(|a| decomposition.inverse[(k, p.supra_index(i, a))]).sum())
                    .collect()
            })
            .collect();
        Ok(Self {
            n_nodes: n,
            n_layers: l,
            decomposition,
            initial,
            origin_weights,
            target_weights,
        })
    }

    /// Replica indicator `E_i`: ones at every supra-index of node `i`.
    pub fn indicator(&self, i: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.n_nodes * self.n_layers];
        for a in 0..self.n_layers {
            e[i + a * self.n_nodes] = 1.0;
        }
        e
    }

    /// `C_ij(l) = (P_j(0) V_l)(V^{-1}_l E_i)`, so that the hit rate is
    /// `P_j(t) . E_i = sum_l exp(-lambda_l t) C_ij(l)`.
    pub fn coefficient(&self, i: usize, j: usize, l: usize) -> c64 {
        self.origin_weights[j][l] * self.target_weights[i][l]
    }

    pub fn initial_delta(i: usize, j: usize) -> f64 {
        if i == j {
            0.0
        } else {
            1.0
        }
    }

    /// `int_0^t P_j(s) . E_i ds`, integrated mode by mode in closed form.
    pub fn accumulated_hits(&self, i: usize, j: usize, t: f64) -> f64 {
        self.decomposition
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(l, &lambda)| integrated_mode(lambda, t) * self.coefficient(i, j, l))
            .sum::<c64>()
            .re
    }

    pub fn delta(&self, i: usize, j: usize, t: f64) -> f64 {
        Self::initial_delta(i, j) * (-self.accumulated_hits(i, j, t)).exp()
    }

    fn rho(&self, times: &[f64]) -> Vec<f64> {
        let n = self.n_nodes;
        let factors: Vec<Vec<c64>> = times
            .iter()
            .map(|&t| {
                self.decomposition
                    .eigenvalues
                    .iter()
                    .map(|&lambda| integrated_mode(lambda, t))
                    .collect()
            })
            .collect();
        factors
            .par_iter()
            .map(|f| {
                let mut survival = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        if i == j {
                            continue;
                        }
                        let exponent: c64 = f
                            .iter()
                            .enumerate()
                            .map(|(l, fl)| fl * self.origin_weights[j][l] * self.target_weights[i][l])
                            .sum();
                        survival += (-exponent.re).exp();
                    }
                }
                1.0 - survival / (n * n) as f64
            })
            .collect()
    }

    /// Large-time approximations driven by the zero modes and `lambda_2`.
    ///
    /// `printed` keeps only the `lambda_2` correction,
    /// `exp(-C_ij(1) t - C_ij(2) / lambda_2)`; `asymptotic` sums the constant
    /// corrections of all non-zero modes.
    pub fn large_time(&self, times: &[f64]) -> LargeTimeDiagnostic {
        let values = &self.decomposition.eigenvalues;
        let zero: Vec<usize> = (0..values.len()).filter(|&l| values[l].norm() < ZERO_MODE).collect();
        let rest: Vec<usize> = (0..values.len()).filter(|&l| values[l].norm() >= ZERO_MODE).collect();
        let lambda2 = rest.first().map(|&l| values[l]);
        let n = self.n_nodes;
        let mut printed = Vec::with_capacity(times.len());
        let mut asymptotic = Vec::with_capacity(times.len());
        for &t in times {
            let (mut s_printed, mut s_asym) = (0.0, 0.0);
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let c1: c64 = zero.iter().map(|&l| self.coefficient(i, j, l)).sum();
                    let head = c1 * t;
                    let second = rest
                        .first()
                        .map_or(c64::new(0.0, 0.0), |&l| self.coefficient(i, j, l) / values[l]);
                    let tail: c64 = rest.iter().map(|&l| self.coefficient(i, j, l) / values[l]).sum();
                    s_printed += (-(head + second).re).exp();
                    s_asym += (-(head + tail).re).exp();
                }
            }
            let norm = (n * n) as f64;
            printed.push(1.0 - s_printed / norm);
            asymptotic.push(1.0 - s_asym / norm);
        }
        LargeTimeDiagnostic {
            lambda2,
            printed,
            asymptotic,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LargeTimeDiagnostic {
    pub lambda2: Option<c64>,
    pub printed: Vec<f64>,
    pub asymptotic: Vec<f64>,
}

/// `int_0^t exp(-lambda s) ds`.
fn integrated_mode(lambda: c64, t: f64) -> c64 {
    if lambda.norm() < ZERO_MODE {
        c64::new(t, 0.0)
    } else {
        (c64::new(1.0, 0.0) - (-lambda * t).exp()) / lambda
    }
}

fn check_monotone(rho: &[f64]) -> Result<()> {
    for (k, w) in rho.windows(2).enumerate() {
        if w[1] < w[0] - MONOTONE_SLACK {
            return Err(Error::Numerical(format!(
                "analytic coverage decreases by {:.3e} at sample {}",
                w[0] - w[1],
                k + 1
            )));
        }
    }
    Ok(())
}

/// Analytic coverage of the walk `strategy` on `net`.
pub fn coverage_analytic(net: &MultiplexNetwork, strategy: Strategy, times: &[f64]) -> Result<CoverageCurve> {
    let p = build_supra_transition(net, strategy)?;
    coverage_analytic_with(&p, times, &CoverageOptions::default())
}

pub fn coverage_analytic_with(p: &SupraTransitionMatrix, times: &[f64], options: &CoverageOptions) -> Result<CoverageCurve> {
    check_grid(times)?;
    let n = p.n_nodes();
    if n == 0 {
        return Err(Error::InvalidArgument("coverage of an empty network".into()));
    }
    let rho = match options.model {
        _ if n == 1 => vec![1.0; times.len()],
        CoverageModel::Exact => {
            let per_target: Vec<Vec<f64>> = (0..n)
                .into_par_iter()
                .map(|i| target_survival(p, i, options.origins, times))
                .collect::<Result<_>>()?;
            let norm = (n * n) as f64;
            (0..times.len())
                .map(|k| 1.0 - per_target.iter().map(|s| s[k]).sum::<f64>() / norm)
                .collect()
        }
        CoverageModel::MeanField => AnalyticCoverageState::new(p, options.origins)?.rho(times),
    };
    check_monotone(&rho)?;
    Ok(CoverageCurve {
        times: times.to_vec(),
        rho,
        method: CoverageMethod::Analytic,
        strategy: p.strategy(),
        directed: p.directed(),
    })
}

/// Discrete-time Monte Carlo coverage at steps `0..=horizon`.
///
/// Walker `k` from origin state `o` draws from a generator seeded by
/// `(seed, o, k)`, so the curve is reproducible and independent of thread
/// scheduling.
pub fn coverage_montecarlo(
    p: &SupraTransitionMatrix,
    walkers_per_origin: usize,
    horizon: usize,
    seed: u64,
    mode: OriginMode,
) -> Result<CoverageCurve> {
    if walkers_per_origin == 0 {
        return Err(Error::InvalidArgument("need at least one walker per origin".into()));
    }
    let n = p.n_nodes();
    if n == 0 {
        return Err(Error::InvalidArgument("coverage of an empty network".into()));
    }
    let sampler = Sampler::new(p);
    let origins: Vec<usize> = (0..n)
        .flat_map(|j| match mode {
            OriginMode::FirstLayer => vec![p.supra_index(j, 0)],
            OriginMode::AllReplicas => (0..p.n_layers()).map(|a| p.supra_index(j, a)).collect(),
        })
        .collect();

    let increments: Vec<Vec<u64>> = origins
        .par_iter()
        .map(|&origin| {
            let mut fresh = vec![0u64; horizon + 1];
            let mut seen = vec![false; n];
            let origin_seed = mix_seed(seed, origin as u64);
            for walker in 0..walkers_per_origin {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(origin_seed, walker as u64));
                seen.fill(false);
                let mut state = origin;
                seen[p.node_of(state)] = true;
                fresh[0] += 1;
                let mut count = 1;
                for slot in fresh.iter_mut().skip(1) {
                    if count == n {
                        break;
                    }
                    state = sampler.step(state, &mut rng);
                    let node = p.node_of(state);
                    if !seen[node] {
                        seen[node] = true;
                        count += 1;
                        *slot += 1;
                    }
                }
            }
            fresh
        })
        .collect();

    let mut visited = vec![0u64; horizon + 1];
    for inc in &increments {
        for (v, x) in visited.iter_mut().zip(inc) {
            *v += x;
        }
    }
    let denom = (n * origins.len() * walkers_per_origin) as f64;
    let mut running = 0u64;
    let rho = visited
        .iter()
        .map(|&v| {
            running += v;
            running as f64 / denom
        })
        .collect();
    Ok(CoverageCurve {
        times: (0..=horizon).map(|t| t as f64).collect(),
        rho,
        method: CoverageMethod::MonteCarlo,
        strategy: p.strategy(),
        directed: p.directed(),
    })
}

/// First grid time at which `rho >= level`, refined by interpolating
/// `log t` linearly in `rho` between the bracketing samples.
pub fn time_to_coverage(curve: &CoverageCurve, level: f64) -> Option<f64> {
    let k = curve.rho.iter().position(|&r| r >= level)?;
    if k == 0 {
        return Some(curve.times[0]);
    }
    let (t0, t1) = (curve.times[k - 1], curve.times[k]);
    let (r0, r1) = (curve.rho[k - 1], curve.rho[k]);
    if r1 == level || r1 <= r0 {
        return Some(t1);
    }
    let frac = (level - r0) / (r1 - r0);
    if t0 > 0.0 {
        Some((t0.ln() + frac * (t1.ln() - t0.ln())).exp())
    } else {
        Some(t0 + frac * (t1 - t0))
    }
}

/// Time to reach a coverage level, or `NotReached`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoverageTime {
    Reached(f64),
    NotReached,
}

impl From<Option<f64>> for CoverageTime {
    fn from(t: Option<f64>) -> Self {
        t.map_or(CoverageTime::NotReached, CoverageTime::Reached)
    }
}

impl CoverageTime {
    pub fn value(self) -> Option<f64> {
        match self {
            CoverageTime::Reached(t) => Some(t),
            CoverageTime::NotReached => None,
        }
    }
}

impl Serialize for CoverageTime {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CoverageTime::Reached(t) => s.serialize_f64(*t),
            CoverageTime::NotReached => s.serialize_str("not reached"),
        }
    }
}

impl std::fmt::Display for CoverageTime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CoverageTime::Reached(t) => write!(f, "{t}"),
            CoverageTime::NotReached => f.write_str("not reached"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportConfig {
    pub strategy: Strategy,
    pub directed: bool,
    pub stage: String,
    pub model: CoverageModel,
    pub method: CoverageMethod,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub params: Option<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NavigabilityReport {
    pub config: ReportConfig,
    pub spectral_gap: f64,
    pub t90: CoverageTime,
    pub curve: CoverageCurve,
    /// Leading transition eigenvalues, real part descending.
    pub eigenvalue_head: Vec<c64>,
}

#[derive(Serialize)]
struct ReportJson<'a> {
    config: &'a ReportConfig,
    spectral_gap: f64,
    t90: CoverageTime,
    curve_file: &'a str,
    eigenvalue_head: Vec<[f64; 2]>,
}

impl NavigabilityReport {
    pub fn to_json(&self, curve_file: &str) -> Result<String> {
        let body = ReportJson {
            config: &self.config,
            spectral_gap: self.spectral_gap,
            t90: self.t90,
            curve_file,
            eigenvalue_head: self.eigenvalue_head.iter().map(|z| [z.re, z.im]).collect(),
        };
        Ok(serde_json::to_string_pretty(&body)?)
    }
}

/// Settings for [`navigability`].
#[derive(Debug, Clone, PartialEq)]
pub struct NavigabilityOptions {
    pub coverage: CoverageOptions,
    pub level: f64,
    pub times: Vec<f64>,
    /// Monte Carlo fallback when the eigenbasis is degraded.
    pub fallback_walkers: usize,
    pub fallback_horizon: usize,
    pub seed: u64,
}

impl Default for NavigabilityOptions {
    fn default() -> Self {
        Self {
            coverage: CoverageOptions::default(),
            level: 0.9,
            times: default_time_grid(),
            fallback_walkers: 1000,
            fallback_horizon: 10_000,
            seed: 0,
        }
    }
}

/// Spectral gap, analytic coverage and time to `options.level` for one
/// walk. If the level is missed while the curve is still rising by more than
/// `1e-4` over its last decade, the grid is extended tenfold once. A degraded
/// eigenbasis falls back to Monte Carlo when `fallback_walkers > 0`.
pub fn navigability(p: &SupraTransitionMatrix, stage: &str, options: &NavigabilityOptions) -> Result<NavigabilityReport> {
    let spectrum = crate::spectral::transition_spectrum(p)?;
    if spectrum.len() < 2 {
        return Err(Error::InvalidArgument("navigability needs at least two supra-states".into()));
    }
    let spectral_gap = spectrum[0].re - spectrum[1].re;

    let analytic = coverage_analytic_with(p, &options.times, &options.coverage).and_then(|curve| {
        if time_to_coverage(&curve, options.level).is_some() || !still_rising(&curve) {
            return Ok(curve);
        }
        let extended = extend_grid(&options.times);
        coverage_analytic_with(p, &extended, &options.coverage)
    });
    let curve = match analytic {
        Ok(curve) => curve,
        Err(Error::Degraded { condition }) if options.fallback_walkers > 0 => {
            log::warn!("eigenbasis degraded (condition {condition:.3e}); using Monte Carlo coverage");
            coverage_montecarlo(
                p,
                options.fallback_walkers,
                options.fallback_horizon,
                options.seed,
                options.coverage.origins,
            )?
        }
        Err(e) => return Err(e),
    };
    Ok(NavigabilityReport {
        config: ReportConfig {
            strategy: p.strategy(),
            directed: p.directed(),
            stage: stage.to_owned(),
            model: options.coverage.model,
            method: curve.method,
            params: None,
        },
        spectral_gap,
        t90: time_to_coverage(&curve, options.level).into(),
        eigenvalue_head: spectrum.into_iter().take(10).collect(),
        curve,
    })
}

fn still_rising(curve: &CoverageCurve) -> bool {
    let (Some(&t_end), Some(&r_end)) = (curve.times.last(), curve.rho.last()) else {
        return false;
    };
    let k = curve.times.partition_point(|&t| t < t_end / 10.0);
    k < curve.rho.len() && r_end - curve.rho[k] > 1e-4
}

fn extend_grid(times: &[f64]) -> Vec<f64> {
    let t_end = *times.last().expect("grid is non-empty");
    let lo = times.partition_point(|&t| t < t_end / 10.0);
    let per_decade = (times.len() - lo).saturating_sub(1).max(1);
    let mut out = times.to_vec();
    out.extend((1..=per_decade).map(|k| t_end * 10f64.powf(k as f64 / per_decade as f64)));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub stage: String,
    pub spectral_gap: f64,
    pub t90: Option<f64>,
    /// Relative change of the gap against the first row.
    pub gap_change: f64,
    /// Relative change of `t90` against the first row, when both are reached.
    pub t90_change: Option<f64>,
}

/// Tabulates reports in the given order against the first one.
pub fn compare_stages(reports: &[NavigabilityReport]) -> Result<Vec<ComparisonRow>> {
    let Some(base) = reports.first() else {
        return Ok(Vec::new());
    };
    let mismatch = reports
        .iter()
        .any(|r| r.config.strategy != base.config.strategy || r.config.directed != base.config.directed);
    if mismatch {
        return Err(Error::InvalidArgument(
            "stage comparison needs one strategy and one directedness".into(),
        ));
    }
    let base_t = base.t90.value();
    Ok(reports
        .iter()
        .map(|r| ComparisonRow {
            stage: r.config.stage.clone(),
            spectral_gap: r.spectral_gap,
            t90: r.t90.value(),
            gap_change: relative(r.spectral_gap, base.spectral_gap),
            t90_change: match (r.t90.value(), base_t) {
                (Some(t), Some(b)) => Some(relative(t, b)),
                _ => None,
            },
        })
        .collect())
}

fn relative(x: f64, base: f64) -> f64 {
    if base == 0.0 {
        if x == 0.0 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (x - base) / base
    }
}

pub fn write_comparison<W: Write>(sink: W, rows: &[ComparisonRow]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    writer.write_record(["stage", "spectral_gap", "t90", "gap_change", "t90_change"])?;
    let opt = |x: Option<f64>| x.map_or_else(|| "not reached".to_owned(), |v| v.to_string());
    for r in rows {
        writer.write_record([
            r.stage.clone(),
            r.spectral_gap.to_string(),
            opt(r.t90),
            r.gap_change.to_string(),
            r.t90_change.map_or_else(String::new, |v| v.to_string()),
        ])?;
    }
    writer.flush().map_err(|e| Error::io("<comparison>", e))?;
    Ok(())
}

/// Rows keyed by stage label, for lookups in tests and tooling.
pub fn comparison_index(rows: &[ComparisonRow]) -> BTreeMap<&str, &ComparisonRow> {
    rows.iter().map(|r| (r.stage.as_str(), r)).collect()
}
