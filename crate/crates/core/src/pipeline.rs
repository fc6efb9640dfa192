//! Orchestration behind the CLI subcommands.
//!
//! Every command reads its inputs, writes artifacts atomically under the
//! output directory and finishes with `manifest.json`. Artifact paths in the
//! manifest are relative to the output directory, and no artifact embeds the
//! output directory, so two runs with the same config and inputs produce the
//! same artifact hashes wherever they are written.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::coverage::{
    compare_stages, default_time_grid, navigability, write_comparison, CoverageOptions, NavigabilityOptions,
    NavigabilityReport,
};
use crate::edgelist::{parse_edge_list, trim_edges, write_edges, write_network, EdgeSchema, TrimScope};
use crate::error::{Error, Result};
use crate::network::{build_multiplex, integrate_links, FlowEdge, LayerId, MultiplexNetwork, NodeTable, Placement};
use crate::predict::{dedupe_links, read_links, run_stage, write_links, Algorithm, PredictedLink};
use crate::walk::{build_supra_transition, mix_seed, Strategy};

const PHASE_SCENARIO: u64 = 1;
const PHASE_NAVIGABILITY: u64 = 2;

/// Algorithms run at every stage, in output order.
pub const STAGE_ALGORITHMS: [Algorithm; 2] = [Algorithm::AdamicAdar, Algorithm::Jaccard];

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    /// Combined edge lists, concatenated in order.
    pub inputs: Vec<PathBuf>,
    /// Directedness variants. The first one builds the network that links
    /// are predicted on.
    pub directed: Vec<bool>,
    pub trim_ratio: f64,
    pub trim_scope: TrimScope,
    pub threshold: f64,
    pub strategies: Vec<Strategy>,
    pub stages: Vec<usize>,
    pub coupling: f64,
    pub seed: u64,
    pub placement: Placement,
    pub coverage: CoverageOptions,
    /// Monte Carlo walkers per origin when the eigenbasis is degraded.
    pub fallback_walkers: usize,
    pub out: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            inputs: Vec::new(),
            directed: vec![false],
            trim_ratio: 0.9,
            trim_scope: TrimScope::PerLayer,
            threshold: 0.5,
            strategies: vec![Strategy::Rwc],
            stages: vec![1, 2, 3],
            coupling: 1.0,
            seed: 0,
            placement: Placement::SubsetLayers,
            coverage: CoverageOptions::default(),
            fallback_walkers: 1000,
            out: PathBuf::from("out"),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.inputs.is_empty() {
            return bad("at least one --input is required".into());
        }
        if !(self.trim_ratio > 0.0 && self.trim_ratio <= 1.0) {
            return bad(format!("trim ratio {} must lie in (0, 1]", self.trim_ratio));
        }
        if !(0.0..1.0).contains(&self.threshold) {
            return bad(format!("threshold {} must lie in [0, 1)", self.threshold));
        }
        if !(self.coupling.is_finite() && self.coupling >= 0.0) {
            return bad(format!("coupling {} must be finite and non-negative", self.coupling));
        }
        if self.directed.is_empty() || self.strategies.is_empty() {
            return bad("need at least one strategy and one directedness".into());
        }
        if let Some(k) = self.stages.iter().find(|&&k| !(1..=3).contains(&k)) {
            return bad(format!("stage {k} is not one of 1, 2, 3"));
        }
        Ok(())
    }

    fn validate_stages(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::InvalidArgument("at least one stage is required".into()));
        }
        Ok(())
    }

    fn stages(&self) -> Vec<usize> {
        let mut s = self.stages.clone();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            inputs: self.inputs.iter().map(|p| p.display().to_string()).collect(),
            directed: self.directed.clone(),
            trim_ratio: self.trim_ratio,
            trim_scope: self.trim_scope,
            threshold: self.threshold,
            strategies: self.strategies.clone(),
            stages: self.stages(),
            coupling: self.coupling,
            seed: self.seed,
            placement: self.placement,
            model: self.coverage.model,
            origins: self.coverage.origins,
            fallback_walkers: self.fallback_walkers,
        }
    }
}

/// The configuration as recorded in manifests and reports. The output
/// directory is omitted.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfigEcho {
    pub inputs: Vec<String>,
    pub directed: Vec<bool>,
    pub trim_ratio: f64,
    pub trim_scope: TrimScope,
    pub threshold: f64,
    pub strategies: Vec<Strategy>,
    pub stages: Vec<usize>,
    pub coupling: f64,
    pub seed: u64,
    pub placement: Placement,
    pub model: crate::coverage::CoverageModel,
    pub origins: crate::coverage::OriginMode,
    pub fallback_walkers: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Artifact {
    pub path: String,
    pub kind: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseTiming {
    pub phase: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub artifacts: Vec<Artifact>,
    pub timings: Vec<PhaseTiming>,
}

impl RunManifest {
    fn new(command: &str, config: serde_json::Value) -> Self {
        Self {
            command: command.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            config,
            inputs: Vec::new(),
            artifacts: Vec::new(),
            timings: Vec::new(),
        }
    }

    pub fn artifacts_of(&self, kind: &str) -> Vec<&Artifact> {
        self.artifacts.iter().filter(|a| a.kind == kind).collect()
    }

    /// Hash over every artifact path and hash, ignoring timings.
    pub fn artifact_digest(&self) -> String {
        let mut h = Sha256::new();
        for a in &self.artifacts {
            h.update(a.path.as_bytes());
            h.update([0]);
            h.update(a.sha256.as_bytes());
            h.update([0]);
        }
        hex::encode(h.finalize())
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `bytes` to `path` through a sibling temp file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Collects artifacts and timings for one command.
struct Run {
    root: PathBuf,
    manifest: RunManifest,
}

impl Run {
    fn new(command: &str, config: &PipelineConfig) -> Result<Self> {
        Self::with_echo(command, &config.out, serde_json::to_value(config.echo())?)
    }

    fn with_echo(command: &str, out: &Path, echo: serde_json::Value) -> Result<Self> {
        fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
        Ok(Self {
            root: out.to_path_buf(),
            manifest: RunManifest::new(command, echo),
        })
    }

    fn emit(&mut self, rel: &str, kind: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.root.join(rel), bytes)?;
        self.manifest.artifacts.push(Artifact {
            path: rel.to_owned(),
            kind: kind.to_owned(),
            sha256: sha256_hex(bytes),
        });
        Ok(())
    }

    fn phase<T>(&mut self, name: &'static str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f(self).map_err(|e| Error::phase(name, e));
        self.manifest.timings.push(PhaseTiming {
            phase: name.to_owned(),
            seconds: start.elapsed().as_secs_f64(),
        });
        out
    }

    fn finish(self) -> Result<RunManifest> {
        let bytes = serde_json::to_vec_pretty(&self.manifest)?;
        write_atomic(&self.root.join("manifest.json"), &bytes)?;
        Ok(self.manifest)
    }
}

/// Parsed edges from one or more files sharing a node table.
#[derive(Debug, Clone)]
pub struct LoadedEdges {
    pub edges: Vec<FlowEdge>,
    pub nodes: NodeTable,
    pub n_layers: usize,
    pub digests: Vec<FileDigest>,
}

pub fn load_edges(paths: &[PathBuf]) -> Result<LoadedEdges> {
    load_edges_into(paths, NodeTable::new())
}

fn load_edges_into(paths: &[PathBuf], mut nodes: NodeTable) -> Result<LoadedEdges> {
    let mut edges = Vec::new();
    let mut digests = Vec::new();
    for path in paths {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let parsed = parse_edge_list(&bytes[..], &EdgeSchema::default(), &mut nodes)
            .map_err(|e| Error::in_file(path, e))?;
        edges.extend(parsed);
        digests.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
    }
    let n_layers = edges.iter().map(|e| e.layer.0 + 1).max().unwrap_or(0);
    Ok(LoadedEdges {
        edges,
        nodes,
        n_layers,
        digests,
    })
}

fn render(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    Ok(buf)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrimSummary {
    pub kept: usize,
    pub removed: usize,
}

impl std::fmt::Display for TrimSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "kept {} / removed {}", self.kept, self.removed)
    }
}

/// Trims `config.inputs` to `trimmed.csv`.
pub fn cmd_trim(config: &PipelineConfig) -> Result<(TrimSummary, RunManifest)> {
    config.validate()?;
    let mut run = Run::new("trim", config)?;
    let loaded = load_edges(&config.inputs)?;
    run.manifest.inputs = loaded.digests.clone();
    let summary = run.phase("trim", |run| trim_into(run, &loaded, config).map(|(s, _)| s))?;
    Ok((summary, run.finish()?))
}

fn trim_into(run: &mut Run, loaded: &LoadedEdges, config: &PipelineConfig) -> Result<(TrimSummary, Vec<FlowEdge>)> {
    let kept = trim_edges(&loaded.edges, config.trim_ratio, config.trim_scope)?;
    let bytes = render(|b| write_edges(b, &kept, &loaded.nodes))?;
    run.emit("trimmed.csv", "trimmed", &bytes)?;
    let summary = TrimSummary {
        kept: kept.len(),
        removed: loaded.edges.len() - kept.len(),
    };
    Ok((summary, kept))
}

/// Link counts of one stage, per algorithm.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageCount {
    pub stage: usize,
    pub counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictOutcome {
    /// Per stage, links of every algorithm, each algorithm deduplicated.
    pub stages: Vec<(usize, Vec<PredictedLink>)>,
    /// All stages and algorithms deduplicated.
    pub unique: Vec<PredictedLink>,
}

impl PredictOutcome {
    pub fn counts(&self) -> Vec<StageCount> {
        self.stages
            .iter()
            .map(|(stage, links)| {
                let mut counts: BTreeMap<String, usize> =
                    STAGE_ALGORITHMS.iter().map(|a| (a.to_string(), 0)).collect();
                for l in links {
                    *counts.entry(l.algorithm.to_string()).or_default() += 1;
                }
                StageCount { stage: *stage, counts }
            })
            .collect()
    }

    pub fn stage(&self, k: usize) -> Option<&[PredictedLink]> {
        self.stages.iter().find(|(s, _)| *s == k).map(|(_, l)| &l[..])
    }
}

impl std::fmt::Display for PredictOutcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for c in self.counts() {
            let parts: Vec<String> = c.counts.iter().map(|(a, n)| format!("{a} {n}")).collect();
            writeln!(f, "stage {}: {}", c.stage, parts.join(", "))?;
        }
        write!(f, "unique links: {}", self.unique.len())
    }
}

/// Runs every requested stage with both algorithms on `net`.
pub fn predict_links(net: &MultiplexNetwork, stages: &[usize], threshold: f64) -> Result<PredictOutcome> {
    let mut out = Vec::with_capacity(stages.len());
    for &k in stages {
        if k > net.n_layers() {
            return Err(Error::InvalidArgument(format!(
                "stage {k} needs at least {k} layers, the network has {}",
                net.n_layers()
            )));
        }
        let mut links = Vec::new();
        for algorithm in STAGE_ALGORITHMS {
            links.extend(run_stage(net, k, algorithm, threshold)?);
        }
        out.push((k, links));
    }
    let unique = dedupe_links(out.iter().flat_map(|(_, l)| l.iter().cloned()).collect());
    Ok(PredictOutcome { stages: out, unique })
}

fn predict_into(
    run: &mut Run,
    net: Option<&MultiplexNetwork>,
    nodes: &NodeTable,
    config: &PipelineConfig,
) -> Result<PredictOutcome> {
    let stages = config.stages();
    let outcome = match net {
        Some(net) => predict_links(net, &stages, config.threshold)?,
        None => {
            log::warn!("network has no edges; writing empty link files");
            PredictOutcome {
                stages: stages.iter().map(|&k| (k, Vec::new())).collect(),
                unique: Vec::new(),
            }
        }
    };
    for (k, links) in &outcome.stages {
        let bytes = render(|b| write_links(b, links, nodes))?;
        run.emit(&format!("links_stage{k}.csv"), "links", &bytes)?;
    }
    let bytes = render(|b| write_links(b, &outcome.unique, nodes))?;
    run.emit("links_unique.csv", "links_unique", &bytes)?;
    Ok(outcome)
}

fn build(loaded_edges: &[FlowEdge], nodes: &NodeTable, n_layers: usize, directed: bool, coupling: f64) -> Result<MultiplexNetwork> {
    build_multiplex(nodes.clone(), loaded_edges, n_layers, directed, coupling)
}

/// Predicts links on `config.inputs` taken as already trimmed.
pub fn cmd_predict(config: &PipelineConfig) -> Result<(PredictOutcome, RunManifest)> {
    config.validate()?;
    config.validate_stages()?;
    let mut run = Run::new("predict", config)?;
    let loaded = load_edges(&config.inputs)?;
    run.manifest.inputs = loaded.digests.clone();
    let outcome = run.phase("predict", |run| {
        let net = if loaded.edges.is_empty() {
            None
        } else {
            Some(build(&loaded.edges, &loaded.nodes, loaded.n_layers, config.directed[0], config.coupling)?)
        };
        predict_into(run, net.as_ref(), &loaded.nodes, config)
    })?;
    Ok((outcome, run.finish()?))
}

/// Adds the links in `links` to the network in `config.inputs` and writes
/// `integrated.csv`.
pub fn cmd_integrate(config: &PipelineConfig, links: &[PathBuf]) -> Result<(MultiplexNetwork, RunManifest)> {
    config.validate()?;
    let mut run = Run::new("integrate", config)?;
    let loaded = load_edges(&config.inputs)?;
    run.manifest.inputs = loaded.digests.clone();
    let net = build(&loaded.edges, &loaded.nodes, loaded.n_layers, config.directed[0], config.coupling)?;
    let mut predicted = Vec::new();
    for path in links {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        predicted.extend(read_links(&bytes[..], net.nodes(), net.n_layers()).map_err(|e| Error::in_file(path, e))?);
        run.manifest.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: sha256_hex(&bytes),
        });
    }
    let integrated = run.phase("integrate", |run| {
        let merged = integrate_links(&net, &dedupe_links(predicted), config.placement);
        let bytes = render(|b| write_network(b, &merged))?;
        run.emit("integrated.csv", "network", &bytes)?;
        Ok(merged)
    })?;
    Ok((integrated, run.finish()?))
}

fn direction_tag(directed: bool) -> &'static str {
    if directed {
        "directed"
    } else {
        "undirected"
    }
}

fn navigability_options(config: &PipelineConfig) -> NavigabilityOptions {
    NavigabilityOptions {
        coverage: config.coverage,
        level: 0.9,
        times: default_time_grid(),
        fallback_walkers: config.fallback_walkers,
        fallback_horizon: 10_000,
        seed: mix_seed(config.seed, PHASE_NAVIGABILITY),
    }
}

/// Writes the report, the curve and, for several variants, the comparison
/// table for every strategy over `variants` (label, network) of one
/// directedness.
fn navigability_into(
    run: &mut Run,
    variants: &[(String, MultiplexNetwork)],
    directed: bool,
    config: &PipelineConfig,
) -> Result<Vec<NavigabilityReport>> {
    let options = navigability_options(config);
    let params = serde_json::to_value(config.echo())?;
    let tag = direction_tag(directed);
    let mut all = Vec::new();
    for &strategy in &config.strategies {
        let mut reports = Vec::with_capacity(variants.len());
        for (label, net) in variants {
            let p = build_supra_transition(net, strategy)?;
            let mut report = navigability(&p, label, &options)?;
            report.config.params = Some(params.clone());
            let stem = format!("navigability/{label}_{strategy}_{tag}");
            let curve_file = format!("{label}_{strategy}_{tag}_curve.csv");
            let curve = render(|b| report.curve.write_csv(b))?;
            run.emit(&format!("{stem}_curve.csv"), "curve", &curve)?;
            run.emit(&format!("{stem}.json"), "report", report.to_json(&curve_file)?.as_bytes())?;
            log::info!(
                "{label} {strategy} {tag}: gap {:.6e}, t90 {}",
                report.spectral_gap,
                report.t90
            );
            reports.push(report);
        }
        if reports.len() > 1 {
            let rows = compare_stages(&reports)?;
            let bytes = render(|b| write_comparison(b, &rows))?;
            run.emit(&format!("navigability/comparison_{strategy}_{tag}.csv"), "comparison", &bytes)?;
        }
        all.extend(reports);
    }
    Ok(all)
}

/// Navigability of labelled network variants. With no variants the network in
/// `config.inputs` is reported as `original`.
pub fn cmd_navigability(
    config: &PipelineConfig,
    variants: &[(String, PathBuf)],
) -> Result<(Vec<NavigabilityReport>, RunManifest)> {
    config.validate()?;
    let mut run = Run::new("navigability", config)?;
    let sources: Vec<(String, Vec<PathBuf>)> = if variants.is_empty() {
        vec![("original".to_owned(), config.inputs.clone())]
    } else {
        variants.iter().map(|(l, p)| (l.clone(), vec![p.clone()])).collect()
    };
    if let Some((label, _)) = sources.iter().find(|(l, _)| !is_plain_label(l)) {
        return Err(Error::InvalidArgument(format!(
            "variant label `{label}` may only use letters, digits, `-` and `_`"
        )));
    }
    let mut loaded = Vec::with_capacity(sources.len());
    for (label, paths) in &sources {
        let l = load_edges(paths)?;
        run.manifest.inputs.extend(l.digests.iter().cloned());
        loaded.push((label.clone(), l));
    }
    let mut reports = Vec::new();
    for &directed in &config.directed {
        let nets = loaded
            .iter()
            .map(|(label, l)| {
                build(&l.edges, &l.nodes, l.n_layers, directed, config.coupling).map(|n| (label.clone(), n))
            })
            .collect::<Result<Vec<_>>>()?;
        reports.extend(run.phase("navigability", |run| navigability_into(run, &nets, directed, config))?);
    }
    Ok((reports, run.finish()?))
}

fn is_plain_label(label: &str) -> bool {
    !label.is_empty() && label.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

#[derive(Debug)]
pub struct PipelineOutcome {
    pub trim: TrimSummary,
    pub predict: PredictOutcome,
    pub reports: Vec<NavigabilityReport>,
    pub manifest: RunManifest,
}

/// Trim, build, predict, integrate each stage into the original network and
/// report navigability for every strategy, directedness and variant.
///
/// A failing phase aborts the run with the phase name; artifacts already
/// written stay on disk and are listed in the manifest.
pub fn cmd_pipeline(config: &PipelineConfig) -> Result<PipelineOutcome> {
    config.validate()?;
    config.validate_stages()?;
    let mut run = Run::new("pipeline", config)?;
    let result = pipeline_phases(&mut run, config);
    match result {
        Ok((trim, predict, reports)) => Ok(PipelineOutcome {
            trim,
            predict,
            reports,
            manifest: run.finish()?,
        }),
        Err(e) => {
            run.finish()?;
            Err(e)
        }
    }
}

fn pipeline_phases(
    run: &mut Run,
    config: &PipelineConfig,
) -> Result<(TrimSummary, PredictOutcome, Vec<NavigabilityReport>)> {
    let loaded = run.phase("ingest", |_| load_edges(&config.inputs))?;
    run.manifest.inputs = loaded.digests.clone();
    let (trim, kept) = run.phase("trim", |run| trim_into(run, &loaded, config))?;

    let stages = config.stages();
    let primary = config.directed[0];
    let original = run.phase("build", |_| build(&kept, &loaded.nodes, loaded.n_layers, primary, config.coupling))?;
    let predict = run.phase("predict", |run| {
        let net = (!kept.is_empty()).then_some(&original);
        predict_into(run, net, &loaded.nodes, config)
    })?;

    let stage_links: Vec<(usize, Vec<PredictedLink>)> = predict
        .stages
        .iter()
        .map(|(k, links)| (*k, dedupe_links(links.clone())))
        .collect();
    run.phase("integrate", |run| {
        for (k, links) in &stage_links {
            let merged = integrate_links(&original, links, config.placement);
            let bytes = render(|b| write_network(b, &merged))?;
            run.emit(&format!("network_stage{k}.csv"), "network", &bytes)?;
        }
        Ok(())
    })?;

    let mut reports = Vec::new();
    for &directed in &config.directed {
        let base = build(&kept, &loaded.nodes, loaded.n_layers, directed, config.coupling)?;
        let mut variants = vec![("original".to_owned(), base.clone())];
        for (k, links) in &stage_links {
            variants.push((format!("stage{k}"), integrate_links(&base, links, config.placement)));
        }
        reports.extend(run.phase("navigability", |run| navigability_into(run, &variants, directed, config))?);
    }
    debug_assert_eq!(reports.len(), (stages.len() + 1) * config.strategies.len() * config.directed.len());
    Ok((trim, predict, reports))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub input: PathBuf,
    pub fraction: f64,
    pub layers: usize,
    pub seed: u64,
    #[serde(skip)]
    pub out: PathBuf,
}

/// Replicates a single-layer edge list into `layers` layers and removes, in
/// each layer independently, every edge touching `round(fraction * N)`
/// randomly chosen nodes. Writes `scenario.csv`.
pub fn cmd_scenario(config: &ScenarioConfig) -> Result<(Vec<FlowEdge>, RunManifest)> {
    if !(0.0..1.0).contains(&config.fraction) {
        return Err(Error::InvalidArgument(format!(
            "knockout fraction {} must lie in [0, 1)",
            config.fraction
        )));
    }
    if config.layers == 0 {
        return Err(Error::InvalidArgument("scenario needs at least one layer".into()));
    }
    let mut run = Run::with_echo("scenario", &config.out, serde_json::to_value(config)?)?;
    let loaded = load_edges(std::slice::from_ref(&config.input))?;
    run.manifest.inputs = loaded.digests.clone();
    if loaded.n_layers > 1 {
        return Err(Error::in_file(
            &config.input,
            Error::Construction(format!("base edge list has {} layers, expected one", loaded.n_layers)),
        ));
    }
    let edges = run.phase("scenario", |run| {
        let edges = scenario_edges(&loaded.edges, loaded.nodes.len(), config);
        let bytes = render(|b| write_edges(b, &edges, &loaded.nodes))?;
        run.emit("scenario.csv", "scenario", &bytes)?;
        Ok(edges)
    })?;
    Ok((edges, run.finish()?))
}

fn scenario_edges(base: &[FlowEdge], n_nodes: usize, config: &ScenarioConfig) -> Vec<FlowEdge> {
    let victims_per_layer = (config.fraction * n_nodes as f64).round() as usize;
    let root = mix_seed(config.seed, PHASE_SCENARIO);
    let mut out = Vec::new();
    for layer in 0..config.layers {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(root, layer as u64));
        let mut dead = vec![false; n_nodes];
        for v in sample(&mut rng, n_nodes, victims_per_layer.min(n_nodes)) {
            dead[v] = true;
        }
        out.extend(
            base.iter()
                .filter(|e| !dead[e.source.0] && !dead[e.target.0])
                .map(|e| FlowEdge {
                    layer: LayerId(layer),
                    ..*e
                }),
        );
    }
    out
}
