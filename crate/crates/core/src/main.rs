use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use muxnav::coverage::{CoverageModel, CoverageOptions, OriginMode};
use muxnav::edgelist::TrimScope;
use muxnav::network::Placement;
use muxnav::pipeline::{
    cmd_integrate, cmd_navigability, cmd_pipeline, cmd_predict, cmd_scenario, cmd_trim, PipelineConfig,
    ScenarioConfig,
};
use muxnav::{Error, Strategy};

#[derive(Parser)]
#[command(name = "muxnav", version, about = "Link prediction and navigability of multiplex flow networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Keep edges carrying at least trim-ratio of the largest flow.
    Trim(Common),
    /// Predict links for each stage on an already trimmed network.
    Predict(Common),
    /// Add predicted links to a network.
    Integrate {
        #[command(flatten)]
        common: Common,
        /// Predicted-links CSV; repeatable.
        #[arg(long, required = true)]
        links: Vec<PathBuf>,
    },
    /// Spectral gap and coverage of one or more network variants.
    Navigability {
        #[command(flatten)]
        common: Common,
        /// Labelled variant `label=path`; repeatable. Defaults to `original=<input>`.
        #[arg(long, value_parser = parse_variant)]
        variant: Vec<(String, PathBuf)>,
    },
    /// Trim, predict, integrate and report navigability in one run.
    Pipeline(Common),
    /// Replicate a single-layer network into layers with random node knockouts.
    Scenario {
        #[arg(long)]
        input: PathBuf,
        /// Fraction of nodes knocked out per layer, in [0, 1).
        #[arg(long)]
        fraction: f64,
        #[arg(long, default_value_t = 5)]
        layers: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Edge-list CSV (`layer,source,target,flow`); repeatable, concatenated in order.
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    #[arg(long)]
    directed: bool,
    /// Also report the undirected network when combined with --directed.
    #[arg(long)]
    undirected: bool,
    #[arg(long, default_value_t = 0.9)]
    trim_ratio: f64,
    #[arg(long, value_enum, default_value_t = ScopeArg::PerLayer)]
    trim_scope: ScopeArg,
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Walk strategies, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "rwc")]
    strategy: Vec<Strategy>,
    /// Prediction stages, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    stages: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    coupling: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = PlacementArg::Subset)]
    placement: PlacementArg,
    #[arg(long, value_enum, default_value_t = ModelArg::Exact)]
    model: ModelArg,
    #[arg(long, value_enum, default_value_t = OriginArg::FirstLayer)]
    origins: OriginArg,
    /// Monte Carlo walkers per origin if the eigenbasis is degraded; 0 disables.
    #[arg(long, default_value_t = 1000)]
    fallback_walkers: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    PerLayer,
    Global,
}

#[derive(Clone, Copy, ValueEnum)]
enum PlacementArg {
    Subset,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Exact,
    MeanField,
}

#[derive(Clone, Copy, ValueEnum)]
enum OriginArg {
    FirstLayer,
    AllReplicas,
}

impl Common {
    fn config(&self) -> PipelineConfig {
        let directed = match (self.directed, self.undirected) {
            (true, true) => vec![false, true],
            (true, false) => vec![true],
            _ => vec![false],
        };
        PipelineConfig {
            inputs: self.input.clone(),
            directed,
            trim_ratio: self.trim_ratio,
            trim_scope: match self.trim_scope {
                ScopeArg::PerLayer => TrimScope::PerLayer,
                ScopeArg::Global => TrimScope::Global,
            },
            threshold: self.threshold,
            strategies: self.strategy.clone(),
            stages: self.stages.clone(),
            coupling: self.coupling,
            seed: self.seed,
            placement: match self.placement {
                PlacementArg::Subset => Placement::SubsetLayers,
                PlacementArg::All => Placement::AllLayers,
            },
            coverage: CoverageOptions {
                model: match self.model {
                    ModelArg::Exact => CoverageModel::Exact,
                    ModelArg::MeanField => CoverageModel::MeanField,
                },
                origins: match self.origins {
                    OriginArg::FirstLayer => OriginMode::FirstLayer,
                    OriginArg::AllReplicas => OriginMode::AllReplicas,
                },
            },
            fallback_walkers: self.fallback_walkers,
            out: self.out.clone(),
        }
    }
}

fn parse_variant(s: &str) -> Result<(String, PathBuf), String> {
    let (label, path) = s.split_once('=').ok_or_else(|| format!("expected label=path, got `{s}`"))?;
    if label.is_empty() || path.is_empty() {
        return Err(format!("expected label=path, got `{s}`"));
    }
    Ok((label.to_owned(), PathBuf::from(path)))
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Trim(common) => {
            let (summary, _) = cmd_trim(&common.config())?;
            println!("{summary}");
        }
        Command::Predict(common) => {
            let (outcome, _) = cmd_predict(&common.config())?;
            println!("{outcome}");
        }
        Command::Integrate { common, links } => {
            let (net, _) = cmd_integrate(&common.config(), &links)?;
            let edges: usize = (0..net.n_layers()).map(|l| net.entry_count(l)).sum();
            println!("integrated network: {} nodes, {} layers, {edges} entries", net.n_nodes(), net.n_layers());
        }
        Command::Navigability { common, variant } => {
            let (reports, _) = cmd_navigability(&common.config(), &variant)?;
            print_reports(&reports);
        }
        Command::Pipeline(common) => {
            let outcome = cmd_pipeline(&common.config())?;
            println!("{}", outcome.trim);
            println!("{}", outcome.predict);
            print_reports(&outcome.reports);
            println!("artifacts: {}", outcome.manifest.artifact_digest());
        }
        Command::Scenario {
            input,
            fraction,
            layers,
            seed,
            out,
        } => {
            let config = ScenarioConfig {
                input,
                fraction,
                layers,
                seed,
                out,
            };
            let (edges, _) = cmd_scenario(&config)?;
            println!("scenario: {} edges over {layers} layers", edges.len());
        }
    }
    Ok(())
}

fn print_reports(reports: &[muxnav::coverage::NavigabilityReport]) {
    for r in reports {
        let tag = if r.config.directed { "directed" } else { "undirected" };
        println!(
            "{} {} {tag}: spectral gap {:.6e}, t90 {}",
            r.config.stage, r.config.strategy, r.spectral_gap, r.t90
        );
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
