use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use mixclust::harness::{
    format_float, load_multilayer_edge_list, run_method, run_scenario, summarize, thread_count, write_csv,
    BlockPairFile, ClusterReport, Grid, GridParam, Method, RunOptions, ScenarioConfig,
};
use mixclust::models::{renyi_half_binomial, renyi_half_poisson_scalar, separation, Diagonal, Family};
use mixclust::{Error, Result};

#[derive(Parser)]
#[command(name = "mixclust", version, about = "Clustering of multi-layer networks and count mixtures")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation scenario from a config file or flags.
    Simulate(SimulateArgs),
    /// Cluster the layers of a network given as an edge list.
    Cluster(ClusterArgs),
    /// Print the separation between two components.
    Divergence(DivergenceArgs),
    /// Run a built-in scenario (sim1..sim4).
    Benchmark(BenchmarkArgs),
}

#[derive(Args)]
struct RunFlags {
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: MIXCLUST_THREADS, else all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record per-method wall time in the `ms` column.
    #[arg(long)]
    timing: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario config (TOML). Flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    name: Option<String>,
    #[arg(long)]
    family: Option<Family>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    p: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Swept parameter: p, alpha, layers or nodes.
    #[arg(long)]
    grid: Option<String>,
    /// Comma-separated grid values.
    #[arg(long, value_delimiter = ',')]
    values: Option<Vec<f64>>,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[command(flatten)]
    run: RunFlags,
}

#[derive(Args)]
struct ClusterArgs {
    /// Lines of `layer src dst [weight]`.
    edges: PathBuf,
    #[arg(long, default_value = "bernoulli")]
    family: Family,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value = "refine-rspec")]
    method: Method,
    /// Leave self-loops out of the likelihood.
    #[arg(long)]
    no_self_loops: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DivergenceFamily {
    PoissonScalar,
    Binomial,
    BernoulliScalar,
    Mmsbm,
    Mmpbm,
}

#[derive(Args)]
struct DivergenceArgs {
    #[arg(long, value_enum)]
    family: DivergenceFamily,
    #[arg(long)]
    theta1: Option<f64>,
    #[arg(long)]
    theta2: Option<f64>,
    #[arg(long)]
    p1: Option<f64>,
    #[arg(long)]
    p2: Option<f64>,
    #[arg(long)]
    trials: Option<u64>,
    /// Block matrices and memberships (TOML) for network families.
    #[arg(long)]
    params: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    scenario: String,
    #[arg(long)]
    replications: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[command(flatten)]
    run: RunFlags,
}

fn required<T>(v: Option<T>, flag: &str) -> Result<T> {
    v.ok_or_else(|| Error::Argument(format!("--{flag} is required for this family")))
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => Ok(std::fs::write(path, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match thread_count(threads)? {
        Some(n) => {
            let pool =
                rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| Error::Config(e.to_string()))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

fn run_and_write(cfg: &ScenarioConfig, run: &RunFlags) -> Result<()> {
    let opts = RunOptions { timing: run.timing };
    let rows = with_threads(run.threads, || run_scenario(cfg, opts))??;
    for s in summarize(&rows) {
        eprintln!(
            "{:<13} {}={:<6} mean hamming {} ({} runs, {} failed)",
            s.method,
            cfg.grid.parameter.name(),
            format_float(s.value),
            format_float(s.mean_hamming),
            s.runs,
            s.failures
        );
    }
    let out = run.out.clone().or_else(|| cfg.output.clone().map(PathBuf::from));
    emit(&write_csv(&rows), out.as_deref())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => {
            let mut base = ScenarioConfig::preset("sim1")?;
            base.name = "custom".into();
            base
        }
    };
    if let Some(v) = a.name {
        cfg.name = v;
    }
    if let Some(v) = a.family {
        cfg.family = v;
    }
    if let Some(v) = a.nodes {
        cfg.nodes = v;
    }
    if let Some(v) = a.layers {
        cfg.layers = v;
    }
    if let Some(v) = a.k {
        cfg.k = v;
    }
    if let Some(v) = a.p {
        cfg.p = v;
    }
    if let Some(v) = a.alpha {
        cfg.alpha = v;
    }
    if let Some(g) = a.grid {
        let parameter = match g.as_str() {
            "p" => GridParam::P,
            "alpha" => GridParam::Alpha,
            "layers" => GridParam::Layers,
            "nodes" => GridParam::Nodes,
            other => return Err(Error::Argument(format!("unknown grid parameter `{other}`"))),
        };
        cfg.grid = Grid { parameter, values: cfg.grid.values };
    }
    if let Some(v) = a.values {
        cfg.grid.values = v;
    }
    if let Some(v) = a.replications {
        cfg.replications = v;
    }
    if let Some(v) = a.methods {
        cfg.methods = v;
    }
    if let Some(v) = a.run.seed {
        cfg.seed = v;
    }
    cfg.validate()?;
    run_and_write(&cfg, &a.run)
}

fn benchmark(a: BenchmarkArgs) -> Result<()> {
    let mut cfg = ScenarioConfig::preset(&a.scenario)?;
    if let Some(v) = a.replications {
        cfg.replications = v;
    }
    if let Some(v) = a.methods {
        cfg.methods = v;
    }
    if let Some(v) = a.run.seed {
        cfg.seed = v;
    }
    cfg.validate()?;
    run_and_write(&cfg, &a.run)
}

fn cluster(a: ClusterArgs) -> Result<()> {
    let net = load_multilayer_edge_list(&a.edges, a.family)?;
    let diagonal = if a.no_self_loops { Diagonal::Exclude } else { Diagonal::Include };
    let result = with_threads(a.threads, || run_method(&net.tensor, a.method, a.family, a.k, diagonal, a.seed))??;
    let report = ClusterReport::new(&result, a.method, a.family, a.k);
    emit(&report.to_toml(), a.out.as_deref())
}

fn divergence(a: DivergenceArgs) -> Result<()> {
    let value = match a.family {
        DivergenceFamily::PoissonScalar => {
            renyi_half_poisson_scalar(required(a.theta1, "theta1")?, required(a.theta2, "theta2")?)?
        }
        DivergenceFamily::Binomial => {
            renyi_half_binomial(required(a.trials, "trials")?, required(a.p1, "p1")?, required(a.p2, "p2")?)?
        }
        DivergenceFamily::BernoulliScalar => renyi_half_binomial(1, required(a.p1, "p1")?, required(a.p2, "p2")?)?,
        DivergenceFamily::Mmsbm | DivergenceFamily::Mmpbm => {
            let family = if matches!(a.family, DivergenceFamily::Mmsbm) { Family::Bernoulli } else { Family::Poisson };
            let path = required(a.params, "params")?;
            let file = BlockPairFile::from_toml(&std::fs::read_to_string(path)?)?;
            separation(&file.params(family)?)?
        }
    };
    println!("{value:?}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Cluster(a) => cluster(a),
        Command::Divergence(a) => divergence(a),
        Command::Benchmark(a) => benchmark(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
