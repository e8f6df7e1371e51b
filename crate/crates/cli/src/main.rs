mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use hyperlap::hypergraph::{GraphSpec, Method, WeightScheme};

use commands::{GammaPoint, GammaStructure, SolverSettings, TestFunction};
use config::{set, GlobalOverrides, RunConfig};
use error::CliError;

/// Hypergraph p-Laplacian interpolation on point clouds.
#[derive(Debug, Parser)]
#[command(name = "hyperlap", version)]
struct Cli {
    /// Seed for sampling and the solver's edge picks.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON run config, as written to `<out-dir>/config.json`; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (default `out`).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// GpL vs HpL interpolation of a few labels on uniform samples of (0, 1).
    Interp1d(Interp1dArgs),
    /// Compare discrete hypergraph energies with their continuum limit.
    GammaCheck(GammaArgs),
    /// Semi-supervised classification of a labeled point cloud.
    Ssl(SslArgs),
    /// Patch-based inpainting of a grayscale PGM image.
    Inpaint(InpaintArgs),
    /// Check the proximal operator against a brute-force oracle.
    ProxTest(ProxTestArgs),
}

#[derive(Debug, Args)]
struct SolverArgs {
    /// Exponent p >= 1.
    #[arg(long)]
    p: Option<f64>,
    /// Maximum solver epochs.
    #[arg(long)]
    epochs: Option<usize>,
    /// Relative objective change that stops the solver.
    #[arg(long)]
    tol: Option<f64>,
    /// Primal/dual step ratio τ/σ.
    #[arg(long)]
    step_ratio: Option<f64>,
}

impl SolverArgs {
    fn apply(self, s: &mut SolverSettings) {
        set(&mut s.p, self.p);
        set(&mut s.epochs, self.epochs);
        set(&mut s.tol, self.tol);
        if self.step_ratio.is_some() {
            s.step_ratio = self.step_ratio;
        }
    }
}

#[derive(Debug, Args)]
struct Interp1dArgs {
    /// Number of samples.
    #[arg(long)]
    n: Option<usize>,
    /// `eps:VALUE` or `knn:K`.
    #[arg(long)]
    graph: Option<GraphSpec>,
    /// CSV of `index,value` labels.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Args)]
struct GammaArgs {
    /// Hypergraph family.
    #[arg(long = "kind", value_enum)]
    structure: Option<GammaStructure>,
    /// Test function restricted to the samples.
    #[arg(long, value_enum)]
    function: Option<TestFunction>,
    #[arg(long)]
    p: Option<f64>,
    /// Schedule entry `N:PARAM` (ε or k); repeat for several rows.
    #[arg(long = "point")]
    points: Vec<GammaPoint>,
    /// Number of sample draws averaged per row.
    #[arg(long)]
    seeds: Option<usize>,
}

#[derive(Debug, Args)]
struct SslArgs {
    /// CSV of points, one row per vertex.
    #[arg(long)]
    points: Option<PathBuf>,
    /// CSV of `index,class` training labels.
    #[arg(long)]
    labels: Option<PathBuf>,
    /// CSV of `index,class` for every vertex; enables accuracy.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// `gpl` or `hpl`.
    #[arg(long)]
    method: Option<Method>,
    /// `eps:VALUE` or `knn:K`.
    #[arg(long)]
    graph: Option<GraphSpec>,
    /// `homogeneous` or `selftuning:K0`.
    #[arg(long)]
    weights: Option<WeightScheme>,
    /// Predictions CSV path.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Args)]
struct InpaintArgs {
    /// 8-bit PGM (P2 or P5).
    #[arg(long)]
    image: Option<PathBuf>,
    /// Generate a SIDE×SIDE gradient-and-edge image instead of reading one.
    #[arg(long, value_name = "SIDE")]
    synthetic: Option<usize>,
    /// CSV of observed `i,j` pixels.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Observe this fraction of pixels, drawn with `--seed`.
    #[arg(long)]
    sample_rate: Option<f64>,
    #[arg(long)]
    method: Option<Method>,
    /// Patch height (odd).
    #[arg(long)]
    s1: Option<usize>,
    /// Patch width (odd).
    #[arg(long)]
    s2: Option<usize>,
    /// Weight of the pixel coordinates in each patch vector.
    #[arg(long)]
    lambda: Option<f64>,
    /// Neighbors per hyperedge.
    #[arg(long)]
    knn: Option<usize>,
    /// Outer rounds.
    #[arg(long = "K", visible_alias = "rounds")]
    rounds: Option<usize>,
    /// Output PGM path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Metrics JSON path.
    #[arg(long)]
    metrics_out: Option<PathBuf>,
    /// Write ASCII PGM instead of binary.
    #[arg(long)]
    ascii: bool,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Debug, Args)]
struct ProxTestArgs {
    /// Number of random instances.
    #[arg(long)]
    instances: Option<usize>,
}

fn init_threads(threads: Option<usize>) -> Result<(), CliError> {
    if let Some(t) = threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global().map_err(CliError::runtime)?;
    }
    Ok(())
}

fn execute<T>(
    name: &str,
    config: Option<&std::path::Path>,
    globals: &GlobalOverrides,
    apply: impl FnOnce(&mut T),
    run: fn(&RunConfig<T>) -> Result<(), CliError>,
) -> Result<(), CliError>
where
    T: Default + DeserializeOwned + Serialize,
{
    let mut cfg = RunConfig::<T>::load(config, name, globals)?;
    apply(&mut cfg.settings);
    init_threads(cfg.threads)?;
    run(&cfg)?;
    let path = cfg.save()?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    let globals = GlobalOverrides { seed: cli.seed, threads: cli.threads, out_dir: cli.out_dir };
    let config = cli.config.as_deref();
    match cli.command {
        Command::Interp1d(a) => execute(
            "interp1d",
            config,
            &globals,
            |s: &mut commands::Interp1dSettings| {
                set(&mut s.n, a.n);
                set(&mut s.graph, a.graph);
                if a.labels.is_some() {
                    s.labels = a.labels;
                }
                a.solver.apply(&mut s.solver);
            },
            commands::interp1d,
        ),
        Command::GammaCheck(a) => execute(
            "gamma-check",
            config,
            &globals,
            |s: &mut commands::GammaSettings| {
                set(&mut s.structure, a.structure);
                set(&mut s.function, a.function);
                set(&mut s.p, a.p);
                set(&mut s.seeds, a.seeds);
                if !a.points.is_empty() {
                    s.points = a.points;
                }
            },
            commands::gamma,
        ),
        Command::Ssl(a) => execute(
            "ssl",
            config,
            &globals,
            |s: &mut commands::SslSettings| {
                for (slot, flag) in [(&mut s.points, a.points), (&mut s.labels, a.labels), (&mut s.truth, a.truth), (&mut s.out, a.out)] {
                    if flag.is_some() {
                        *slot = flag;
                    }
                }
                set(&mut s.method, a.method);
                set(&mut s.graph, a.graph);
                set(&mut s.weights, a.weights);
                a.solver.apply(&mut s.solver);
            },
            commands::ssl,
        ),
        Command::Inpaint(a) => execute(
            "inpaint",
            config,
            &globals,
            |s: &mut commands::InpaintSettings| {
                // a source or mask flag replaces the file's choice outright
                if a.image.is_some() || a.synthetic.is_some() {
                    s.image = a.image;
                    s.synthetic = a.synthetic;
                }
                if a.mask.is_some() || a.sample_rate.is_some() {
                    s.mask = a.mask;
                    s.sample_rate = a.sample_rate;
                }
                for (slot, flag) in [(&mut s.out, a.out), (&mut s.metrics_out, a.metrics_out)] {
                    if flag.is_some() {
                        *slot = flag;
                    }
                }
                set(&mut s.method, a.method);
                set(&mut s.s1, a.s1);
                set(&mut s.s2, a.s2);
                set(&mut s.lambda, a.lambda);
                set(&mut s.knn, a.knn);
                if a.rounds.is_some() {
                    s.rounds = a.rounds;
                }
                s.ascii |= a.ascii;
                a.solver.apply(&mut s.solver);
            },
            commands::inpaint_cmd,
        ),
        Command::ProxTest(a) => execute(
            "prox-test",
            config,
            &globals,
            |s: &mut commands::ProxTestSettings| set(&mut s.instances, a.instances),
            commands::prox_test,
        ),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.to_string();
            let line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            eprintln!("{}", line.trim());
            return ExitCode::from(2);
        }
    };
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
