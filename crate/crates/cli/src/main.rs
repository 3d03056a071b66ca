mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use quasipot::model::{ModelSpec, Preset};

use config::{
    load, parse_pair, parse_quadrature, parse_stop, parse_values, ContoursConfig, EquilibriaConfig,
    GateScanConfig, GridConfig, McConfig, ModelConfig, QpConfig, SolverConfig,
};
use error::CliError;
use output::OutDir;

/// Quasipotentials, gates and escape statistics of coupled bistable nodes.
///
/// Every run writes its outputs and a `manifest.json` into one directory;
/// `--config manifest.json` reruns it.
#[derive(Parser)]
#[command(name = "quasipot", version)]
struct Cli {
    /// Worker threads for sweeps and ensembles (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory (default: $QUASIPOT_OUT/<command>, else quasipot-out/<command>).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Suppress progress messages.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Continue equilibria in beta and tabulate their bifurcations.
    Equilibria(EquilibriaArgs),
    /// Solve the quasipotential from one attractor, with gates and contours.
    Qp(QpArgs),
    /// Locate the coupling at which two gates exchange order.
    Gatescan(GateScanArgs),
    /// Monte Carlo escape statistics over a parameter sweep.
    Mc(McArgs),
    /// Contour a stored field.
    Contours(ContoursArgs),
}

#[derive(Args)]
struct ModelArgs {
    /// Built-in topology.
    #[arg(long, value_parser = |s: &str| s.parse::<Preset>().map_err(|e| e.to_string()))]
    preset: Option<Preset>,
    /// Custom topology as JSON: {"n_nodes", "edges", "nu", "beta", "alpha", "frozen"}.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    nu: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
}

impl ModelArgs {
    fn apply(&self, c: &mut ModelConfig) -> Result<(), CliError> {
        if let Some(p) = self.preset {
            c.preset = p;
            c.custom = None;
        }
        if let Some(path) = &self.model {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let spec: ModelSpec = serde_json::from_str(&text)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            c.nu = spec.nu;
            c.alpha = spec.alpha;
            c.custom = Some(spec);
        }
        set(&mut c.nu, self.nu);
        set(&mut c.alpha, self.alpha);
        Ok(())
    }
}

#[derive(Args)]
struct GridArgs {
    /// Points per side of the square grid, e.g. 256, 512 or 1024.
    #[arg(long)]
    grid: Option<usize>,
    /// Coordinate window shared by both axes, as LO,HI.
    #[arg(long, value_parser = parse_pair, allow_hyphen_values = true)]
    window: Option<(f64, f64)>,
}

impl GridArgs {
    fn apply(&self, c: &mut GridConfig) {
        set(&mut c.n, self.grid);
        set(&mut c.window, self.window);
    }
}

#[derive(Args)]
struct SolverArgs {
    /// Update radius in grid cells.
    #[arg(long)]
    k: Option<usize>,
    /// midpoint or three-point.
    #[arg(long, value_parser = parse_quadrature)]
    quadrature: Option<quasipot::qp::Quadrature>,
}

impl SolverArgs {
    fn apply(&self, c: &mut SolverConfig) {
        set(&mut c.k, self.k);
        set(&mut c.quadrature, self.quadrature);
    }
}

#[derive(Args)]
struct EquilibriaArgs {
    /// JSON config or manifest; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    /// LO,HI. Equal ends list the equilibria at that coupling only.
    #[arg(long, value_parser = parse_pair)]
    beta_range: Option<(f64, f64)>,
    /// Continuation step in beta.
    #[arg(long)]
    step: Option<f64>,
}

#[derive(Args)]
struct QpArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    beta: Option<f64>,
    /// Label of the attractor, e.g. QQ or AQ.
    #[arg(long)]
    anchor: Option<String>,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Contour levels as a list or start:stop:step.
    #[arg(long, value_parser = parse_values)]
    levels: Option<::std::vec::Vec<f64>>,
}

#[derive(Args)]
struct GateScanArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long)]
    anchor: Option<String>,
    /// The two saddles to compare, as A,B.
    #[arg(long)]
    pair: Option<String>,
    #[arg(long, value_parser = parse_pair)]
    beta_range: Option<(f64, f64)>,
    #[command(flatten)]
    grid: GridArgs,
    /// Side of the grid for the coarse pass.
    #[arg(long)]
    coarse_grid: Option<usize>,
    /// Bisection tolerance in beta.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    coarse_samples: Option<usize>,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct McArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    model: ModelArgs,
    /// Coupling values, as a list or start:stop:step.
    #[arg(long, value_parser = parse_values)]
    betas: Option<::std::vec::Vec<f64>>,
    /// Noise amplitudes to sweep.
    #[arg(long, value_parser = parse_values)]
    alphas: Option<::std::vec::Vec<f64>>,
    /// Values of nu to sweep.
    #[arg(long, value_parser = parse_values)]
    nus: Option<::std::vec::Vec<f64>>,
    /// Realisations per sweep point.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    /// Escape threshold.
    #[arg(long)]
    xi: Option<f64>,
    /// Return threshold.
    #[arg(long, allow_hyphen_values = true)]
    xi_prime: Option<f64>,
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// all-above or first-event.
    #[arg(long, value_parser = parse_stop)]
    stop: Option<quasipot::mc::StopCondition>,
    /// "quiescent", or the label of the starting equilibrium.
    #[arg(long)]
    start: Option<String>,
}

#[derive(Args)]
struct ContoursArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Field file written by `qp`.
    #[arg(long)]
    field: Option<PathBuf>,
    #[arg(long, value_parser = parse_values)]
    levels: Option<::std::vec::Vec<f64>>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn base<T: Default + serde::de::DeserializeOwned>(
    path: &Option<PathBuf>,
    command: &str,
) -> Result<T, CliError> {
    path.as_deref()
        .map_or_else(|| Ok(T::default()), |p| load(p, command))
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let out = |name: &str| OutDir::resolve(cli.out.as_deref(), name, cli.quiet);
    match &cli.command {
        Command::Equilibria(a) => {
            let mut c: EquilibriaConfig = base(&a.config, "equilibria")?;
            a.model.apply(&mut c.model)?;
            set(&mut c.beta_range, a.beta_range);
            set(&mut c.step, a.step);
            commands::equilibria(&c, out("equilibria")?)
        }
        Command::Qp(a) => {
            let mut c: QpConfig = base(&a.config, "qp")?;
            a.model.apply(&mut c.model)?;
            set(&mut c.beta, a.beta);
            set(&mut c.anchor, a.anchor.clone());
            a.grid.apply(&mut c.grid);
            a.solver.apply(&mut c.solver);
            set(&mut c.levels, a.levels.clone());
            commands::qp(&c, out("qp")?)
        }
        Command::Gatescan(a) => {
            let mut c: GateScanConfig = base(&a.config, "gatescan")?;
            a.model.apply(&mut c.model)?;
            set(&mut c.anchor, a.anchor.clone());
            if let Some(p) = &a.pair {
                let (x, y) = p
                    .split_once(',')
                    .ok_or_else(|| CliError::Config(format!("--pair expects A,B, got {p:?}")))?;
                c.pair = (x.trim().to_string(), y.trim().to_string());
            }
            set(&mut c.beta_range, a.beta_range);
            a.grid.apply(&mut c.grid);
            if a.coarse_grid.is_some() {
                c.coarse_n = a.coarse_grid;
            }
            set(&mut c.tol_beta, a.tol);
            set(&mut c.coarse_samples, a.coarse_samples);
            a.solver.apply(&mut c.solver);
            commands::gatescan(&c, out("gatescan")?)
        }
        Command::Mc(a) => {
            let mut c: McConfig = base(&a.config, "mc")?;
            a.model.apply(&mut c.model)?;
            set(&mut c.betas, a.betas.clone());
            set(&mut c.alphas, a.alphas.clone());
            set(&mut c.nus, a.nus.clone());
            set(&mut c.start, a.start.clone());
            let s = &mut c.simulation;
            set(&mut s.n_realisations, a.n);
            set(&mut s.dt, a.dt);
            set(&mut s.xi, a.xi);
            set(&mut s.xi_prime, a.xi_prime);
            set(&mut s.t_max, a.t_max);
            set(&mut s.master_seed, a.seed);
            set(&mut s.stop, a.stop);
            commands::mc(&c, out("mc")?)
        }
        Command::Contours(a) => {
            let mut c: ContoursConfig = base(&a.config, "contours")?;
            if let Some(f) = &a.field {
                c.field = f.display().to_string();
            }
            set(&mut c.levels, a.levels.clone());
            commands::contours(&c, out("contours")?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
