mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{DesignConfig, GridConfig, KernelConfig, OutputConfig, RunConfig, TargetConfig, VerifyConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Tolerance(String),
    Invariant(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Tolerance(_) => 4,
            CliError::Invariant(_) => 5,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Tolerance(m) => write!(f, "table outside tolerance: {m}"),
            CliError::Invariant(m) => write!(f, "verification failed: {m}"),
        }
    }
}

impl From<blup_core::Error> for CliError {
    fn from(e: blup_core::Error) -> Self {
        use blup_core::Error as E;
        match e {
            E::InvalidInterval { .. }
            | E::QuadratureOrder(_)
            | E::InvalidKernel(_)
            | E::InvalidTrend(_)
            | E::InvalidDesign(_)
            | E::DerivativeOrder { .. }
            | E::DimensionMismatch(_)
            | E::Unsupported(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

/// Best linear unbiased prediction from discrete or continuous observations.
#[derive(Debug, Parser)]
#[command(name = "blup", version)]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Predict at one target and print weights or measures, c, D and the MSE.
    Predict(PredictArgs),
    /// Recompute a reference table (1 to 4) and compare with the published values.
    Table(TableArgs),
    /// Root MSE on a grid of 2D prediction points, as CSV.
    Grid(GridArgs),
    /// Residual scans, Monte Carlo and perturbation checks.
    Verify(VerifyArgs),
}

#[derive(Debug, Args)]
struct ModelArgs {
    /// ou, matern32, bm or ibm.
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    lambda: Option<f64>,
    /// Observation interval (each axis in 2D).
    #[arg(long, num_args = 2, value_names = ["A", "B"])]
    interval: Option<Vec<f64>>,
    /// const1, t or t2.
    #[arg(long)]
    trend: Option<String>,
    /// Design family tag, e.g. xi_N_0 or xi_N2_N2_N2_N2.
    #[arg(long)]
    design: Option<String>,
    #[arg(long = "N")]
    n: Option<usize>,
    /// Explicit 1D value-observation sites.
    #[arg(long, value_delimiter = ',')]
    sites: Option<Vec<f64>>,
    /// Observe the whole path on the interval instead of a design.
    #[arg(long)]
    continuous: bool,
}

#[derive(Debug, Args)]
struct OutputArgs {
    #[arg(long)]
    out: Option<PathBuf>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Target point: one coordinate, or two for the product model.
    #[arg(long, num_args = 1..=2)]
    t0: Option<Vec<f64>>,
    /// Derivative order of the target.
    #[arg(long)]
    p: Option<u8>,
    /// Averaging atom `t:weight`; repeat for several.
    #[arg(long, value_parser = parse_atom)]
    nu: Vec<[f64; 2]>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct TableArgs {
    id: u8,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, num_args = 4, value_names = ["T1_MIN", "T1_MAX", "T2_MIN", "T2_MAX"])]
    region: Option<Vec<f64>>,
    /// Points per axis.
    #[arg(long)]
    resolution: Option<usize>,
    #[command(flatten)]
    output: OutputArgs,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Run the Monte Carlo checks (alone unless other checks are selected).
    #[arg(long)]
    mc: bool,
    /// Run the perturbation-optimality checks.
    #[arg(long)]
    perturb: bool,
    /// Run the residual scans.
    #[arg(long)]
    residuals: bool,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: OutputArgs,
}

fn parse_atom(s: &str) -> Result<[f64; 2], String> {
    let (t, w) = s.split_once(':').ok_or_else(|| format!("expected t:weight, got {s:?}"))?;
    let t = t.trim().parse::<f64>().map_err(|e| format!("{t:?}: {e}"))?;
    let w = w.trim().parse::<f64>().map_err(|e| format!("{w:?}: {e}"))?;
    Ok([t, w])
}

impl ModelArgs {
    fn apply(&self, c: &mut RunConfig) {
        c.kernel = KernelConfig {
            kind: self.kernel.clone(),
            lambda: self.lambda,
        };
        c.interval = self.interval.as_ref().map(|v| [v[0], v[1]]);
        c.trend = self.trend.clone();
        c.design = DesignConfig {
            family: self.design.clone(),
            n: self.n,
            sites: self.sites.clone(),
        };
        c.continuous = self.continuous.then_some(true);
    }
}

impl OutputArgs {
    fn apply(&self, c: &mut RunConfig) {
        c.output = OutputConfig {
            path: self.out.as_ref().map(|p| p.display().to_string()),
            format: self.format.clone(),
        };
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let mut flags = RunConfig::default();
    match cli.command {
        Command::Predict(a) => {
            a.model.apply(&mut flags);
            a.output.apply(&mut flags);
            flags.target = TargetConfig {
                point: a.t0.clone(),
                p: a.p,
                nu: (!a.nu.is_empty()).then(|| a.nu.clone()),
            };
            commands::predict(&file.overlay(&flags))
        }
        Command::Table(a) => {
            a.output.apply(&mut flags);
            commands::table(a.id, &file.overlay(&flags))
        }
        Command::Grid(a) => {
            a.model.apply(&mut flags);
            a.output.apply(&mut flags);
            flags.grid = GridConfig {
                region: a.region.as_ref().map(|v| [v[0], v[1], v[2], v[3]]),
                resolution: a.resolution,
            };
            commands::grid(&file.overlay(&flags))
        }
        Command::Verify(a) => {
            a.output.apply(&mut flags);
            flags.verify = VerifyConfig {
                mc_samples: a.samples,
                seed: a.seed,
            };
            let all = !(a.mc || a.perturb || a.residuals);
            let selection = commands::Selection {
                residuals: all || a.residuals,
                mc: all || a.mc,
                perturb: all || a.perturb,
            };
            commands::verify(&file.overlay(&flags), selection)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
