use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use cwflow_core::model::{DEFAULT_ATOL, DEFAULT_RTOL};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "cwflow", version, about = "Optimal histories and Gibbs/non-Gibbs transitions of Curie-Weiss Glauber dynamics")]
pub struct Cli {
    /// Worker threads (default: CWFLOW_THREADS, then one per core). Never affects outputs.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output stem; writes STEM.csv and STEM.json (default: cwflow-<command>).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Re-run a configuration: a config JSON or any summary JSON written by cwflow.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Option<Command>,
}

#[derive(Subcommand, Serialize, Deserialize, Debug, Clone, PartialEq)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum Command {
    /// Lagrangian, optimal momentum and Hamiltonian on an (m, v) grid or at one point
    Lagrangian(LagrangianArgs),
    /// One optimal-path trajectory with action and first integral
    Trajectory(TrajectoryArgs),
    /// The allowed-configurations curve transported to time t
    Transport(TransportArgs),
    /// Cost profile m0 -> E(m0) for a fixed end point
    Cost(CostArgs),
    /// Pre-bad intervals and bad magnetizations at time t
    Bad(BadArgs),
    /// Single-site kernel gamma(+|m') at one m' or on a grid
    Gamma(GammaArgs),
    /// Numerical thresholds t0, t1, t_per and the closed-form transition time
    Thresholds(ThresholdArgs),
    /// Gibbs/non-Gibbs diagram over (1/beta, t) at fixed beta'
    Diagram(DiagramArgs),
    /// Finite-N Monte Carlo: kernel estimate or recorded paths
    Mc(McArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Lagrangian(_) => "lagrangian",
            Command::Trajectory(_) => "trajectory",
            Command::Transport(_) => "transport",
            Command::Cost(_) => "cost",
            Command::Bad(_) => "bad",
            Command::Gamma(_) => "gamma",
            Command::Thresholds(_) => "thresholds",
            Command::Diagram(_) => "diagram",
            Command::Mc(_) => "mc",
        }
    }
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Relative tolerance of the ODE integrator.
    #[arg(long, default_value_t = DEFAULT_RTOL)]
    pub rtol: f64,
    /// Absolute tolerance of the ODE integrator.
    #[arg(long, default_value_t = DEFAULT_ATOL)]
    pub atol: f64,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct LagrangianArgs {
    #[arg(long, default_value_t = 0.0)]
    pub beta_prime: f64,
    /// Single point mode: magnetization (requires --v).
    #[arg(long, requires = "v", allow_hyphen_values = true)]
    pub m: Option<f64>,
    /// Single point mode: velocity (requires --m).
    #[arg(long, requires = "m", allow_hyphen_values = true)]
    pub v: Option<f64>,
    /// Points per axis of the (m, v) grid.
    #[arg(long, default_value_t = 41)]
    pub grid: usize,
    /// The grid covers m in [-m_max, m_max].
    #[arg(long, default_value_t = 0.95)]
    pub m_max: f64,
    /// The grid covers v in [-v_max, v_max].
    #[arg(long, default_value_t = 4.0)]
    pub v_max: f64,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct TrajectoryArgs {
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub beta_prime: f64,
    #[arg(long)]
    pub t: f64,
    /// Initial magnetization.
    #[arg(long, allow_hyphen_values = true)]
    pub m0: f64,
    /// Initial velocity (default: on the allowed-configurations curve).
    #[arg(long, allow_hyphen_values = true)]
    pub v0: Option<f64>,
    /// Number of output samples on [0, t].
    #[arg(long, default_value_t = 201)]
    pub grid: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub tol: Tolerances,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct TransportArgs {
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub beta_prime: f64,
    #[arg(long)]
    pub t: f64,
    /// Initial m0 grid size before refinement.
    #[arg(long, default_value_t = 401)]
    pub grid: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub tol: Tolerances,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct CostArgs {
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub beta_prime: f64,
    #[arg(long)]
    pub t: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub m_prime: f64,
    /// Number of m0 samples in [-m0_max, m0_max].
    #[arg(long, default_value_t = 201)]
    pub grid: usize,
    #[arg(long, default_value_t = 0.95)]
    pub m0_max: f64,
    #[command(flatten)]
    #[serde(flatten)]
    pub tol: Tolerances,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct BadArgs {
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub beta_prime: f64,
    #[arg(long)]
    pub t: f64,
    /// Global m' grid size.
    #[arg(long, default_value_t = 2001)]
    pub grid: usize,
    /// Initial m0 grid size of the transported curve.
    #[arg(long, default_value_t = 401)]
    pub transport_points: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub tol: Tolerances,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct GammaArgs {
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub beta_prime: f64,
    #[arg(long)]
    pub t: f64,
    /// Single conditioning magnetization (default: a grid over [-0.95, 0.95]).
    #[arg(long, allow_hyphen_values = true)]
    pub m_prime: Option<f64>,
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
    #[arg(long, default_value_t = 401)]
    pub transport_points: usize,
    #[command(flatten)]
    #[serde(flatten)]
    pub tol: Tolerances,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct ThresholdArgs {
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub beta_prime: f64,
    /// Upper end of the time search.
    #[arg(long)]
    pub t_max: f64,
    /// Uniform time steps of the bracketing scan.
    #[arg(long, default_value_t = 40)]
    pub steps: usize,
    /// Global m' grid size of each bad-set scan.
    #[arg(long, default_value_t = 2001)]
    pub grid: usize,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct DiagramArgs {
    #[arg(long)]
    pub beta_prime: f64,
    #[arg(long, default_value_t = 0.1)]
    pub beta_inv_min: f64,
    #[arg(long, default_value_t = 1.2)]
    pub beta_inv_max: f64,
    /// Number of 1/beta columns.
    #[arg(long, default_value_t = 12)]
    pub columns: usize,
    #[arg(long, default_value_t = 1.0)]
    pub t_max: f64,
    /// Number of time rows on (0, t_max].
    #[arg(long, default_value_t = 10)]
    pub grid: usize,
    /// Global m' grid size of each cell's bad-set scan.
    #[arg(long, default_value_t = 401)]
    pub bad_grid: usize,
    /// Trace the boundary per column by bisection.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub trace: bool,
    /// Fail (exit 3) when more than this fraction of cells is Unknown.
    #[arg(long, default_value_t = 0.05)]
    pub max_unknown: f64,
}

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum McMode {
    /// Windowed estimate of gamma(+|m') from the tagged-spin process.
    Kernel,
    /// Recorded magnetization paths.
    Path,
}

#[derive(Args, Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct McArgs {
    #[arg(long, value_enum, default_value_t = McMode::Kernel)]
    pub mode: McMode,
    #[arg(long)]
    pub beta: f64,
    #[arg(long)]
    pub beta_prime: f64,
    #[arg(long)]
    pub t: f64,
    /// Number of spins.
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Conditioning magnetization (kernel mode).
    #[arg(long, allow_hyphen_values = true)]
    pub m_prime: Option<f64>,
    /// Conditioning half-width (default 2/sqrt(n)).
    #[arg(long)]
    pub window: Option<f64>,
    /// Independent replicas (kernel mode) or runs (path mode).
    #[arg(long, default_value_t = 4000)]
    pub replicas: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Fixed initial magnetization (path mode; default: sampled at beta).
    #[arg(long, allow_hyphen_values = true)]
    pub m0: Option<f64>,
    /// Recorded times per path on [0, t] (path mode).
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
}

/// Fully resolved run description, embedded in every output file.
#[derive(Serialize, Deserialize, Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub version: String,
    #[serde(flatten)]
    pub command: Command,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        RunConfig { version: crate::VERSION.to_string(), command }
    }

    /// Reads a config file. Summary files are accepted too: their `config`
    /// member is used.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::usage(format!("--config {}: {e}", path.display())))?;
        let mut value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::usage(format!("--config {}: {e}", path.display())))?;
        if let Some(inner) = value.get_mut("config") {
            value = inner.take();
        }
        let command: Command =
            serde_json::from_value(value).map_err(|e| CliError::usage(format!("--config {}: {e}", path.display())))?;
        Ok(RunConfig::new(command))
    }
}
