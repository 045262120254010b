//! Command-line flags.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::{parse_state, Regime, Route, RunConfig};

#[derive(Debug, Parser)]
#[command(
    name = "lrl",
    version,
    about = "Generalized LRL vectors: simulation, construction and checks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate an orbit; writes a trajectory CSV and a conservation report.
    Simulate(SimulateArgs),
    /// Construct the LRL vector of one or more states.
    Lrl(LrlArgs),
    /// Poisson-algebra, Casimir and transformation checks.
    Verify(VerifyArgs),
    /// Compare analytic orbits with integration.
    Closedform(ClosedformArgs),
}

/// Flags shared by every command.
#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Run configuration (JSON, "schema": 1); flags override its fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Model description (JSON).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Integrator accuracy.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Primary output file; stdout when absent where a command allows it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// JSON file with a list of initial states.
    #[arg(long)]
    pub sweep: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long)]
    pub workers: Option<usize>,
}

fn states(raw: &[[f64; 6]]) -> Vec<[f64; 6]> {
    raw.to_vec()
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Initial state x,y,z,px,py,pz.
    #[arg(long, value_parser = parse_state, allow_hyphen_values = true)]
    pub state: Option<[f64; 6]>,
    /// Integration time; negative runs backward.
    #[arg(long, allow_hyphen_values = true)]
    pub tmax: Option<f64>,
    /// Stop once the azimuth has advanced this far instead.
    #[arg(long)]
    pub thetamax: Option<f64>,
    /// Conservation report path; defaults to the CSV path with `.report.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

impl SimulateArgs {
    pub fn to_config(&self) -> RunConfig {
        RunConfig {
            states: states(self.state.as_slice()),
            tmax: self.tmax,
            thetamax: self.thetamax,
            report: self.report.clone(),
            ..RunConfig::new()
        }
    }
}

#[derive(Debug, Args)]
pub struct LrlArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// State x,y,z,px,py,pz.
    #[arg(long, value_parser = parse_state, allow_hyphen_values = true)]
    pub state: Option<[f64; 6]>,
    /// Perihelion search, W-route accumulation, or both with their agreement.
    #[arg(long, value_enum)]
    pub route: Option<Route>,
    /// Radial periods covered by the W route.
    #[arg(long)]
    pub periods: Option<usize>,
    /// W-route time series CSV.
    #[arg(long)]
    pub series: Option<PathBuf>,
}

impl LrlArgs {
    pub fn to_config(&self) -> RunConfig {
        RunConfig {
            states: states(self.state.as_slice()),
            route: self.route,
            periods: self.periods,
            series: self.series.clone(),
            ..RunConfig::new()
        }
    }
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Test state; repeatable. A built-in set is used when absent.
    #[arg(long, value_parser = parse_state, allow_hyphen_values = true)]
    pub state: Vec<[f64; 6]>,
    /// Also run checks that are expected to fail.
    #[arg(long)]
    pub negative_controls: bool,
}

impl VerifyArgs {
    pub fn to_config(&self) -> RunConfig {
        RunConfig {
            states: self.state.clone(),
            negative_controls: self.negative_controls.then_some(true),
            ..RunConfig::new()
        }
    }
}

#[derive(Debug, Args)]
pub struct ClosedformArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Energy (rest mass included for the relativistic Coulomb model).
    #[arg(long, allow_hyphen_values = true)]
    pub energy: Option<f64>,
    /// Angular momentum magnitude.
    #[arg(long)]
    pub ell: Option<f64>,
    /// Expected Coulomb regime; a mismatch is an input error.
    #[arg(long, value_enum)]
    pub regime: Option<Regime>,
    /// Azimuth range of the sampled orbit.
    #[arg(long)]
    pub thetamax: Option<f64>,
    /// Number of orbit samples.
    #[arg(long)]
    pub points: Option<usize>,
    /// Speeds of light for a post-Newtonian scaling scan, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub c_values: Option<Vec<f64>>,
    /// Summary JSON path; defaults to the CSV path with `.summary.json`.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

impl ClosedformArgs {
    pub fn to_config(&self) -> RunConfig {
        RunConfig {
            energy: self.energy,
            ell: self.ell,
            regime: self.regime,
            thetamax: self.thetamax,
            points: self.points,
            c_values: self.c_values.clone(),
            report: self.report.clone(),
            ..RunConfig::new()
        }
    }
}
