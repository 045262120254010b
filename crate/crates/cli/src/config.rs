//! Run configuration: flags and `--config` files resolve to one [`RunConfig`].

use std::fs;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use lrl_core::{CentralModel, CoulombRegime, ModelSpec, PhaseState};

use crate::args::CommonArgs;
use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    Perihelion,
    W,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Barrier,
    Critical,
    Propeller,
}

impl From<Regime> for CoulombRegime {
    fn from(r: Regime) -> Self {
        match r {
            Regime::Barrier => CoulombRegime::Barrier,
            Regime::Critical => CoulombRegime::Critical,
            Regime::Propeller => CoulombRegime::Propeller,
        }
    }
}

/// Everything a command needs. Absent fields fall back to per-command
/// defaults; unknown keys and other schema versions are rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    /// Initial states `[x, y, z, px, py, pz]`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub states: Vec<[f64; 6]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tmax: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub thetamax: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Secondary JSON output (simulate report, closedform summary).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    /// W-route time series CSV.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<Route>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periods: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative_controls: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ell: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regime: Option<Regime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

/// `--sweep` file: a list of initial states processed in parallel.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    schema: u32,
    states: Vec<[f64; 6]>,
}

impl RunConfig {
    pub fn new() -> Self {
        Self {
            schema: SCHEMA_VERSION,
            ..Self::default()
        }
    }

    /// Fields set in `other` replace ours.
    fn overlay(&mut self, other: RunConfig) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            model,
            tmax,
            thetamax,
            tol,
            out,
            report,
            series,
            route,
            periods,
            workers,
            negative_controls,
            energy,
            ell,
            regime,
            c_values,
            points
        );
        if !other.states.is_empty() {
            self.states = other.states;
        }
    }

    pub fn model(&self) -> Result<(ModelSpec, CentralModel), CliError> {
        let spec = self
            .model
            .clone()
            .ok_or_else(|| CliError::invalid("no model given (use --model FILE)"))?;
        let model = CentralModel::try_from(&spec)?;
        Ok((spec, model))
    }

    pub fn phase_states(&self) -> Result<Vec<PhaseState>, CliError> {
        self.states
            .iter()
            .map(|v| Ok(PhaseState::from_slice(*v)?))
            .collect()
    }

    pub fn single_state(&self) -> Result<PhaseState, CliError> {
        match self.phase_states()?.as_slice() {
            [s] => Ok(*s),
            [] => Err(CliError::invalid(
                "no initial state given (use --state x,y,z,px,py,pz)",
            )),
            _ => Err(CliError::invalid(
                "this command takes exactly one initial state",
            )),
        }
    }

    pub fn tol(&self, default: f64) -> Result<f64, CliError> {
        let tol = self.tol.unwrap_or(default);
        if tol.is_finite() && tol > 0.0 && tol < 1.0 {
            Ok(tol)
        } else {
            Err(CliError::invalid(format!(
                "tolerance must lie in (0, 1), got {tol}"
            )))
        }
    }

    pub fn workers(&self) -> Result<usize, CliError> {
        match self.workers {
            Some(0) => Err(CliError::invalid("--workers must be at least 1")),
            Some(n) => Ok(n),
            None => Ok(1),
        }
    }

    /// Runs `f` over `items` on `workers` threads; results keep input order.
    pub fn fan_out<T, R, F>(&self, items: &[T], f: F) -> Result<Vec<R>, CliError>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        use rayon::prelude::*;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers()?)
            .build()
            .map_err(|e| CliError::Numerical(e.to_string()))?;
        Ok(pool.install(|| items.par_iter().map(&f).collect()))
    }
}

fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

fn check_schema(value: &Value, path: &Path, required: bool) -> Result<(), CliError> {
    match value.get("schema") {
        Some(v) if v.as_u64() == Some(u64::from(SCHEMA_VERSION)) => Ok(()),
        Some(v) => Err(CliError::invalid(format!(
            "{}: unsupported schema {v}",
            path.display()
        ))),
        None if required => Err(CliError::invalid(format!(
            "{}: missing \"schema\": {SCHEMA_VERSION}",
            path.display()
        ))),
        None => Ok(()),
    }
}

/// A model file holds one model object, optionally with `"schema": 1`.
pub fn load_model(path: &Path) -> Result<ModelSpec, CliError> {
    let mut value = read_json(path)?;
    check_schema(&value, path, false)?;
    if let Some(obj) = value.as_object_mut() {
        obj.remove("schema");
    }
    let spec: ModelSpec = serde_json::from_value(value)
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    CentralModel::try_from(&spec)?;
    Ok(spec)
}

pub fn load_config(path: &Path) -> Result<RunConfig, CliError> {
    let value = read_json(path)?;
    check_schema(&value, path, true)?;
    serde_json::from_value(value).map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))
}

fn load_sweep(path: &Path) -> Result<Vec<[f64; 6]>, CliError> {
    let value = read_json(path)?;
    check_schema(&value, path, true)?;
    let sweep: SweepFile = serde_json::from_value(value)
        .map_err(|e| CliError::invalid(format!("{}: {e}", path.display())))?;
    debug_assert_eq!(sweep.schema, SCHEMA_VERSION);
    if sweep.states.is_empty() {
        return Err(CliError::invalid(format!("{}: no states", path.display())));
    }
    Ok(sweep.states)
}

/// `"x,y,z,px,py,pz"`.
pub fn parse_state(text: &str) -> Result<[f64; 6], String> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 6 {
        return Err(format!(
            "expected 6 comma-separated numbers, got {}",
            parts.len()
        ));
    }
    let mut out = [0.0; 6];
    for (slot, p) in out.iter_mut().zip(&parts) {
        *slot = p.parse::<f64>().map_err(|e| format!("`{p}`: {e}"))?;
        if !slot.is_finite() {
            return Err(format!("`{p}` is not finite"));
        }
    }
    Ok(out)
}

/// Config file first, then the model file, then the command-line flags.
pub fn resolve(common: &CommonArgs, flags: RunConfig) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => load_config(path)?,
        None => RunConfig::new(),
    };
    let mut flags = flags;
    if let Some(path) = &common.model {
        flags.model = Some(load_model(path)?);
    }
    flags.tol = common.tol;
    flags.out = common.out.clone();
    flags.workers = common.workers;
    cfg.overlay(flags);
    if let Some(path) = &common.sweep {
        cfg.states.extend(load_sweep(path)?);
    }
    cfg.phase_states()?;
    Ok(cfg)
}
