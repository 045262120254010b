//! `simulate`: trajectory CSV plus a conservation report.

use serde::Serialize;

use lrl_core::brackets::{Observable, VectorObservable};
use lrl_core::dynamics::export::write_csv;
use lrl_core::dynamics::{conservation_report, Drift, IntegratorStats, Termination, Tracked};
use lrl_core::lrl::lrl_observable;
use lrl_core::{
    integrate_until, CentralModel, DynamicsError, IntegratorConfig, ModelSpec, StopCondition,
    Trajectory,
};

use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::output::{sibling, write_atomic, write_json};
use crate::CliError;

pub const DEFAULT_TOL: f64 = 1e-10;

#[derive(Debug, Serialize)]
pub struct SimulateReport {
    pub schema: u32,
    pub command: &'static str,
    pub model: ModelSpec,
    pub initial_state: [f64; 6],
    pub stop: StopCondition,
    pub tol: f64,
    /// `"Completed"` or `"StepFailure(<kind>)"`.
    pub termination: String,
    pub samples: usize,
    pub t_final: f64,
    pub stats: IntegratorStats,
    pub drift: Vec<Drift>,
}

fn tracked(model: &CentralModel) -> Vec<Tracked> {
    let mut out = vec![
        Tracked::Scalar(Observable::energy(model)),
        Tracked::Vector(VectorObservable::angular_momentum(model)),
    ];
    // the orbit-angle observable is single valued only where orbits close
    if matches!(
        model,
        CentralModel::KeplerCoulomb { .. } | CentralModel::Micz { .. }
    ) {
        out.push(Tracked::Vector(lrl_observable(model)));
    }
    out
}

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let (spec, model) = cfg.model()?;
    let s0 = cfg.single_state()?;
    let tol = cfg.tol(DEFAULT_TOL)?;
    let stop = match (cfg.tmax, cfg.thetamax) {
        (Some(t), None) if t.is_finite() && t != 0.0 => StopCondition::Duration(t),
        (None, Some(a)) if a.is_finite() && a > 0.0 => StopCondition::Angle(a),
        (Some(_), Some(_)) => {
            return Err(CliError::invalid(
                "give either --tmax or --thetamax, not both",
            ))
        }
        (None, None) => return Err(CliError::invalid("one of --tmax or --thetamax is required")),
        _ => {
            return Err(CliError::invalid(
                "--tmax must be finite and non-zero, --thetamax positive",
            ))
        }
    };
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| CliError::invalid("--out is required"))?;
    let report_path = cfg
        .report
        .clone()
        .unwrap_or_else(|| sibling(&out, "report.json"));

    let (traj, failure) = match integrate_until(&model, &s0, stop, &IntegratorConfig::with_tol(tol))
    {
        Ok(t) => (t, None),
        Err(DynamicsError::StepFailure { kind, t, partial }) => (
            *partial,
            Some(CliError::Numerical(format!(
                "integration stopped at t = {t}: {kind:?}"
            ))),
        ),
        Err(e) => return Err(e.into()),
    };
    write_atomic(&out, |w| write_csv(&traj, w))?;
    write_json(
        &report_path,
        &report(
            &spec,
            &model,
            s0.r.iter().chain(s0.p.iter()),
            stop,
            tol,
            &traj,
        ),
    )?;
    match failure {
        Some(e) => Err(e),
        None => Ok(()),
    }
}

fn report<'a>(
    spec: &ModelSpec,
    model: &CentralModel,
    initial: impl Iterator<Item = &'a f64>,
    stop: StopCondition,
    tol: f64,
    traj: &Trajectory,
) -> SimulateReport {
    let mut initial_state = [0.0; 6];
    for (slot, v) in initial_state.iter_mut().zip(initial) {
        *slot = *v;
    }
    let termination = match traj.termination {
        Termination::Completed => "Completed".to_string(),
        Termination::StepFailure(kind) => format!("StepFailure({kind:?})"),
    };
    SimulateReport {
        schema: SCHEMA_VERSION,
        command: "simulate",
        model: spec.clone(),
        initial_state,
        stop,
        tol,
        termination,
        samples: traj.samples.len(),
        t_final: traj.last().t,
        stats: traj.stats,
        drift: conservation_report(traj, &tracked(model)),
    }
}
