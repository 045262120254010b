use serde::{Deserialize, Serialize};

use super::{assemble, closest_approach, LrlError, LrlNote, LrlResult};
use crate::dynamics::{
    find_turning_points, integrate, integrate_until, IntegratorConfig, StopCondition, Trajectory,
    TurningEvent, TurningKind,
};
use crate::models::{CentralModel, PhaseState, Vec3};
use crate::numerics::{brent_root, fit_slope};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerihelionOptions {
    /// Integrator tolerance.
    pub tol: f64,
    /// Give up after this much time without a perihelion.
    pub max_time: f64,
    /// Perihelia to record; only the first sets the direction.
    pub perihelia: usize,
}

impl Default for PerihelionOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_time: 1e5,
            perihelia: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerihelionRecord {
    pub t: f64,
    pub r: f64,
    pub theta: f64,
    pub state: PhaseState,
}

#[derive(Debug, Clone)]
pub struct PerihelionLrl {
    pub result: LrlResult,
    pub perihelia: Vec<PerihelionRecord>,
    pub trajectory: Trajectory,
}

fn unsupported_micz(model: &CentralModel) -> Result<(), LrlError> {
    match model {
        // K⃗ has a component along ℓ⃗ and does not point at the perihelion
        CentralModel::Micz { .. } => Err(LrlError::ModelUnsupported("micz")),
        _ => Ok(()),
    }
}

/// `K⃗(s₀) = K(E, ℓ²) u⃗ₒ` with `u⃗ₒ` the direction of the next perihelion (the
/// previous one for a receding unbound state).
pub fn lrl_vector_via_perihelion(
    model: &CentralModel,
    s0: &PhaseState,
    opts: &PerihelionOptions,
) -> Result<PerihelionLrl, LrlError> {
    unsupported_micz(model)?;
    let energy = model.energy(s0)?;
    let ell = model.angular_momentum(s0).norm();
    let ca = closest_approach(model, energy, ell, Some(s0.radius()))?;
    let cfg = IntegratorConfig::with_tol(opts.tol);

    if ca.double_root {
        let trajectory = integrate(model, s0, 0.0, &cfg)?;
        let result = assemble(
            model,
            s0,
            s0.r / s0.radius(),
            vec![LrlNote::CircularDegenerate],
        )?;
        return Ok(PerihelionLrl {
            result,
            perihelia: vec![],
            trajectory,
        });
    }

    let mut notes = Vec::new();
    let pr = s0.radial_momentum();
    let at_perihelion =
        (s0.radius() - ca.r_m).abs() <= 1e-10 * ca.r_m && pr.abs() <= 1e-9 * s0.p.norm();
    let backward = ca.r_outer.is_none() && pr > 0.0 && !at_perihelion;
    if backward {
        notes.push(LrlNote::BackwardPerihelion);
    }
    let count = opts.perihelia.max(1);
    let max_time = if backward {
        -opts.max_time
    } else {
        opts.max_time
    };
    let trajectory = if at_perihelion && count == 1 {
        integrate(model, s0, 0.0, &cfg)?
    } else {
        integrate_until(
            model,
            s0,
            StopCondition::Perihelia { count, max_time },
            &cfg,
        )?
    };

    let mut perihelia: Vec<PerihelionRecord> = Vec::new();
    if at_perihelion {
        perihelia.push(PerihelionRecord {
            t: s0.t,
            r: s0.radius(),
            theta: trajectory.first().polar.theta,
            state: *s0,
        });
    }
    for ev in find_turning_points(&trajectory) {
        if ev.kind != TurningKind::Perihelion {
            continue;
        }
        // the starting perihelion may be re-detected one step later
        if at_perihelion && (ev.t - s0.t).abs() < 1e-6 * (1.0 + s0.t.abs()) {
            continue;
        }
        perihelia.push(PerihelionRecord {
            t: ev.t,
            r: ev.r,
            theta: ev.theta,
            state: ev.state,
        });
    }
    let first = perihelia.first().ok_or(LrlError::NoPerihelionReached)?;
    if perihelia.len() > 1 {
        notes.push(LrlNote::MultiPerihelion);
    }
    let u_o = first.state.r / first.r;
    let result = assemble(model, s0, u_o, notes)?;
    Ok(PerihelionLrl {
        result,
        perihelia,
        trajectory,
    })
}

/// `p⃗ × ℓ⃗ − μ r U'(r) r̂`, the classical part of `K⃗`.
pub(crate) fn classical_part(model: &CentralModel, s: &PhaseState) -> Result<Vec3, LrlError> {
    let r = s.radius();
    let du = model.potential(r)?.du;
    Ok(s.p.cross(&s.r.cross(&s.p)) - s.r * (model.mass() * r * du))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WSample {
    pub t: f64,
    /// Azimuth relative to the reference perihelion.
    pub theta: f64,
    pub w: Vec3,
    pub k_vec: Vec3,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WRouteSeries {
    /// `K⃗` at the reference perihelion, where `W⃗ = 0`.
    pub k_ref: Vec3,
    pub samples: Vec<WSample>,
    /// `max |K⃗(t) − K⃗_ref|`.
    pub max_defect: f64,
    /// `max_defect / |K⃗_ref|`.
    pub rel_defect: f64,
}

/// `K⃗(t) = p⃗ × ℓ⃗ − μ r U' r̂ + W⃗(t)` along a trajectory integrated with the
/// `W⃗` accumulator, with `W⃗` zeroed at `reference`.
pub fn lrl_vector_w_route(
    model: &CentralModel,
    traj: &Trajectory,
    reference: &TurningEvent,
) -> Result<WRouteSeries, LrlError> {
    unsupported_micz(model)?;
    if model.w_kernel(reference.r).is_none() {
        return Err(LrlError::ModelUnsupported(model.name()));
    }
    if !traj.config.accumulate_w {
        return Err(LrlError::WNotAccumulated);
    }
    let k_ref = classical_part(model, &reference.state)?;
    let mut samples = Vec::with_capacity(traj.samples.len());
    let mut max_defect: f64 = 0.0;
    for s in &traj.samples {
        let w = s.w - reference.w;
        let k_vec = classical_part(model, &s.phase)? + w;
        if !(k_vec.iter().all(|c| c.is_finite())) {
            return Err(LrlError::QuadratureBlowup);
        }
        max_defect = max_defect.max((k_vec - k_ref).norm());
        samples.push(WSample {
            t: s.t,
            theta: s.polar.theta - reference.theta,
            w,
            k_vec,
        });
    }
    let rel_defect = max_defect / k_ref.norm().max(f64::MIN_POSITIVE);
    Ok(WRouteSeries {
        k_ref,
        samples,
        max_defect,
        rel_defect,
    })
}

/// Moves `s0` to its next perihelion, then integrates `radial_periods` full
/// radial periods with the `W⃗` accumulator and evaluates the W route.
pub fn w_route_from_state(
    model: &CentralModel,
    s0: &PhaseState,
    radial_periods: usize,
    tol: f64,
) -> Result<(WRouteSeries, Trajectory), LrlError> {
    let opts = PerihelionOptions {
        tol,
        ..PerihelionOptions::default()
    };
    let lead = lrl_vector_via_perihelion(model, s0, &opts)?;
    let start = lead.perihelia.first().map_or(*s0, |p| p.state);
    let cfg = IntegratorConfig::with_tol(tol).accumulating_w();
    let stop = StopCondition::Perihelia {
        count: radial_periods + 1,
        max_time: opts.max_time,
    };
    let traj = integrate_until(model, &start, stop, &cfg)?;
    let first = traj.first();
    let reference = TurningEvent {
        t: first.t,
        r: first.polar.r,
        theta: first.polar.theta,
        kind: TurningKind::Perihelion,
        state: first.phase,
        w: first.w,
    };
    Ok((lrl_vector_w_route(model, &traj, &reference)?, traj))
}

/// Log-log slope of `|W⃗|` against the angle swept from the starting
/// perihelion, over `θ ∈ [θ_max/100, θ_max]`. `None` when `W⃗` vanishes.
pub fn w_growth_exponent(traj: &Trajectory, theta_max: f64) -> Result<Option<f64>, LrlError> {
    if !traj.config.accumulate_w {
        return Err(LrlError::WNotAccumulated);
    }
    let first = traj.first();
    let swept = |t: f64| {
        traj.state_at(t)
            .map_or(f64::NAN, |s| (s.polar.theta - first.polar.theta).abs())
    };
    let beyond = traj
        .samples
        .iter()
        .find(|s| (s.polar.theta - first.polar.theta).abs() >= theta_max)
        .ok_or(LrlError::NoPerihelionReached)?;
    let t_max = brent_root(|t| swept(t) - theta_max, first.t, beyond.t, 0.0)
        .map_err(|_| LrlError::QuadratureBlowup)?;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for k in 0..16 {
        let t = first.t + (t_max - first.t) * 10f64.powf(-2.0 * (1.0 - k as f64 / 15.0));
        let Some(s) = traj.state_at(t) else { continue };
        let w = (s.w - first.w).norm();
        if w == 0.0 {
            return Ok(None);
        }
        xs.push((s.polar.theta - first.polar.theta).abs().ln());
        ys.push(w.ln());
    }
    Ok(Some(fit_slope(&xs, &ys)))
}
