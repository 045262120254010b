//! Adaptive integration of Hamilton's equations, turning-point events and
//! conservation diagnostics.
//!
//! The integrated state is `(r⃗, p⃗, W⃗)`. The third block is the optional
//! accumulator `dW⃗/dt = p_r [rU]'' r⃗` used by the W-route LRL construction;
//! it is zero unless [`IntegratorConfig::accumulate_w`] is set and the model
//! has a Newtonian potential.
//!
//! The azimuth `θ` is tracked in the plane orthogonal to the initial conserved
//! angular momentum and unwrapped step by step. Steps are limited so that `θ`
//! advances by at most [`IntegratorConfig::max_dtheta`] per step.

mod dopri;
pub mod export;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::brackets::{Observable, VectorObservable};
use crate::models::{CentralModel, ModelError, PhaseState, PlaneBasis, PolarState, Vec3};
use crate::numerics::brent_root;
use dopri::{DIM, Y};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepFailureKind {
    /// Step size fell below the configured minimum.
    StepSizeUnderflow,
    /// The state or its derivative became non-finite.
    NonFinite,
    MaxSteps,
}

#[derive(Debug, Clone, Error)]
pub enum DynamicsError {
    #[error("integration failed at t = {t}: {kind:?}")]
    StepFailure {
        kind: StepFailureKind,
        t: f64,
        partial: Box<Trajectory>,
    },
    #[error("need at least {needed} perihelia, found {found}")]
    InsufficientTurningPoints { needed: usize, found: usize },
    #[error("model `{0}` is not supported here")]
    ModelUnsupported(&'static str),
    #[error("invalid integrator setting: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    /// First trial step; chosen automatically when `None`.
    pub h_init: Option<f64>,
    /// Smallest step magnitude before [`StepFailureKind::StepSizeUnderflow`].
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
    /// Upper bound on the azimuth advanced in one step, radians.
    pub max_dtheta: f64,
    pub accumulate_w: bool,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self::with_tol(1e-10)
    }
}

impl IntegratorConfig {
    /// Settings for a requested accuracy `tol`. The per-step error target is a
    /// tenth of it, which keeps the drift of conserved quantities over a few
    /// tens of orbits within `100·tol`.
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: 0.1 * tol,
            atol: 0.1 * tol,
            h_init: None,
            h_min: 1e-13,
            h_max: f64::INFINITY,
            max_steps: 5_000_000,
            max_dtheta: 0.5,
            accumulate_w: false,
        }
    }

    pub fn accumulating_w(mut self) -> Self {
        self.accumulate_w = true;
        self
    }

    fn validate(&self) -> Result<(), DynamicsError> {
        let ok = self.rtol > 0.0
            && self.atol > 0.0
            && self.rtol.is_finite()
            && self.atol.is_finite()
            && self.h_min >= 0.0
            && self.h_max > 0.0
            && self.max_dtheta > 0.0
            && self.max_dtheta < 3.0;
        if ok {
            Ok(())
        } else {
            Err(DynamicsError::InvalidConfig(format!("{self:?}")))
        }
    }
}

/// When to stop integrating.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StopCondition {
    /// Integrate for this much time; negative runs backward.
    Duration(f64),
    /// Forward until `|θ − θ₀|` reaches the value.
    Angle(f64),
    /// Until this many perihelia were crossed, or `|max_time|` elapsed;
    /// a negative `max_time` searches backward.
    Perihelia { count: usize, max_time: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub phase: PhaseState,
    pub polar: PolarState,
    /// Accumulated `W⃗` since the start of the run.
    pub w: Vec3,
}

impl Sample {
    fn y(&self) -> Y {
        pack(&self.phase.r, &self.phase.p, &self.w)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntegratorStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Termination {
    Completed,
    StepFailure(StepFailureKind),
}

/// Accepted integrator steps in integration order (`t` strictly monotone).
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub model: CentralModel,
    /// Plane of the azimuth; `None` for head-on motion.
    pub basis: Option<PlaneBasis>,
    pub samples: Vec<Sample>,
    pub stats: IntegratorStats,
    pub config: IntegratorConfig,
    pub termination: Termination,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TurningKind {
    Perihelion,
    Aphelion,
    /// `|dp_r/dt|` too small to classify.
    NearCircular,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TurningEvent {
    pub t: f64,
    pub r: f64,
    /// Unwrapped azimuth at the event.
    pub theta: f64,
    pub kind: TurningKind,
    pub state: PhaseState,
    pub w: Vec3,
}

fn pack(r: &Vec3, p: &Vec3, w: &Vec3) -> Y {
    let mut y = [0.0; DIM];
    y[..3].copy_from_slice(r.as_slice());
    y[3..6].copy_from_slice(p.as_slice());
    y[6..].copy_from_slice(w.as_slice());
    y
}

fn unpack(y: &Y) -> (Vec3, Vec3, Vec3) {
    (
        Vec3::new(y[0], y[1], y[2]),
        Vec3::new(y[3], y[4], y[5]),
        Vec3::new(y[6], y[7], y[8]),
    )
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    a - two_pi * (a / two_pi).round()
}

/// Right-hand side including the W accumulator.
struct Rhs<'a> {
    model: &'a CentralModel,
    with_w: bool,
    evaluations: usize,
}

impl Rhs<'_> {
    fn eval(&mut self, y: &Y) -> Result<Y, ModelError> {
        self.evaluations += 1;
        let (r, p, _) = unpack(y);
        if !y.iter().all(|v| v.is_finite()) {
            return Err(ModelError::NonFiniteState);
        }
        let s = PhaseState { r, p, t: 0.0 };
        let (rdot, pdot) = self.model.phase_velocity(&s)?;
        let mut d = pack(&rdot, &pdot, &Vec3::zeros());
        if self.with_w {
            let rn = r.norm();
            if let Some(kernel) = self.model.w_kernel(rn) {
                let wdot = r * (s.radial_momentum() * kernel);
                d[6..].copy_from_slice(wdot.as_slice());
            }
        }
        if d.iter().all(|v| v.is_finite()) {
            Ok(d)
        } else {
            Err(ModelError::NonFiniteState)
        }
    }
}

fn sample(model: &CentralModel, t: f64, y: &Y, theta: f64) -> Sample {
    let (r, p, w) = unpack(y);
    let phase = PhaseState { r, p, t };
    let polar = PolarState {
        r: r.norm(),
        theta,
        p_r: phase.radial_momentum(),
        p_theta: model.angular_momentum(&phase).norm(),
    };
    Sample { t, phase, polar, w }
}

fn azimuth(basis: Option<&PlaneBasis>, r: &Vec3) -> f64 {
    basis.map_or(0.0, |b| b.azimuth(r))
}

fn initial_step(rhs: &mut Rhs<'_>, y: &Y, dy: &Y, cfg: &IntegratorConfig) -> f64 {
    let active = if rhs.with_w { DIM } else { 6 };
    let norm = |v: &Y| {
        let s: f64 = (0..active)
            .map(|i| (v[i] / (cfg.atol + cfg.rtol * y[i].abs())).powi(2))
            .sum();
        (s / active as f64).sqrt()
    };
    let d0 = norm(y);
    let d1 = norm(dy);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let mut y1 = *y;
    for i in 0..DIM {
        y1[i] += h0 * dy[i];
    }
    let d2 = match rhs.eval(&y1) {
        Ok(dy1) => {
            let mut diff = [0.0; DIM];
            for i in 0..DIM {
                diff[i] = dy1[i] - dy[i];
            }
            norm(&diff) / h0
        }
        Err(_) => return h0,
    };
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1)
}

/// Angular speed `|r × ṙ|/r²` from a derivative block.
fn angular_speed(y: &Y, dy: &Y) -> f64 {
    let (r, _, _) = unpack(y);
    let (rdot, _, _) = unpack(dy);
    r.cross(&rdot).norm() / r.norm_squared()
}

/// p_r sign change between consecutive samples, ignoring numerical noise
/// around exactly circular motion.
fn crosses(pr0: f64, pr1: f64, p_scale: f64) -> bool {
    let significant = pr0.abs().max(pr1.abs()) > 1e-9 * p_scale;
    significant && ((pr0 <= 0.0 && pr1 > 0.0) || (pr0 >= 0.0 && pr1 < 0.0))
}

/// Integrates for `t_span` (negative runs backward).
pub fn integrate(
    model: &CentralModel,
    s0: &PhaseState,
    t_span: f64,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, DynamicsError> {
    integrate_until(model, s0, StopCondition::Duration(t_span), cfg)
}

pub fn integrate_until(
    model: &CentralModel,
    s0: &PhaseState,
    stop: StopCondition,
    cfg: &IntegratorConfig,
) -> Result<Trajectory, DynamicsError> {
    cfg.validate()?;
    let basis = model.plane_basis(s0, None).ok();
    let with_w = cfg.accumulate_w && model.w_kernel(s0.radius()).is_some();
    let mut rhs = Rhs {
        model,
        with_w,
        evaluations: 0,
    };
    let active = if with_w { DIM } else { 6 };

    let t0 = s0.t;
    let (dir, t_end) = match stop {
        StopCondition::Duration(d) => (if d < 0.0 { -1.0 } else { 1.0 }, t0 + d),
        StopCondition::Angle(_) => (1.0, f64::INFINITY),
        StopCondition::Perihelia { max_time, .. } => {
            (if max_time < 0.0 { -1.0 } else { 1.0 }, t0 + max_time)
        }
    };
    let mut y = pack(&s0.r, &s0.p, &Vec3::zeros());
    let theta0 = azimuth(basis.as_ref(), &s0.r);
    let mut traj = Trajectory {
        model: model.clone(),
        basis,
        samples: vec![sample(model, t0, &y, theta0)],
        stats: IntegratorStats::default(),
        config: *cfg,
        termination: Termination::Completed,
    };
    if t_end == t0 {
        return Ok(traj);
    }

    let fail = |mut traj: Trajectory, kind: StepFailureKind, t: f64, evals: usize| {
        traj.stats.evaluations = evals;
        traj.termination = Termination::StepFailure(kind);
        Err(DynamicsError::StepFailure {
            kind,
            t,
            partial: Box::new(traj),
        })
    };

    let mut dy = match rhs.eval(&y) {
        Ok(d) => d,
        Err(_) => return fail(traj, StepFailureKind::NonFinite, t0, rhs.evaluations),
    };
    let mut h = cfg
        .h_init
        .unwrap_or_else(|| initial_step(&mut rhs, &y, &dy, cfg))
        .abs()
        .min(cfg.h_max);
    let mut t = t0;
    let mut theta = theta0;
    let mut last_rejected = false;
    let mut perihelia = 0;
    let p_scale = s0.p.norm();

    loop {
        if traj.stats.accepted + traj.stats.rejected >= cfg.max_steps {
            return fail(traj, StepFailureKind::MaxSteps, t, rhs.evaluations);
        }
        let omega = angular_speed(&y, &dy);
        if omega > 0.0 {
            h = h.min(cfg.max_dtheta / omega);
        }
        let mut last = false;
        if (t + dir * h - t_end) * dir >= 0.0 {
            h = (t_end - t).abs();
            last = true;
        }
        let h_floor = cfg.h_min.max(16.0 * f64::EPSILON * t.abs());
        if h < h_floor && !last {
            return fail(traj, StepFailureKind::StepSizeUnderflow, t, rhs.evaluations);
        }
        let hs = dir * h;
        let step = dopri::step(&mut |_, y: &Y| rhs.eval(y), t, &y, &dy, hs);
        let step = match step {
            Ok(s) => s,
            Err(_) => {
                traj.stats.rejected += 1;
                h *= 0.25;
                last_rejected = true;
                continue;
            }
        };
        let err = dopri::error_norm(&step.err, &y, &step.y, cfg.rtol, cfg.atol, active);
        let (r_new, _, _) = unpack(&step.y);
        let dtheta = match basis.as_ref() {
            Some(b) => wrap_angle(b.azimuth(&r_new) - b.azimuth(&unpack(&y).0)),
            None => 0.0,
        };
        if !err.is_finite() || err > 1.0 || dtheta.abs() > cfg.max_dtheta * 1.5 {
            traj.stats.rejected += 1;
            let fac = if err.is_finite() {
                (0.9 * err.powf(-0.2)).clamp(0.2, 1.0)
            } else {
                0.25
            };
            h *= fac.min(0.9);
            last_rejected = true;
            continue;
        }

        let pr_old = traj.samples.last().map_or(0.0, |s| s.polar.p_r);
        t = if last { t_end } else { t + hs };
        y = step.y;
        dy = step.dy;
        theta += dtheta;
        let smp = sample(model, t, &y, theta);
        let pr_new = smp.polar.p_r;
        traj.samples.push(smp);
        traj.stats.accepted += 1;

        let mut fac = if err == 0.0 {
            5.0
        } else {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        };
        if last_rejected {
            fac = fac.min(1.0);
        }
        last_rejected = false;
        h = (h * fac).min(cfg.h_max);

        let done = match stop {
            StopCondition::Duration(_) => last,
            StopCondition::Angle(a) => (theta - theta0).abs() >= a,
            StopCondition::Perihelia { count, .. } => {
                if crosses(pr_old, pr_new, p_scale) && (pr_new - pr_old) * dir > 0.0 {
                    perihelia += 1;
                }
                perihelia >= count || last
            }
        };
        if done {
            break;
        }
    }
    traj.stats.evaluations = rhs.evaluations;
    Ok(traj)
}

impl Trajectory {
    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples
            .last()
            .expect("trajectory has at least the initial sample")
    }

    /// State at `t` inside the covered span, from a single sub-step off the
    /// preceding sample.
    pub fn state_at(&self, t: f64) -> Option<Sample> {
        let first = self.first().t;
        let last = self.last().t;
        let dir = if last >= first { 1.0 } else { -1.0 };
        if (t - first) * dir < 0.0 || (t - last) * dir > 0.0 {
            return None;
        }
        let k = self
            .samples
            .partition_point(|s| (s.t - t) * dir <= 0.0)
            .saturating_sub(1);
        self.substep(k, t - self.samples[k].t).ok()
    }

    fn rhs(&self) -> Rhs<'_> {
        let with_w =
            self.config.accumulate_w && self.model.w_kernel(self.first().polar.r).is_some();
        Rhs {
            model: &self.model,
            with_w,
            evaluations: 0,
        }
    }

    fn substep(&self, k: usize, tau: f64) -> Result<Sample, ModelError> {
        let base = &self.samples[k];
        let y = base.y();
        if tau == 0.0 {
            return Ok(*base);
        }
        let mut rhs = self.rhs();
        let dy = rhs.eval(&y)?;
        let out = dopri::step(&mut |_, y: &Y| rhs.eval(y), base.t, &y, &dy, tau)?;
        let (r_new, _, _) = unpack(&out.y);
        let dtheta = match self.basis.as_ref() {
            Some(b) => wrap_angle(b.azimuth(&r_new) - b.azimuth(&base.phase.r)),
            None => 0.0,
        };
        Ok(sample(
            &self.model,
            base.t + tau,
            &out.y,
            base.polar.theta + dtheta,
        ))
    }

    /// `dp_r/dt` at a sample.
    fn radial_force(&self, s: &Sample) -> Result<f64, ModelError> {
        let (rdot, pdot) = self.model.phase_velocity(&s.phase)?;
        let r = s.phase.r;
        let rn = r.norm();
        Ok((rdot.dot(&s.phase.p) + r.dot(&pdot)) / rn - s.polar.p_r * r.dot(&rdot) / (rn * rn))
    }
}

/// Refined `p_r = 0` crossings, in integration order.
pub fn find_turning_points(traj: &Trajectory) -> Vec<TurningEvent> {
    let mut events = Vec::new();
    let p_scale = traj.first().phase.p.norm();
    for k in 0..traj.samples.len().saturating_sub(1) {
        let (a, b) = (&traj.samples[k], &traj.samples[k + 1]);
        if !crosses(a.polar.p_r, b.polar.p_r, p_scale) {
            continue;
        }
        let h = b.t - a.t;
        let root = brent_root(
            |tau| traj.substep(k, tau).map_or(f64::NAN, |s| s.polar.p_r),
            0.0,
            h,
            1e-15 * h.abs(),
        );
        let Ok(tau) = root else { continue };
        let Ok(s) = traj.substep(k, tau) else {
            continue;
        };
        let kind = match traj.radial_force(&s) {
            Ok(f) if f.abs() < 1e-12 => TurningKind::NearCircular,
            Ok(f) if f > 0.0 => TurningKind::Perihelion,
            Ok(_) => TurningKind::Aphelion,
            Err(_) => continue,
        };
        events.push(TurningEvent {
            t: s.t,
            r: s.polar.r,
            theta: s.polar.theta,
            kind,
            state: s.phase,
            w: s.w,
        });
    }
    events
}

/// Mean azimuthal advance between successive perihelia.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ApsidalAngle {
    pub mean: f64,
    /// Sample standard deviation; 0 with a single interval.
    pub std: f64,
    pub intervals: usize,
}

pub fn apsidal_angle(traj: &Trajectory) -> Result<ApsidalAngle, DynamicsError> {
    let thetas: Vec<f64> = find_turning_points(traj)
        .into_iter()
        .filter(|e| e.kind == TurningKind::Perihelion)
        .map(|e| e.theta)
        .collect();
    if thetas.len() < 2 {
        return Err(DynamicsError::InsufficientTurningPoints {
            needed: 2,
            found: thetas.len(),
        });
    }
    let gaps: Vec<f64> = thetas.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    let n = gaps.len() as f64;
    let mean = gaps.iter().sum::<f64>() / n;
    let std = if gaps.len() > 1 {
        (gaps.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(ApsidalAngle {
        mean,
        std,
        intervals: gaps.len(),
    })
}

/// Observable whose drift is measured along a trajectory.
#[derive(Debug, Clone)]
pub enum Tracked {
    Scalar(Observable),
    Vector(VectorObservable),
}

impl Tracked {
    fn label(&self) -> &str {
        match self {
            Tracked::Scalar(o) => &o.label,
            Tracked::Vector(o) => &o.label,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub label: String,
    pub initial_norm: f64,
    pub max_abs: f64,
    pub rms_abs: f64,
    /// `max_abs / |F(0)|`; infinite when `F(0) = 0` and the drift is not.
    pub max_rel: f64,
    pub rms_rel: f64,
}

/// `|F(t) − F(t₀)|` statistics over all samples.
pub fn conservation_report(traj: &Trajectory, observables: &[Tracked]) -> Vec<Drift> {
    observables
        .iter()
        .map(|obs| {
            let values: Vec<Vec3> = traj
                .samples
                .iter()
                .map(|s| match obs {
                    Tracked::Scalar(o) => Vec3::new(o.eval(&s.phase), 0.0, 0.0),
                    Tracked::Vector(o) => o.eval(&s.phase),
                })
                .collect();
            let v0 = values[0];
            let diffs: Vec<f64> = values.iter().map(|v| (v - v0).norm()).collect();
            let max_abs = diffs.iter().cloned().fold(0.0, f64::max);
            let rms_abs = (diffs.iter().map(|d| d * d).sum::<f64>() / diffs.len() as f64).sqrt();
            let scale = v0.norm();
            let rel = |x: f64| if x == 0.0 { 0.0 } else { x / scale };
            Drift {
                label: obs.label().to_string(),
                initial_norm: scale,
                max_abs,
                rms_abs,
                max_rel: rel(max_abs),
                rms_rel: rel(rms_abs),
            }
        })
        .collect()
}

/// Fixed-step velocity Verlet for `H = p²/2μ + U(r)`.
pub fn leapfrog(
    model: &CentralModel,
    s0: &PhaseState,
    dt: f64,
    steps: usize,
) -> Result<Vec<PhaseState>, DynamicsError> {
    if !model.is_newtonian() {
        return Err(DynamicsError::ModelUnsupported(model.name()));
    }
    let mu = model.mass();
    let force = |r: &Vec3| -> Result<Vec3, ModelError> {
        let rn = r.norm();
        Ok(-r * (model.potential(rn)?.du / rn))
    };
    let mut out = Vec::with_capacity(steps + 1);
    let mut s = *s0;
    out.push(s);
    let mut f = force(&s.r)?;
    for _ in 0..steps {
        let p_half = s.p + f * (0.5 * dt);
        s.r += p_half * (dt / mu);
        f = force(&s.r)?;
        s.p = p_half + f * (0.5 * dt);
        s.t += dt;
        out.push(s);
    }
    Ok(out)
}
