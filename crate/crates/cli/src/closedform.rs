//! `closedform`: analytic orbit samples plus a comparison with integration.

use std::f64::consts::PI;

use serde::Serialize;

use lrl_core::closedform::{
    coulomb_regime, pn_coefficients, pn_lrl, pn_sample, pn_self_pb, relcoulomb_magnitude,
    relcoulomb_orbit, relcoulomb_sample, write_orbit_csv, OrbitPoint, RegimeReport,
};
use lrl_core::dynamics::apsidal_angle;
use lrl_core::lrl::{closest_approach, self_pb_coefficient};
use lrl_core::numerics::fit_slope;
use lrl_core::{
    integrate_until, CentralModel, CoulombRegime, IntegratorConfig, ModelSpec, PhaseState,
    PnCoefficients, PostNewtonian, StopCondition,
};

use crate::config::{RunConfig, SCHEMA_VERSION};
use crate::output::{sibling, write_atomic, write_json};
use crate::CliError;

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_POINTS: usize = 401;
pub const DEFAULT_PN_PERIHELIA: usize = 3;

#[derive(Debug, Serialize)]
pub struct Apsidal {
    pub closed_form: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub numerical: Option<f64>,
}

#[derive(Debug, Serialize)]
pub struct CoulombSummary {
    pub regime: RegimeReport,
    #[serde(rename = "K")]
    pub k_mag: f64,
    /// Radius at the reference apsis `θ = 0`.
    pub r_apsis: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub apsidal_angle: Option<Apsidal>,
    /// `max |r_closed(θ) − r_integrated(θ)|` over the integrated samples.
    pub max_abs_r_error: f64,
    pub samples_compared: usize,
}

#[derive(Debug, Serialize)]
pub struct ScanPoint {
    pub c: f64,
    pub defect: f64,
}

#[derive(Debug, Serialize)]
pub struct PnSummary {
    pub coefficients: PnCoefficients,
    /// `max |K⃗(θ) − K⃗(0)|` along the integrated orbit.
    pub constancy_defect: f64,
    pub perihelia: usize,
    pub self_pb_formula: f64,
    pub self_pb_numerical: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub scan: Vec<ScanPoint>,
    /// `p` in `defect ∝ c^-p`, fitted over the scan.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fitted_exponent: Option<f64>,
}

#[derive(Debug, Serialize)]
#[serde(untagged)]
pub enum Details {
    Coulomb(CoulombSummary),
    PostNewtonian(PnSummary),
}

#[derive(Debug, Serialize)]
pub struct ClosedformSummary {
    pub schema: u32,
    pub command: &'static str,
    pub model: ModelSpec,
    pub energy: f64,
    pub ell: f64,
    pub tol: f64,
    #[serde(flatten)]
    pub details: Details,
}

fn grid(thetamax: f64, points: usize) -> Vec<f64> {
    (0..points)
        .map(|i| thetamax * i as f64 / (points - 1) as f64)
        .collect()
}

fn planar(r: f64, ell: f64) -> Result<PhaseState, CliError> {
    Ok(PhaseState::from_slice([r, 0.0, 0.0, 0.0, ell / r, 0.0])?)
}

fn coulomb(
    m: f64,
    kappa: f64,
    energy: f64,
    ell: f64,
    cfg: &RunConfig,
    tol: f64,
) -> Result<(Vec<OrbitPoint>, CoulombSummary), CliError> {
    let regime = coulomb_regime(kappa, ell);
    if let Some(want) = cfg.regime {
        let want = CoulombRegime::from(want);
        if want != regime.regime {
            return Err(CliError::invalid(format!(
                "regime mismatch: requested {want:?} but |l| = {ell}, |kappa| = {} gives {:?}",
                kappa.abs(),
                regime.regime
            )));
        }
    }
    let model = CentralModel::rel_coulomb(m, kappa)?;
    let r0 = relcoulomb_orbit(m, kappa, energy, ell, 0.0)?;
    // past this the orbit is effectively at infinity
    let r_cap = 1e3 * r0;
    let in_range = |th: f64| {
        relcoulomb_orbit(m, kappa, energy, ell, th)
            .is_ok_and(|r| r.is_finite() && r > 0.0 && r < r_cap)
    };
    let thetas: Vec<f64> = grid(
        cfg.thetamax.unwrap_or(4.0 * PI),
        cfg.points.unwrap_or(DEFAULT_POINTS),
    )
    .into_iter()
    .take_while(|&th| in_range(th))
    .collect();
    if thetas.len() < 2 {
        return Err(CliError::Numerical(
            "closed-form orbit leaves the sampled range immediately".into(),
        ));
    }
    let points = relcoulomb_sample(m, kappa, energy, ell, &thetas)?;

    let s0 = planar(r0, ell)?;
    let th_end = *thetas.last().expect("non-empty");
    let traj = integrate_until(
        &model,
        &s0,
        StopCondition::Angle(th_end),
        &IntegratorConfig::with_tol(tol),
    )?;
    let mut worst = 0.0f64;
    let mut compared = 0;
    for s in &traj.samples {
        if let Ok(r) = relcoulomb_orbit(m, kappa, energy, ell, s.polar.theta) {
            worst = worst.max((r - s.polar.r).abs());
            compared += 1;
        }
    }
    let bound = energy.abs() < m && regime.regime == CoulombRegime::Barrier;
    let apsidal_angle = bound.then(|| Apsidal {
        closed_form: 2.0 * PI / (1.0 - kappa * kappa / (ell * ell)).sqrt(),
        numerical: apsidal_angle(&traj).ok().map(|a| a.mean),
    });
    let summary = CoulombSummary {
        regime,
        k_mag: relcoulomb_magnitude(m, kappa, energy, ell),
        r_apsis: r0,
        apsidal_angle,
        max_abs_r_error: worst,
        samples_compared: compared,
    };
    Ok((points, summary))
}

/// `max |K⃗(θ) − K⃗(0)|` of the first-order vector over `perihelia` radial
/// periods from the perihelion.
pub fn pn_defect(
    pn: &PostNewtonian,
    energy: f64,
    ell: f64,
    perihelia: usize,
    tol: f64,
) -> Result<f64, CliError> {
    let model = CentralModel::PostNewtonian(*pn);
    let rm = closest_approach(&model, energy, ell, None)?.r_m;
    let s0 = planar(rm, ell)?;
    let stop = StopCondition::Perihelia {
        count: perihelia,
        max_time: 1e6,
    };
    let traj = integrate_until(&model, &s0, stop, &IntegratorConfig::with_tol(tol))?;
    let k0 = pn_lrl(&s0, pn, 0.0)?;
    let th0 = traj.first().polar.theta;
    let mut worst = 0.0f64;
    for s in &traj.samples {
        worst = worst.max((pn_lrl(&s.phase, pn, s.polar.theta - th0)? - k0).norm());
    }
    Ok(worst)
}

fn with_c(spec: &ModelSpec, c: f64) -> Result<PostNewtonian, CliError> {
    let mut spec = spec.clone();
    if let ModelSpec::Pn { c: slot, .. } = &mut spec {
        *slot = c;
    }
    match CentralModel::try_from(&spec)? {
        CentralModel::PostNewtonian(pn) => Ok(pn),
        _ => unreachable!("spec is post-Newtonian"),
    }
}

fn post_newtonian(
    spec: &ModelSpec,
    pn: &PostNewtonian,
    energy: f64,
    ell: f64,
    cfg: &RunConfig,
    tol: f64,
) -> Result<(Vec<OrbitPoint>, PnSummary), CliError> {
    let coefficients = pn_coefficients(pn, energy, ell)?;
    let c_values = cfg.c_values.clone().unwrap_or_default();
    if c_values.len() == 1 || c_values.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
        return Err(CliError::invalid(
            "--c-values needs at least two positive speeds",
        ));
    }
    let thetas = grid(
        cfg.thetamax.unwrap_or(4.0 * PI),
        cfg.points.unwrap_or(DEFAULT_POINTS),
    );
    let points = pn_sample(pn, energy, ell, &thetas)?;
    let perihelia = DEFAULT_PN_PERIHELIA;
    let constancy_defect = pn_defect(pn, energy, ell, perihelia, tol)?;
    let self_pb_numerical = self_pb_coefficient(&CentralModel::PostNewtonian(*pn), energy, ell)?;

    let pns: Vec<PostNewtonian> = c_values
        .iter()
        .map(|&c| with_c(spec, c))
        .collect::<Result<_, _>>()?;
    let defects = cfg.fan_out(&pns, |p| pn_defect(p, energy, ell, perihelia, tol))?;
    let scan: Vec<ScanPoint> = c_values
        .iter()
        .zip(defects)
        .map(|(&c, d)| Ok(ScanPoint { c, defect: d? }))
        .collect::<Result<_, CliError>>()?;
    let fitted_exponent = (scan.len() >= 2).then(|| {
        let xs: Vec<f64> = scan.iter().map(|p| p.c.ln()).collect();
        let ys: Vec<f64> = scan.iter().map(|p| p.defect.ln()).collect();
        -fit_slope(&xs, &ys)
    });
    let summary = PnSummary {
        coefficients,
        constancy_defect,
        perihelia,
        self_pb_formula: pn_self_pb(pn, energy),
        self_pb_numerical,
        scan,
        fitted_exponent,
    };
    Ok((points, summary))
}

pub fn run(cfg: &RunConfig) -> Result<(), CliError> {
    let (spec, model) = cfg.model()?;
    let energy = cfg
        .energy
        .ok_or_else(|| CliError::invalid("--energy is required"))?;
    let ell = cfg
        .ell
        .ok_or_else(|| CliError::invalid("--ell is required"))?;
    if !(energy.is_finite() && ell.is_finite() && ell > 0.0) {
        return Err(CliError::invalid(
            "--energy must be finite and --ell positive",
        ));
    }
    if cfg.points.is_some_and(|n| n < 2) {
        return Err(CliError::invalid("--points must be at least 2"));
    }
    if cfg.thetamax.is_some_and(|t| !(t.is_finite() && t > 0.0)) {
        return Err(CliError::invalid("--thetamax must be positive"));
    }
    let tol = cfg.tol(DEFAULT_TOL)?;
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| CliError::invalid("--out is required"))?;
    let report = cfg
        .report
        .clone()
        .unwrap_or_else(|| sibling(&out, "summary.json"));

    let (points, details) = match &model {
        CentralModel::RelCoulomb { m, kappa } => {
            if cfg.c_values.is_some() {
                return Err(CliError::invalid(
                    "--c-values applies to the post-Newtonian model only",
                ));
            }
            let (p, s) = coulomb(*m, *kappa, energy, ell, cfg, tol)?;
            (p, Details::Coulomb(s))
        }
        CentralModel::PostNewtonian(pn) => {
            if cfg.regime.is_some() {
                return Err(CliError::invalid(
                    "--regime applies to the relativistic Coulomb model only",
                ));
            }
            let (p, s) = post_newtonian(&spec, pn, energy, ell, cfg, tol)?;
            (p, Details::PostNewtonian(s))
        }
        other => {
            return Err(CliError::invalid(format!(
                "no closed form for model `{}`",
                other.name()
            )))
        }
    };
    write_atomic(&out, |w| write_orbit_csv(&points, w))?;
    let summary = ClosedformSummary {
        schema: SCHEMA_VERSION,
        command: "closedform",
        model: spec,
        energy,
        ell,
        tol,
        details,
    };
    write_json(&report, &summary)
}
