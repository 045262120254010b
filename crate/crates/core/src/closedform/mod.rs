//! Analytic orbits and LRL vectors used as oracles for the numerical routes.

mod coulomb;
mod pn;

pub use coulomb::{
    coulomb_regime, relcoulomb_lrl, relcoulomb_magnitude, relcoulomb_orbit, relcoulomb_rmin,
    relcoulomb_sample, CoulombRegime, RegimeReport,
};
pub use pn::{
    pn_coefficients, pn_lrl, pn_magnitude, pn_orbit, pn_radial_momentum, pn_sample, pn_self_pb,
    PnCoefficients,
};

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{ModelError, PhaseState, Vec3};

#[derive(Debug, Clone, Error)]
pub enum ClosedFormError {
    #[error("theta = {theta} is outside the orbit's domain")]
    OutsideDomain { theta: f64 },
    #[error("no turning point in this regime")]
    NoTurningPoint,
    #[error("parameters do not describe a bound post-Newtonian orbit")]
    UnboundOrInvalid,
    #[error("no positive radius for u = {0}")]
    NoPositiveRoot(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// One point of an analytic orbit in the plane with normal `ẑ` and the
/// reference apsis along `x̂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitPoint {
    pub theta: f64,
    pub r: f64,
    pub p_r: f64,
    pub k_vec: Vec3,
}

pub const ORBIT_CSV_HEADER: &str = "theta,r,p_r,Kx,Ky,Kz";

pub fn write_orbit_csv(points: &[OrbitPoint], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{ORBIT_CSV_HEADER}")?;
    for p in points {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            p.theta, p.r, p.p_r, p.k_vec.x, p.k_vec.y, p.k_vec.z
        )?;
    }
    Ok(())
}

/// Planar state at polar `(r, θ)` with momenta `(p_r, ℓ/r)`.
pub(crate) fn planar_state(
    r: f64,
    theta: f64,
    p_r: f64,
    ell: f64,
) -> Result<PhaseState, ModelError> {
    let (s, c) = theta.sin_cos();
    let rhat = Vec3::new(c, s, 0.0);
    let that = Vec3::new(-s, c, 0.0);
    PhaseState::new(rhat * r, rhat * p_r + that * (ell / r), 0.0)
}
