//! `H = √(p² + m²) + κ/r` around an infinitely heavy centre.
//!
//! The effective centrifugal term is `(ℓ² − κ²)/r²`, so the orbit family
//! depends on the sign of `ℓ − |κ|`.

use serde::{Deserialize, Serialize};

use super::{planar_state, ClosedFormError, OrbitPoint};
use crate::models::{rotate_in_plane, PhaseState, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoulombRegime {
    /// `ℓ > |κ|`: precessing conic sections.
    Barrier,
    /// `ℓ = |κ|`: no centrifugal barrier.
    Critical,
    /// `ℓ < |κ|`: the centrifugal term is reversed.
    Propeller,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub regime: CoulombRegime,
    pub ell: f64,
    pub kappa: f64,
    /// `ℓ² − κ²`.
    pub centrifugal: f64,
    pub tolerance: f64,
}

/// Regime of `(κ, ℓ)`; `|ℓ − |κ|| ≤ 1e−9 |κ|` counts as critical.
pub fn coulomb_regime(kappa: f64, ell: f64) -> RegimeReport {
    let tolerance = 1e-9 * kappa.abs();
    let gap = ell.abs() - kappa.abs();
    let regime = if gap.abs() <= tolerance {
        CoulombRegime::Critical
    } else if gap > 0.0 {
        CoulombRegime::Barrier
    } else {
        CoulombRegime::Propeller
    };
    RegimeReport {
        regime,
        ell,
        kappa,
        centrifugal: ell * ell - kappa * kappa,
        tolerance,
    }
}

/// `K = √((E² − m²) ℓ² + m² κ²)`.
pub fn relcoulomb_magnitude(m: f64, kappa: f64, energy: f64, ell: f64) -> f64 {
    ((energy * energy - m * m) * ell * ell + m * m * kappa * kappa)
        .max(0.0)
        .sqrt()
}

/// `r_m = (Eκ + K)/(E² − m²)`, written as `(κ² − ℓ²)/(Eκ − K)` near `E = m`.
pub fn relcoulomb_rmin(m: f64, kappa: f64, energy: f64, ell: f64) -> Result<f64, ClosedFormError> {
    let k = relcoulomb_magnitude(m, kappa, energy, ell);
    let e2m2 = energy * energy - m * m;
    let direct = (energy * kappa + k) / e2m2;
    let r = if (energy * kappa - k).abs() > 1e-8 * k.max(1e-300) {
        (kappa * kappa - ell * ell) / (energy * kappa - k)
    } else {
        direct
    };
    if r.is_finite() && r > 0.0 {
        Ok(r)
    } else {
        Err(ClosedFormError::NoTurningPoint)
    }
}

fn positive(r: f64, theta: f64) -> Result<f64, ClosedFormError> {
    if r.is_finite() && r > 0.0 {
        Ok(r)
    } else {
        Err(ClosedFormError::OutsideDomain { theta })
    }
}

/// `r(θ)` with `θ = 0` at the perihelion (at the aphelion for a bound critical
/// orbit, which spirals inward from there).
pub fn relcoulomb_orbit(
    m: f64,
    kappa: f64,
    energy: f64,
    ell: f64,
    theta: f64,
) -> Result<f64, ClosedFormError> {
    let k = relcoulomb_magnitude(m, kappa, energy, ell);
    let report = coulomb_regime(kappa, ell);
    let d = report.centrifugal;
    match report.regime {
        CoulombRegime::Barrier => {
            let g = (1.0 - kappa * kappa / (ell * ell)).sqrt();
            positive(d / (k * (g * theta).cos() - energy * kappa), theta)
        }
        CoulombRegime::Critical => positive(
            2.0 * kappa * energy / (energy * energy - m * m - energy * energy * theta * theta),
            theta,
        ),
        CoulombRegime::Propeller => {
            let g = (kappa * kappa / (ell * ell) - 1.0).sqrt();
            positive(-d / (energy * kappa - k * (g * theta).cosh()), theta)
        }
    }
}

/// `p_r = (ℓ/r²) dr/dθ` along the analytic orbit.
fn orbit_radial_momentum(m: f64, kappa: f64, energy: f64, ell: f64, theta: f64) -> f64 {
    let k = relcoulomb_magnitude(m, kappa, energy, ell);
    let report = coulomb_regime(kappa, ell);
    match report.regime {
        CoulombRegime::Barrier => {
            let g = (1.0 - kappa * kappa / (ell * ell)).sqrt();
            ell * k * g * (g * theta).sin() / report.centrifugal
        }
        CoulombRegime::Critical => ell * energy * theta / kappa,
        CoulombRegime::Propeller => {
            let g = (kappa * kappa / (ell * ell) - 1.0).sqrt();
            -ell * k * g * (g * theta).sinh() / report.centrifugal
        }
    }
}

/// Constant LRL vector of a relativistic Coulomb state. `theta` is the
/// unwrapped angle swept since the perihelion (since the aphelion in the
/// critical regime); in the propeller regime it is recovered from `r` and the
/// argument is ignored.
pub fn relcoulomb_lrl(
    s: &PhaseState,
    m: f64,
    kappa: f64,
    theta: f64,
) -> Result<Vec3, ClosedFormError> {
    let r = s.radius();
    let rhat = s.r / r;
    let ell_vec = s.r.cross(&s.p);
    let ell = ell_vec.norm();
    let n = ell_vec / ell;
    let energy = (s.p.norm_squared() + m * m).sqrt() + kappa / r;
    let report = coulomb_regime(kappa, ell);
    match report.regime {
        CoulombRegime::Barrier => {
            let root = report.centrifugal.sqrt();
            let g = root / ell;
            // K⃗′ is fixed in the frame co-rotating with the conic
            let k_rot = s.p.cross(&ell_vec) * g
                + rhat * ((report.centrifugal - ell * root) / r + kappa * energy);
            let psi = theta * (1.0 - g);
            Ok(rotate_in_plane(&n, -psi, &k_rot))
        }
        CoulombRegime::Critical => Ok(rotate_in_plane(&n, -theta, &rhat) * (kappa * energy)),
        CoulombRegime::Propeller => {
            let k = relcoulomb_magnitude(m, kappa, energy, ell);
            let g = (kappa * kappa / (ell * ell) - 1.0).sqrt();
            let arg = (energy * kappa + report.centrifugal / r) / k;
            if !(arg >= 1.0 - 1e-12) {
                return Err(ClosedFormError::NoTurningPoint);
            }
            let sign = if s.radial_momentum() < 0.0 { -1.0 } else { 1.0 };
            let th = sign * arg.max(1.0).acosh() / g;
            Ok(rotate_in_plane(&n, -th, &rhat) * k)
        }
    }
}

/// Analytic orbit with its LRL vector on a `θ` grid.
pub fn relcoulomb_sample(
    m: f64,
    kappa: f64,
    energy: f64,
    ell: f64,
    thetas: &[f64],
) -> Result<Vec<OrbitPoint>, ClosedFormError> {
    thetas
        .iter()
        .map(|&theta| {
            let r = relcoulomb_orbit(m, kappa, energy, ell, theta)?;
            let p_r = orbit_radial_momentum(m, kappa, energy, ell, theta);
            let s = planar_state(r, theta, p_r, ell)?;
            let k_vec = relcoulomb_lrl(&s, m, kappa, theta)?;
            Ok(OrbitPoint {
                theta,
                r,
                p_r,
                k_vec,
            })
        })
        .collect()
}
