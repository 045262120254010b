//! First post-Newtonian two-body orbits (electromagnetic or gravitational).
//!
//! With `u = 1/r − κ/(2M₀c²r²)` the orbit equation closes to first order in
//! `1/c²` as `u = u₀ + B cos((1 − δ)θ)`. All energies exclude rest mass.

use serde::{Deserialize, Serialize};

use super::{planar_state, ClosedFormError, OrbitPoint};
use crate::models::{rotate_in_plane, PhaseState, PostNewtonian, Vec3};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PnCoefficients {
    /// Offset of the orbit in `u`.
    pub u_o: f64,
    /// Amplitude in `u`; non-negative.
    pub b: f64,
    /// Precession parameter: perihelia are `2π/(1 − δ)` apart.
    pub delta: f64,
}

/// `(u₀, B, δ)` for energy `E'` and angular momentum `ℓ`.
pub fn pn_coefficients(
    pn: &PostNewtonian,
    e_prime: f64,
    ell: f64,
) -> Result<PnCoefficients, ClosedFormError> {
    let mu = pn.reduced_mass();
    let m0 = pn.total_mass();
    let (kappa, alpha) = (pn.kappa(), pn.alpha());
    let c2 = pn.c() * pn.c();
    let l2 = ell * ell;
    let x = kappa * kappa / (l2 * c2);
    let five = 1.0 + 5.0 * alpha * mu / (3.0 * m0);
    let kepler_u = mu * kappa / l2;

    let u_o = -(1.0 + five * x) * kepler_u
        - (1.0 - (1.0 - alpha) * mu / m0) * kappa * e_prime / (l2 * c2);
    let b2 = (1.0 + (2.0 + (8.0 * alpha - 3.0) * mu / (3.0 * m0)) * x) * 2.0 * mu * e_prime / l2
        + (1.0 - 3.0 * mu / m0) * e_prime * e_prime / (l2 * c2)
        + (1.0 + five * 2.0 * x) * kepler_u * kepler_u;
    let delta = five * x / 2.0;
    if !(b2 > 0.0) || !b2.is_finite() {
        return Err(ClosedFormError::UnboundOrInvalid);
    }
    let b = b2.sqrt();
    // bound: u stays positive through the aphelion
    if !(u_o - b > 0.0) {
        return Err(ClosedFormError::UnboundOrInvalid);
    }
    Ok(PnCoefficients { u_o, b, delta })
}

/// `(u, r)` at `θ` from the perihelion; `r` solves `u = 1/r − κ/(2M₀c²r²)` on
/// the branch continuous with `r = 1/u`.
pub fn pn_orbit(
    pn: &PostNewtonian,
    coeffs: &PnCoefficients,
    theta: f64,
) -> Result<(f64, f64), ClosedFormError> {
    let u = coeffs.u_o + coeffs.b * ((1.0 - coeffs.delta) * theta).cos();
    let k = pn.kappa() / (2.0 * pn.total_mass() * pn.c() * pn.c());
    let disc = 1.0 - 4.0 * k * u;
    if !(disc >= 0.0) {
        return Err(ClosedFormError::NoPositiveRoot(u));
    }
    let inv_r = 2.0 * u / (1.0 + disc.sqrt());
    if !(inv_r > 0.0) {
        return Err(ClosedFormError::NoPositiveRoot(u));
    }
    Ok((u, 1.0 / inv_r))
}

/// `p_r = (1 − δ) ℓ B sin((1 − δ)θ)`.
pub fn pn_radial_momentum(coeffs: &PnCoefficients, ell: f64, theta: f64) -> f64 {
    let g = 1.0 - coeffs.delta;
    g * ell * coeffs.b * (g * theta).sin()
}

/// `K = (1 − δ)² ℓ² B`.
pub fn pn_magnitude(coeffs: &PnCoefficients, ell: f64) -> f64 {
    (1.0 - coeffs.delta).powi(2) * ell * ell * coeffs.b
}

/// Self-bracket coefficient `−[2μE' + (1 − 3μ/M₀) E'²/c²]`.
pub fn pn_self_pb(pn: &PostNewtonian, e_prime: f64) -> f64 {
    let mu = pn.reduced_mass();
    -(2.0 * mu * e_prime
        + (1.0 - 3.0 * mu / pn.total_mass()) * e_prime * e_prime / (pn.c() * pn.c()))
}

/// Constant LRL vector of a PN state; `theta` is the unwrapped angle swept
/// since a perihelion. The co-rotating vector is turned back by the exact
/// rotation through `−δθ`.
pub fn pn_lrl(s: &PhaseState, pn: &PostNewtonian, theta: f64) -> Result<Vec3, ClosedFormError> {
    let model = crate::models::CentralModel::PostNewtonian(*pn);
    let e_prime = model.energy(s)?;
    let ell_vec = s.r.cross(&s.p);
    let ell = ell_vec.norm();
    let coeffs = pn_coefficients(pn, e_prime, ell)?;
    let mu = pn.reduced_mass();
    let m0 = pn.total_mass();
    let (kappa, alpha) = (pn.kappa(), pn.alpha());
    let c2 = pn.c() * pn.c();
    let r = s.radius();
    let radial = (1.0 + (1.0 / mu - (1.0 - alpha) / m0) * e_prime / c2) * mu * kappa / r
        - (1.0 + 5.0 * alpha * mu / (3.0 * m0)) * kappa * kappa / (2.0 * c2 * r * r)
        - kappa * ell * ell / (2.0 * m0 * c2 * r * r * r);
    let k_rot = s.p.cross(&ell_vec) * (1.0 - coeffs.delta) + s.r * radial;
    Ok(rotate_in_plane(
        &(ell_vec / ell),
        -coeffs.delta * theta,
        &k_rot,
    ))
}

/// Analytic orbit with its LRL vector on a `θ` grid.
pub fn pn_sample(
    pn: &PostNewtonian,
    e_prime: f64,
    ell: f64,
    thetas: &[f64],
) -> Result<Vec<OrbitPoint>, ClosedFormError> {
    let coeffs = pn_coefficients(pn, e_prime, ell)?;
    thetas
        .iter()
        .map(|&theta| {
            let (_, r) = pn_orbit(pn, &coeffs, theta)?;
            let p_r = pn_radial_momentum(&coeffs, ell, theta);
            let s = planar_state(r, theta, p_r, ell)?;
            let k_vec = pn_lrl(&s, pn, theta)?;
            Ok(OrbitPoint {
                theta,
                r,
                p_r,
                k_vec,
            })
        })
        .collect()
}
