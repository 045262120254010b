//! Constant generalized Laplace-Runge-Lenz vectors.
//!
//! For any rotationally symmetric `H(r, p_r, ℓ)` the vector is `K(E, ℓ²)·u⃗ₒ`
//! where `u⃗ₒ` points to the closest approach `r_m` (smallest root of
//! `H(r, 0, ℓ) = E`) and `K = −ℓ (∂H/∂r)/(∂H/∂ℓ)` at `r_m`. The magnitude is
//! chosen so that the coefficient of `p⃗ × ℓ⃗` equals one at the perihelion.
//!
//! Two constructions of the direction are provided: integrate to the next
//! perihelion ([`lrl_vector_via_perihelion`]), or accumulate the correction
//! `W⃗` to the classical form along the trajectory ([`lrl_vector_w_route`]).
//! [`lrl_observable`] evaluates the same vector as a phase-space function by
//! computing the orbit angle since perihelion by quadrature.

mod observable;
mod route;

pub use observable::{
    bracket_with_observable, dressed_observable, frozen_lrl_observable, lrl_observable,
    orbit_angle, w_route_at, w_route_observable, Dressing,
};
pub use route::{
    lrl_vector_via_perihelion, lrl_vector_w_route, w_growth_exponent, w_route_from_state,
    PerihelionLrl, PerihelionOptions, PerihelionRecord, WRouteSeries, WSample,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::DynamicsError;
use crate::models::{CentralModel, ModelError, PhaseState, Vec3};
use crate::numerics::{brent_minimize, brent_root};

#[derive(Debug, Clone, Error)]
pub enum LrlError {
    #[error("no turning point for E = {energy}, l = {ell}")]
    NoTurningPoint { energy: f64, ell: f64 },
    #[error("model `{0}` is not supported by this construction")]
    ModelUnsupported(&'static str),
    #[error("magnitude is not differentiable in l^2 at E = {energy}, l = {ell}")]
    NonDifferentiableMagnitude { energy: f64, ell: f64 },
    #[error("W accumulator is not finite")]
    QuadratureBlowup,
    #[error("trajectory was integrated without the W accumulator")]
    WNotAccumulated,
    #[error("no perihelion reached within the time limit")]
    NoPerihelionReached,
    #[error("bracket evaluation failed: {0}")]
    Bracket(#[from] crate::brackets::BracketError),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LrlNote {
    /// Circular motion: `K = 0` and the direction is arbitrary.
    CircularDegenerate,
    /// More than one perihelion was encountered; the first one is used.
    MultiPerihelion,
    /// Unbound and receding: the perihelion lies in the past.
    BackwardPerihelion,
}

/// Generalized LRL vector of one orbit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LrlResult {
    #[serde(rename = "E")]
    pub energy: f64,
    #[serde(rename = "l")]
    pub ell: f64,
    #[serde(rename = "l_vec")]
    pub ell_vec: Vec3,
    pub r_m: f64,
    #[serde(rename = "K")]
    pub k_mag: f64,
    pub u_o: Vec3,
    #[serde(rename = "K_vec")]
    pub k_vec: Vec3,
    /// Coefficient `c` in `{Kⁱ, Kʲ} = c εⁱʲᵏ ℓᵏ`.
    pub self_pb_coeff: Option<f64>,
    pub notes: Vec<LrlNote>,
}

/// Turning points of the radial motion at fixed `(E, ℓ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClosestApproach {
    pub r_m: f64,
    /// `r_m` is a double root (circular motion).
    pub double_root: bool,
    /// Next turning point outward; `None` for unbound motion.
    pub r_outer: Option<f64>,
}

const GRID_NODES: usize = 256;
const GRID_LOW: f64 = 1e-6;
const GRID_HIGH: f64 = 1e3;

/// Turning points of `g(r) = H(r, 0, ℓ) − E`, scanning a logarithmic grid
/// over `[1e−6 r₀, 1e3 r₀]`. `r₀` defaults to the model's length scale.
///
/// `r_m` is the smallest root where `g` turns from positive (forbidden) to
/// non-positive (allowed) going outward.
pub fn closest_approach(
    model: &CentralModel,
    energy: f64,
    ell: f64,
    length_hint: Option<f64>,
) -> Result<ClosestApproach, LrlError> {
    let l2 = ell * ell;
    let r0 = length_hint
        .filter(|r| *r > 0.0 && r.is_finite())
        .unwrap_or_else(|| model.length_scale(ell));
    let no_turn = || LrlError::NoTurningPoint { energy, ell };
    let g = |r: f64| {
        model
            .squared_partials(r, 0.0, l2)
            .map(|sp| sp.h - energy)
            .unwrap_or(f64::NAN)
    };
    let ratio = (GRID_HIGH / GRID_LOW).powf(1.0 / (GRID_NODES - 1) as f64);
    let grid: Vec<f64> = (0..GRID_NODES)
        .map(|i| r0 * GRID_LOW * ratio.powi(i as i32))
        .collect();
    let values: Vec<f64> = grid.iter().map(|&r| g(r)).collect();
    let flat = 1e-13 * energy.abs().max(1.0);

    let mut found: Option<(f64, bool, usize)> = None;
    for i in 0..GRID_NODES - 1 {
        let (ga, gb) = (values[i], values[i + 1]);
        if !(ga.is_finite() && gb.is_finite()) {
            continue;
        }
        if ga > 0.0 && gb <= 0.0 {
            // an allowed region narrower than the grid may be a tangency
            if i + 2 < GRID_NODES && values[i + 2] > 0.0 {
                let (xm, gm) = brent_minimize(&g, grid[i], grid[i + 2], 0.0);
                if gm >= -flat {
                    found = Some((xm, true, i + 1));
                    break;
                }
            }
            let r = brent_root(&g, grid[i], grid[i + 1], 0.0).map_err(|_| no_turn())?;
            found = Some((r, false, i + 1));
            break;
        }
        // a dip between grid nodes that may touch or cross zero
        if i >= 1 && ga > 0.0 && values[i - 1] > ga && gb > ga {
            let (xm, gm) = brent_minimize(&g, grid[i - 1], grid[i + 1], 0.0);
            if gm.abs() <= flat {
                found = Some((xm, true, i + 1));
                break;
            }
            if gm < 0.0 {
                let r = brent_root(&g, grid[i - 1], xm, 0.0).map_err(|_| no_turn())?;
                let outer = brent_root(&g, xm, grid[i + 1], 0.0).ok();
                return Ok(ClosestApproach {
                    r_m: r,
                    double_root: false,
                    r_outer: outer,
                });
            }
        }
    }
    let (r_m, double_root, start) = found.ok_or_else(no_turn)?;
    if double_root {
        return Ok(ClosestApproach {
            r_m,
            double_root,
            r_outer: Some(r_m),
        });
    }
    // first return to the forbidden region beyond r_m
    let mut r_outer = None;
    let mut prev = (r_m, g(r_m).min(0.0));
    for j in start..GRID_NODES {
        let (r, v) = (grid[j], values[j]);
        if v > 0.0 && prev.1 <= 0.0 {
            r_outer = brent_root(&g, prev.0, r, 0.0).ok();
            break;
        }
        prev = (r, v);
    }
    if r_outer.is_none() {
        // an allowed region that closes again between the last two nodes
        let lo = prev.0;
        let (xm, gm) = brent_minimize(|r| -g(r), lo, grid[GRID_NODES - 1], 0.0);
        if -gm > 0.0 {
            r_outer = brent_root(&g, lo, xm, 0.0).ok();
        }
    }
    Ok(ClosestApproach {
        r_m,
        double_root,
        r_outer,
    })
}

/// Closest approach `r_m` for `(E, ℓ)`.
pub fn find_rmin(model: &CentralModel, energy: f64, ell: f64) -> Result<f64, LrlError> {
    Ok(closest_approach(model, energy, ell, None)?.r_m)
}

/// `K = −(∂H/∂r)/(2 ∂H/∂(ℓ²))` at the closest approach; 0 for circular motion.
pub(crate) fn magnitude_at(
    model: &CentralModel,
    energy: f64,
    ell: f64,
    ca: &ClosestApproach,
) -> Result<f64, LrlError> {
    if let CentralModel::Micz {
        m,
        kappa,
        alpha_monopole: a,
    } = model
    {
        let k2 = 2.0 * m * energy * (ell * ell - a * a) + m * m * kappa * kappa;
        return Ok(k2.max(0.0).sqrt());
    }
    if ca.double_root {
        return Ok(0.0);
    }
    let sp = model.squared_partials(ca.r_m, 0.0, ell * ell)?;
    Ok((-sp.d_r / (2.0 * sp.d_l2)).max(0.0))
}

/// Magnitude `K(E, ℓ²)` of the generalized LRL vector.
pub fn lrl_magnitude(model: &CentralModel, energy: f64, ell: f64) -> Result<f64, LrlError> {
    let ca = closest_approach(model, energy, ell, None)?;
    magnitude_at(model, energy, ell, &ca)
}

/// `K²(E, ℓ²)` as a plain function, NaN where no turning point exists.
pub fn magnitude_squared_fn(model: &CentralModel) -> impl Fn(f64, f64) -> f64 + Send + Sync {
    let model = model.clone();
    move |energy, l2| lrl_magnitude(&model, energy, l2.max(0.0).sqrt()).map_or(f64::NAN, |k| k * k)
}

/// Coefficient `−∂(K²)/∂(ℓ²)` at fixed `E`, by re-solving `r_m` at `ℓ² ± h`.
pub fn self_pb_coefficient(model: &CentralModel, energy: f64, ell: f64) -> Result<f64, LrlError> {
    let l2 = ell * ell;
    let h = 1e-6 * l2.max(1e-12);
    let hint = closest_approach(model, energy, ell, None)?.r_m;
    let ksq = |l2: f64| -> Result<f64, LrlError> {
        let l = l2.sqrt();
        let ca = closest_approach(model, energy, l, Some(hint))?;
        Ok(magnitude_at(model, energy, l, &ca)?.powi(2))
    };
    let (lo, mid, hi) = (ksq(l2 - h)?, ksq(l2)?, ksq(l2 + h)?);
    let forward = (hi - mid) / h;
    let backward = (mid - lo) / h;
    let scale = forward.abs().max(backward.abs()).max(1e-12);
    if (forward - backward).abs() > 1e-3 * scale {
        return Err(LrlError::NonDifferentiableMagnitude { energy, ell });
    }
    Ok(-(hi - lo) / (2.0 * h))
}

/// `p⃗ × ℓ⃗ + μκ r̂` with `ℓ⃗ = r⃗ × p⃗`.
pub fn classical_kepler_lrl(s: &PhaseState, mu: f64, kappa: f64) -> Vec3 {
    s.p.cross(&s.r.cross(&s.p)) + s.r * (mu * kappa / s.radius())
}

/// `m v⃗ × ℓ⃗ + mκ r̂` with `ℓ⃗ = m r⃗ × v⃗ − α r̂`; `s.p` is the kinetic momentum.
pub fn micz_lrl(s: &PhaseState, m: f64, kappa: f64, alpha: f64) -> Vec3 {
    let rhat = s.r / s.radius();
    let ell = s.r.cross(&s.p) - rhat * alpha;
    s.p.cross(&ell) + rhat * (m * kappa)
}

/// Closed-form result for a MICZ state. `K⃗` leaves the orbital plane here, so
/// `u_o` is the direction of `K⃗` itself rather than of a perihelion.
pub fn micz_result(model: &CentralModel, s: &PhaseState) -> Result<LrlResult, LrlError> {
    let CentralModel::Micz {
        m,
        kappa,
        alpha_monopole,
    } = *model
    else {
        return Err(LrlError::ModelUnsupported(model.name()));
    };
    let k = micz_lrl(s, m, kappa, alpha_monopole);
    let k_norm = k.norm();
    if k_norm <= 1e-12 * (m * kappa).abs() {
        return assemble(
            model,
            s,
            s.r / s.radius(),
            vec![LrlNote::CircularDegenerate],
        )
        .map(|mut r| {
            r.k_mag = 0.0;
            r.k_vec = Vec3::zeros();
            r
        });
    }
    let mut out = assemble(model, s, k / k_norm, Vec::new())?;
    out.k_vec = k;
    Ok(out)
}

/// Result for a state: magnitude from the energy shell, direction supplied.
pub(crate) fn assemble(
    model: &CentralModel,
    s: &PhaseState,
    u_o: Vec3,
    notes: Vec<LrlNote>,
) -> Result<LrlResult, LrlError> {
    let energy = model.energy(s)?;
    let ell_vec = model.angular_momentum(s);
    let ell = ell_vec.norm();
    let ca = closest_approach(model, energy, ell, Some(s.radius()))?;
    let k_mag = magnitude_at(model, energy, ell, &ca)?;
    let self_pb_coeff = self_pb_coefficient(model, energy, ell).ok();
    Ok(LrlResult {
        energy,
        ell,
        ell_vec,
        r_m: ca.r_m,
        k_mag,
        u_o,
        k_vec: u_o * k_mag,
        self_pb_coeff,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kepler() -> CentralModel {
        CentralModel::kepler(1.0, -1.0).unwrap()
    }

    #[test]
    fn kepler_rmin_matches_quadratic() {
        assert!((find_rmin(&kepler(), -0.28, 1.2).unwrap() - 1.0).abs() < 1e-12);
        for (e, l) in [(-0.3, 0.8), (0.4, 1.1), (-0.05, 2.0)] {
            // 2E r² − 2κμ r... with μ = 1, κ = −1: 2E r² + 2 r − ℓ² = 0
            let disc = (4.0f64 + 8.0 * e * l * l).sqrt();
            let roots = [(-2.0 + disc) / (4.0 * e), (-2.0 - disc) / (4.0 * e)];
            let rp = roots
                .iter()
                .cloned()
                .filter(|r| *r > 0.0)
                .fold(f64::INFINITY, f64::min);
            let r = find_rmin(&kepler(), e, l).unwrap();
            assert!((r - rp).abs() < 1e-12 * rp, "{r} vs {rp}");
        }
    }

    #[test]
    fn rel_coulomb_rmin_closed_form() {
        let (m, kappa, e, l) = (1.0, -0.2, 0.95, 0.4);
        let model = CentralModel::rel_coulomb(m, kappa).unwrap();
        let k = ((e * e - m * m) * l * l + m * m * kappa * kappa).sqrt();
        let closed = (e * kappa + k) / (e * e - m * m);
        let r = find_rmin(&model, e, l).unwrap();
        assert!((r - closed).abs() < 1e-10, "{r} vs {closed}");
        let mag = lrl_magnitude(&model, e, l).unwrap();
        assert!((mag - k).abs() < 1e-10, "{mag} vs {k}");
    }

    #[test]
    fn circular_is_double_root() {
        let ca = closest_approach(&kepler(), -0.5, 1.0, None).unwrap();
        assert!(ca.double_root);
        assert!((ca.r_m - 1.0).abs() < 1e-6);
        assert_eq!(lrl_magnitude(&kepler(), -0.5, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn bound_orbit_has_outer_turning_point() {
        let ca = closest_approach(&kepler(), -0.28, 1.2, None).unwrap();
        // ℓ² = 1.44, roots of −0.56 r² + 2 r − 1.44: 1 and 1/0.56·1.44
        assert!((ca.r_outer.unwrap() - 1.44 / 0.56).abs() < 1e-10);
        assert_eq!(
            closest_approach(&kepler(), 0.3, 1.2, None).unwrap().r_outer,
            None
        );
    }

    #[test]
    fn no_turning_point_when_falling_in() {
        let model = CentralModel::rel_coulomb(1.0, -0.5).unwrap();
        assert!(matches!(
            find_rmin(&model, 0.9, 0.3),
            Err(LrlError::NoTurningPoint { .. })
        ));
    }

    #[test]
    fn kepler_magnitude_and_vector() {
        assert!((lrl_magnitude(&kepler(), -0.28, 1.2).unwrap() - 0.44).abs() < 1e-12);
        let s = PhaseState::from_slice([1.0, 0.0, 0.0, 0.0, 1.2, 0.0]).unwrap();
        let k = classical_kepler_lrl(&s, 1.0, -1.0);
        assert!((k - Vec3::new(0.44, 0.0, 0.0)).norm() < 1e-15);
        assert!((k.norm_squared() - (2.0 * -0.28 * 1.44 + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn self_pb_coefficients() {
        let c = self_pb_coefficient(&kepler(), -0.28, 1.2).unwrap();
        assert!((c - 0.56).abs() < 1e-8, "{c}");
        let beta = 0.02;
        let model = CentralModel::power_sum(1.0, &[(-1.0, -1.0), (beta, -2.0)]).unwrap();
        let c = self_pb_coefficient(&model, -0.28, 1.2).unwrap();
        assert!((c - 0.56).abs() < 1e-8, "{c}");
        let rel = CentralModel::rel_coulomb(1.0, -0.2).unwrap();
        let c = self_pb_coefficient(&rel, 0.95, 0.4).unwrap();
        assert!((c + (0.95f64 * 0.95 - 1.0)).abs() < 1e-8, "{c}");
    }

    #[test]
    fn micz_closed_form_relations() {
        let (m, kappa, alpha) = (1.0, -1.0, 0.4);
        let model = CentralModel::micz(m, kappa, alpha).unwrap();
        let s = PhaseState::from_slice([1.0, 0.2, 0.3, 0.1, 0.9, -0.2]).unwrap();
        let k = micz_lrl(&s, m, kappa, alpha);
        let ell = model.angular_momentum(&s);
        assert!((k.dot(&ell) + m * alpha * kappa).abs() < 1e-14);
        let e = model.energy(&s).unwrap();
        let k2 = 2.0 * m * e * (ell.norm_squared() - alpha * alpha) + m * m * kappa * kappa;
        assert!((k.norm_squared() - k2).abs() < 1e-13);
        assert!((lrl_magnitude(&model, e, ell.norm()).unwrap() - k2.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn result_serializes_with_short_keys() {
        let s = PhaseState::from_slice([1.0, 0.0, 0.0, 0.0, 1.2, 0.0]).unwrap();
        let r = assemble(&kepler(), &s, Vec3::x(), vec![]).unwrap();
        let json = serde_json::to_value(&r).unwrap();
        for key in ["E", "l", "r_m", "K", "u_o", "K_vec", "self_pb_coeff"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        assert_eq!(json["K_vec"][0].as_f64().unwrap(), r.k_vec.x);
    }

    #[test]
    fn micz_result_carries_the_closed_form_vector() {
        let model = CentralModel::micz(1.0, -1.0, 0.4).unwrap();
        let s = PhaseState::from_slice([1.0, 0.2, 0.3, 0.1, 0.9, -0.2]).unwrap();
        let r = micz_result(&model, &s).unwrap();
        assert_eq!(r.k_vec, micz_lrl(&s, 1.0, -1.0, 0.4));
        assert!((r.k_vec.norm() - r.k_mag).abs() < 1e-12);
        assert!(matches!(
            micz_result(&kepler(), &s),
            Err(LrlError::ModelUnsupported(_))
        ));
    }
}
