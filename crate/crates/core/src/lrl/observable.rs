use super::route::classical_part;
use super::{closest_approach, magnitude_at, micz_lrl, LrlError, LrlResult};
use crate::brackets::{bracket, gradient, BracketConfig, Observable, VectorObservable};
use crate::dynamics::{
    find_turning_points, integrate_until, IntegratorConfig, StopCondition, TurningKind,
};
use crate::models::{rotate_in_plane, CentralModel, PhaseState, Vec3};
use crate::numerics::integrate;

// p_r² near r_m is a difference of large terms; tighter targets chase rounding
// noise without improving the value.
const QUAD_ABS: f64 = 1e-12;
const QUAD_REL: f64 = 1e-10;

/// Signed angle swept since the closest approach along the orbit through `s`:
/// `sign(p_r) ∫_{r_m}^{r} (dθ/dr) dr` on the energy shell of `s`.
///
/// On a precessing bound orbit this jumps at the aphelion.
pub fn orbit_angle(model: &CentralModel, s: &PhaseState) -> Result<f64, LrlError> {
    if let CentralModel::Micz { .. } = model {
        return Err(LrlError::ModelUnsupported("micz"));
    }
    let energy = model.energy(s)?;
    let l2 = s.orbital_angular_momentum().norm_squared();
    let ell = l2.sqrt();
    let r = s.radius();
    let ca = closest_approach(model, energy, ell, Some(r))?;
    if ca.double_root || r <= ca.r_m {
        return Ok(0.0);
    }
    let shell = |r: f64| {
        model
            .radial_momentum_squared(energy, r, l2)
            .unwrap_or(f64::NAN)
    };
    // dθ/dr · p_r on the shell, given p_r
    let numer = |r: f64, p: f64| model.angular_rate_times_pr(r, p, l2).unwrap_or(f64::NAN);
    // p_r² = (root factors) · G(r) with G smooth and positive inside. Dividing the
    // roots out keeps the integrand regular even when r_m carries rounding error,
    // which would otherwise leave an O(√ε) error in the angle. G itself is 0/0 at
    // the roots, so it is extrapolated linearly in r over the last EDGE (in φ or
    // σ/scale) of the range.
    const EDGE: f64 = 1e-3;
    let quad = match ca.r_outer {
        Some(r_a) => {
            // r = c − a cos φ, so (r − r_m)(r_a − r) = a² sin² φ
            let c = 0.5 * (r_a + ca.r_m);
            let a = 0.5 * (r_a - ca.r_m);
            let reduced = |r: f64| shell(r) / ((r - ca.r_m) * (r_a - r));
            let delta = a * (1.0 - EDGE.cos());
            let g = |r: f64| {
                if r - ca.r_m < delta {
                    extrapolate(&reduced, ca.r_m + delta, ca.r_m + 2.0 * delta, r)
                } else if r_a - r < delta {
                    extrapolate(&reduced, r_a - delta, r_a - 2.0 * delta, r)
                } else {
                    reduced(r)
                }
            };
            let phi_end = ((c - r) / a).clamp(-1.0, 1.0).acos();
            integrate(
                |phi| {
                    let rr = c - a * phi.cos();
                    let gv = g(rr);
                    if gv <= 0.0 {
                        return 0.0;
                    }
                    numer(rr, a * phi.sin() * gv.sqrt()) / gv.sqrt()
                },
                0.0,
                phi_end,
                QUAD_ABS,
                QUAD_REL,
            )
        }
        None => {
            // r = r_m + σ², so r − r_m = σ²
            let scale = ca.r_m.max(r - ca.r_m).sqrt();
            let reduced = |r: f64| shell(r) / (r - ca.r_m);
            let delta = (EDGE * scale).powi(2);
            let g = |r: f64| {
                if r - ca.r_m < delta {
                    extrapolate(&reduced, ca.r_m + delta, ca.r_m + 2.0 * delta, r)
                } else {
                    reduced(r)
                }
            };
            let sigma_end = (r - ca.r_m).sqrt();
            integrate(
                |sg| {
                    let gv = g(ca.r_m + sg * sg);
                    if gv <= 0.0 {
                        return 0.0;
                    }
                    2.0 * numer(ca.r_m + sg * sg, sg * gv.sqrt()) / gv.sqrt()
                },
                0.0,
                sigma_end,
                QUAD_ABS,
                QUAD_REL,
            )
        }
    };
    if !quad.value.is_finite() {
        return Err(LrlError::QuadratureBlowup);
    }
    let sign = if s.radial_momentum() < 0.0 { -1.0 } else { 1.0 };
    Ok(sign * quad.value)
}

/// Linear extrapolation of `f` through the nodes `x0`, `x1` evaluated at `x`.
fn extrapolate(f: &impl Fn(f64) -> f64, x0: f64, x1: f64, x: f64) -> f64 {
    let (f0, f1) = (f(x0), f(x1));
    f0 + (f1 - f0) * (x - x0) / (x1 - x0)
}

fn route_one(model: &CentralModel, s: &PhaseState) -> Result<Vec3, LrlError> {
    if let CentralModel::Micz {
        m,
        kappa,
        alpha_monopole,
    } = model
    {
        return Ok(micz_lrl(s, *m, *kappa, *alpha_monopole));
    }
    let energy = model.energy(s)?;
    let ell_vec = s.orbital_angular_momentum();
    let ell = ell_vec.norm();
    let ca = closest_approach(model, energy, ell, Some(s.radius()))?;
    let k = magnitude_at(model, energy, ell, &ca)?;
    let theta = orbit_angle(model, s)?;
    Ok(rotate_in_plane(&(ell_vec / ell), -theta, &(s.r / s.radius())) * k)
}

fn nan_on_error(v: Result<Vec3, LrlError>) -> Vec3 {
    v.unwrap_or_else(|_| Vec3::repeat(f64::NAN))
}

/// `K⃗` as a phase-space function: magnitude from `(E, ℓ²)`, direction from the
/// orbit angle by quadrature. MICZ uses its closed form.
pub fn lrl_observable(model: &CentralModel) -> VectorObservable {
    let model = model.clone();
    VectorObservable::new("K", move |s| nan_on_error(route_one(&model, s)))
}

/// Coefficients of a dressed LRL vector `f u⃗ₒ + g ℓ⃗ × u⃗ₒ + (h/ℓ²) ℓ⃗`.
///
/// `f` and `g` take `(E, ℓ²)`; `h` takes `E` alone, since `K⃗ · ℓ⃗ = h` must
/// commute with `K⃗`. Any choice is conserved; only its self bracket changes.
pub struct Dressing {
    pub f: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub g: Box<dyn Fn(f64, f64) -> f64 + Send + Sync>,
    pub h: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl Dressing {
    /// The bare perihelion direction: `f = 1`, `g = h = 0`.
    pub fn unit() -> Self {
        Dressing {
            f: Box::new(|_, _| 1.0),
            g: Box::new(|_, _| 0.0),
            h: Box::new(|_| 0.0),
        }
    }
}

/// `u⃗ₒ` from the orbit angle, dressed by `d`. [`lrl_observable`] is the
/// dressing `f = K(E, ℓ²)`, `g = h = 0`.
pub fn dressed_observable(model: &CentralModel, d: Dressing) -> Result<VectorObservable, LrlError> {
    if let CentralModel::Micz { .. } = model {
        // the cone term keeps K⃗ off the orbital plane; no planar u⃗ₒ to dress
        return Err(LrlError::ModelUnsupported("micz"));
    }
    let model = model.clone();
    Ok(VectorObservable::new("K_dressed", move |s| {
        nan_on_error((|| {
            let energy = model.energy(s)?;
            let ell_vec = s.orbital_angular_momentum();
            let l2 = ell_vec.norm_squared();
            let theta = orbit_angle(&model, s)?;
            let u = rotate_in_plane(&(ell_vec / l2.sqrt()), -theta, &(s.r / s.radius()));
            Ok(u * (d.f)(energy, l2)
                + ell_vec.cross(&u) * (d.g)(energy, l2)
                + ell_vec * ((d.h)(energy) / l2))
        })())
    }))
}

/// `K⃗(s) = p⃗ × ℓ⃗ − μ r U' r̂ − W⃗ₚ` where `W⃗ₚ` is accumulated from `s` to the
/// next perihelion (the previous one when receding on an unbound orbit).
pub fn w_route_observable(model: &CentralModel, tol: f64) -> VectorObservable {
    let model = model.clone();
    VectorObservable::new("K_w", move |s| nan_on_error(w_route_at(&model, s, tol)))
}

/// W-route value of `K⃗` at `s`; see [`w_route_observable`].
pub fn w_route_at(model: &CentralModel, s: &PhaseState, tol: f64) -> Result<Vec3, LrlError> {
    if let CentralModel::Micz { .. } = model {
        return Err(LrlError::ModelUnsupported("micz"));
    }
    if model.w_kernel(s.radius()).is_none() {
        return Err(LrlError::ModelUnsupported(model.name()));
    }
    let energy = model.energy(s)?;
    let ca = closest_approach(
        model,
        energy,
        s.orbital_angular_momentum().norm(),
        Some(s.radius()),
    )?;
    let backward = ca.r_outer.is_none() && s.radial_momentum() > 0.0;
    let max_time = if backward { -1e5 } else { 1e5 };
    let cfg = IntegratorConfig::with_tol(tol).accumulating_w();
    let traj = integrate_until(
        model,
        s,
        StopCondition::Perihelia { count: 1, max_time },
        &cfg,
    )?;
    let event = find_turning_points(&traj)
        .into_iter()
        .find(|e| e.kind == TurningKind::Perihelion)
        .ok_or(LrlError::NoPerihelionReached)?;
    Ok(classical_part(model, s)? - event.w)
}

/// `K(E, ℓ²)` times the fixed direction `u⃗` projected onto the orbital plane of
/// each state.
pub fn frozen_lrl_observable(model: &CentralModel, direction: Vec3) -> VectorObservable {
    let model = model.clone();
    VectorObservable::new("K_frozen", move |s| {
        nan_on_error((|| {
            let energy = model.energy(s)?;
            let ell_vec = s.orbital_angular_momentum();
            let ell = ell_vec.norm();
            let ca = closest_approach(&model, energy, ell, Some(s.radius()))?;
            let k = magnitude_at(&model, energy, ell, &ca)?;
            let n = ell_vec / ell;
            Ok((direction - n * direction.dot(&n)).normalize() * k)
        })())
    })
}

/// `{F, K⃗}` at the state of `lrl` with `u⃗ₒ` held fixed in space:
/// `(∂K/∂E {F, H} + ∂K/∂ℓ² {F, ℓ²}) u⃗ₒ + K {F, u⃗ₒ}` where only the
/// projection onto the current orbital plane moves `u⃗ₒ`, giving
/// `{F, u⃗ₒ} = −(u⃗ₒ · {F, ℓ⃗}) ℓ⃗ / ℓ²`.
pub fn bracket_with_observable(
    f: &Observable,
    model: &CentralModel,
    lrl: &LrlResult,
    s: &PhaseState,
    cfg: &BracketConfig,
) -> Result<Vec3, LrlError> {
    if let CentralModel::Micz { .. } = model {
        return Err(LrlError::ModelUnsupported("micz"));
    }
    let cfg = (*cfg).with_model(model);
    let (energy, l2) = (lrl.energy, lrl.ell * lrl.ell);
    let hint = Some(lrl.r_m);
    let mag = |e: f64, l2: f64| -> Result<f64, LrlError> {
        let l = l2.sqrt();
        magnitude_at(model, e, l, &closest_approach(model, e, l, hint)?)
    };
    let he = 1e-6 * energy.abs().max(1e-2);
    let hl = 1e-6 * l2.max(1e-12);
    let dk_de = (mag(energy + he, l2)? - mag(energy - he, l2)?) / (2.0 * he);
    let dk_dl2 = (mag(energy, l2 + hl)? - mag(energy, l2 - hl)?) / (2.0 * hl);

    let f_h = bracket(f, &Observable::energy(model), s, &cfg)?;
    let f_l2 = bracket(f, &Observable::ell_squared(model), s, &cfg)?;

    // {F, ℓ⃗} = r⃗ × ∇_r F − ∇_p F × p⃗
    let g = gradient(f, s, &cfg)?;
    let grad_r = Vec3::new(g[0], g[1], g[2]);
    let grad_p = Vec3::new(g[3], g[4], g[5]);
    let f_ell = s.r.cross(&grad_r) - grad_p.cross(&s.p);
    let ell_vec = s.orbital_angular_momentum();
    let f_u = -ell_vec * (lrl.u_o.dot(&f_ell) / ell_vec.norm_squared());

    Ok(lrl.u_o * (dk_de * f_h + dk_dl2 * f_l2) + f_u * lrl.k_mag)
}
