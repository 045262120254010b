//! Rotationally symmetric two-body Hamiltonians.
//!
//! Every model is expressed in the reduced polar chart `(r, p_r, ℓ)` where `ℓ`
//! is the magnitude of the conserved internal angular momentum. All built-in
//! Hamiltonians are even in `p_r` and `ℓ`. Internally the partial derivatives
//! are taken with respect to `ℓ²`, which keeps head-on (`ℓ = 0`) states regular.
//!
//! For the charge-monopole (MICZ) system the phase-space momentum stored in a
//! [`PhaseState`] is the kinetic momentum `m v`, and the conserved angular
//! momentum is `m r × v − α r̂`.

use std::fmt;
use std::sync::Arc;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Vec3 = Vector3<f64>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("radius must be positive, got {0}")]
    NonPositiveRadius(f64),
    #[error("invalid model parameter: {0}")]
    InvalidParameter(String),
    #[error("derivative of the potential could not be evaluated at r = {0}")]
    DerivativeUnavailable(f64),
    #[error("model `{0}` has no potential decomposition")]
    NoPotentialDecomposition(&'static str),
    #[error("angular momentum vanishes; the plane of motion is undefined")]
    ZeroAngularMomentum,
    #[error("non-finite phase-space coordinate")]
    NonFiniteState,
}

/// Cartesian phase point of the relative motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub r: Vec3,
    pub p: Vec3,
    pub t: f64,
}

impl PhaseState {
    pub fn new(r: Vec3, p: Vec3, t: f64) -> Result<Self, ModelError> {
        if !(r.iter().chain(p.iter()).all(|x| x.is_finite()) && t.is_finite()) {
            return Err(ModelError::NonFiniteState);
        }
        let rn = r.norm();
        if rn <= 0.0 {
            return Err(ModelError::NonPositiveRadius(rn));
        }
        Ok(Self { r, p, t })
    }

    /// Builds a state from `x, y, z, px, py, pz`.
    pub fn from_slice(v: [f64; 6]) -> Result<Self, ModelError> {
        Self::new(
            Vec3::new(v[0], v[1], v[2]),
            Vec3::new(v[3], v[4], v[5]),
            0.0,
        )
    }

    pub fn radius(&self) -> f64 {
        self.r.norm()
    }

    /// `r̂ · p`
    pub fn radial_momentum(&self) -> f64 {
        self.r.dot(&self.p) / self.r.norm()
    }

    /// Orbital angular momentum `r × p`.
    pub fn orbital_angular_momentum(&self) -> Vec3 {
        self.r.cross(&self.p)
    }
}

/// Polar canonical coordinates in the plane of motion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolarState {
    pub r: f64,
    /// Unwrapped azimuth in radians.
    pub theta: f64,
    pub p_r: f64,
    /// Conserved `p_θ = ℓ`.
    pub p_theta: f64,
}

impl PolarState {
    pub fn new(r: f64, theta: f64, p_r: f64, p_theta: f64) -> Self {
        Self {
            r,
            theta,
            p_r,
            p_theta,
        }
    }
}

/// Orthonormal frame of the plane of motion: `normal = ℓ̂`, `reference` is the
/// direction from which `θ` is measured counter-clockwise about `normal`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneBasis {
    pub normal: Vec3,
    pub reference: Vec3,
}

impl PlaneBasis {
    /// Builds a basis with the given normal; the reference is the projection
    /// of `reference` (default `x̂`, falling back to `ŷ`) onto the plane.
    pub fn new(normal: Vec3, reference: Option<Vec3>) -> Result<Self, ModelError> {
        let n = normal.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(ModelError::ZeroAngularMomentum);
        }
        let normal = normal / n;
        let project = |v: Vec3| {
            let w = v - normal * normal.dot(&v);
            let wn = w.norm();
            (wn > 1e-8 * v.norm()).then(|| w / wn)
        };
        let reference = match reference {
            Some(v) => project(v),
            None => project(Vec3::x()).or_else(|| project(Vec3::y())),
        }
        .ok_or_else(|| ModelError::InvalidParameter("reference direction parallel to ℓ".into()))?;
        Ok(Self { normal, reference })
    }

    /// `ℓ̂ × û_ref`
    pub fn binormal(&self) -> Vec3 {
        self.normal.cross(&self.reference)
    }

    /// Azimuth of `v` in `(-π, π]`.
    pub fn azimuth(&self, v: &Vec3) -> f64 {
        v.dot(&self.binormal()).atan2(v.dot(&self.reference))
    }

    /// In-plane unit vector at azimuth `theta`.
    pub fn direction(&self, theta: f64) -> Vec3 {
        self.reference * theta.cos() + self.binormal() * theta.sin()
    }
}

/// Rotation by `angle` about `axis` (unit) applied to a vector perpendicular
/// to it: `cos α v + sin α axis × v`.
pub fn rotate_in_plane(axis: &Vec3, angle: f64, v: &Vec3) -> Vec3 {
    v * angle.cos() + axis.cross(v) * angle.sin()
}

/// Polar coordinates of a Cartesian state using the orbital `ℓ = r × p`.
pub fn to_polar(
    s: &PhaseState,
    reference: Option<Vec3>,
) -> Result<(PolarState, PlaneBasis), ModelError> {
    let ell = s.orbital_angular_momentum();
    if ell.norm() <= 1e-300 {
        return Err(ModelError::ZeroAngularMomentum);
    }
    let basis = PlaneBasis::new(ell, reference)?;
    let polar = PolarState {
        r: s.radius(),
        theta: basis.azimuth(&s.r),
        p_r: s.radial_momentum(),
        p_theta: ell.norm(),
    };
    Ok((polar, basis))
}

/// Inverse of [`to_polar`].
pub fn from_polar(s: &PolarState, basis: &PlaneBasis, t: f64) -> PhaseState {
    let rhat = basis.direction(s.theta);
    let that = basis.normal.cross(&rhat);
    PhaseState {
        r: rhat * s.r,
        p: rhat * s.p_r + that * (s.p_theta / s.r),
        t,
    }
}

/// `(U, U', U'')` at a radius; `d2u` is `None` when it is not available.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PotentialTriple {
    pub u: f64,
    pub du: f64,
    pub d2u: Option<f64>,
}

/// Partial derivatives of `H(r, p_r, ℓ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gradients {
    pub d_r: f64,
    pub d_pr: f64,
    pub d_ell: f64,
}

/// `H` and its partials with respect to `(r, p_r, ℓ²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct SquaredPartials {
    pub h: f64,
    pub d_r: f64,
    pub d_pr: f64,
    pub d_l2: f64,
}

/// One term `coeff · r^power` of a power-sum potential.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerTerm {
    pub coeff: f64,
    pub power: f64,
}

pub type RadialFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Potential of a [`CustomCentral`] model.
#[derive(Clone)]
pub enum Potential {
    /// `U(r) = Σ cₖ r^nₖ` with analytic derivatives.
    PowerSum(Vec<PowerTerm>),
    /// Arbitrary potential; missing derivatives are taken by central differences.
    Closure {
        u: RadialFn,
        du: Option<RadialFn>,
        d2u: Option<RadialFn>,
        /// Relative step for `U'`; `U''` uses the square root of it.
        fd_step: f64,
    },
}

impl fmt::Debug for Potential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Potential::PowerSum(t) => f.debug_tuple("PowerSum").field(t).finish(),
            Potential::Closure {
                du, d2u, fd_step, ..
            } => f
                .debug_struct("Closure")
                .field("du", &du.is_some())
                .field("d2u", &d2u.is_some())
                .field("fd_step", fd_step)
                .finish(),
        }
    }
}

impl Potential {
    pub const DEFAULT_FD_STEP: f64 = 1e-6;

    pub fn power_sum(terms: &[(f64, f64)]) -> Self {
        Potential::PowerSum(
            terms
                .iter()
                .map(|&(coeff, power)| PowerTerm { coeff, power })
                .collect(),
        )
    }

    pub fn closure(u: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Potential::Closure {
            u: Arc::new(u),
            du: None,
            d2u: None,
            fd_step: Self::DEFAULT_FD_STEP,
        }
    }

    pub fn evaluate(&self, r: f64) -> Result<PotentialTriple, ModelError> {
        if r.is_nan() || r <= 0.0 {
            return Err(ModelError::NonPositiveRadius(r));
        }
        match self {
            Potential::PowerSum(terms) => {
                let (mut u, mut du, mut d2u) = (0.0, 0.0, 0.0);
                for t in terms {
                    let rn = r.powf(t.power);
                    u += t.coeff * rn;
                    du += t.coeff * t.power * rn / r;
                    d2u += t.coeff * t.power * (t.power - 1.0) * rn / (r * r);
                }
                Ok(PotentialTriple {
                    u,
                    du,
                    d2u: Some(d2u),
                })
            }
            Potential::Closure {
                u,
                du,
                d2u,
                fd_step,
            } => {
                let u0 = u(r);
                let scale = r.abs().max(1.0);
                let du_val = match du {
                    Some(g) => g(r),
                    None => {
                        let h = fd_step * scale;
                        (u(r + h) - u(r - h)) / (2.0 * h)
                    }
                };
                let d2u_val = match d2u {
                    Some(g) => g(r),
                    None => match du {
                        Some(g) => {
                            let h = fd_step * scale;
                            (g(r + h) - g(r - h)) / (2.0 * h)
                        }
                        None => {
                            let h = fd_step.sqrt() * 0.1 * scale;
                            (u(r + h) - 2.0 * u0 + u(r - h)) / (h * h)
                        }
                    },
                };
                if !(u0.is_finite() && du_val.is_finite()) {
                    return Err(ModelError::DerivativeUnavailable(r));
                }
                Ok(PotentialTriple {
                    u: u0,
                    du: du_val,
                    d2u: d2u_val.is_finite().then_some(d2u_val),
                })
            }
        }
    }
}

/// Newtonian reduced-mass particle in an arbitrary central potential.
#[derive(Debug, Clone)]
pub struct CustomCentral {
    pub mu: f64,
    pub potential: Potential,
}

/// Post-Newtonian two-body system (Darwin for `alpha = 0`, EIH for `alpha = 3 M₀/μ`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PostNewtonian {
    m1: f64,
    m2: f64,
    kappa: f64,
    alpha: f64,
    c: f64,
}

impl PostNewtonian {
    /// Electromagnetic interaction, `κ = e₁e₂`.
    pub fn electromagnetic(m1: f64, m2: f64, kappa: f64, c: f64) -> Result<Self, ModelError> {
        Self::raw(m1, m2, kappa, 0.0, c)
    }

    /// Gravitational interaction with `α = 3M₀/μ`; physically `κ = −G m₁ m₂`.
    pub fn gravitational(m1: f64, m2: f64, kappa: f64, c: f64) -> Result<Self, ModelError> {
        let total = m1 + m2;
        Self::raw(m1, m2, kappa, 3.0 * total * total / (m1 * m2), c)
    }

    /// Arbitrary interaction switch `alpha`.
    pub fn raw(m1: f64, m2: f64, kappa: f64, alpha: f64, c: f64) -> Result<Self, ModelError> {
        let pn = Self {
            m1,
            m2,
            kappa,
            alpha,
            c,
        };
        check_positive("m1", m1)?;
        check_positive("m2", m2)?;
        check_positive("c", c)?;
        check_finite("kappa", kappa)?;
        check_finite("alpha", alpha)?;
        Ok(pn)
    }

    pub fn m1(&self) -> f64 {
        self.m1
    }
    pub fn m2(&self) -> f64 {
        self.m2
    }
    pub fn kappa(&self) -> f64 {
        self.kappa
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn c(&self) -> f64 {
        self.c
    }
    pub fn total_mass(&self) -> f64 {
        self.m1 + self.m2
    }
    pub fn reduced_mass(&self) -> f64 {
        self.m1 * self.m2 / (self.m1 + self.m2)
    }
    /// `1/ν³ = 1/m₁³ + 1/m₂³`
    pub fn inv_nu3(&self) -> f64 {
        self.m1.powi(-3) + self.m2.powi(-3)
    }

    /// Same system with a different speed of light.
    pub fn with_c(&self, c: f64) -> Result<Self, ModelError> {
        Self::raw(self.m1, self.m2, self.kappa, self.alpha, c)
    }
}

fn check_positive(name: &str, v: f64) -> Result<(), ModelError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

fn check_finite(name: &str, v: f64) -> Result<(), ModelError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidParameter(format!(
            "{name} must be finite, got {v}"
        )))
    }
}

/// The Hamiltonian systems supported by the crate.
#[derive(Debug, Clone)]
pub enum CentralModel {
    KeplerCoulomb {
        mu: f64,
        kappa: f64,
    },
    Micz {
        m: f64,
        kappa: f64,
        alpha_monopole: f64,
    },
    /// `H = √(p² + m²) + κ/r` in units with `c = 1`.
    RelCoulomb {
        m: f64,
        kappa: f64,
    },
    PostNewtonian(PostNewtonian),
    Custom(CustomCentral),
}

impl CentralModel {
    pub fn kepler(mu: f64, kappa: f64) -> Result<Self, ModelError> {
        check_positive("mu", mu)?;
        check_finite("kappa", kappa)?;
        Ok(Self::KeplerCoulomb { mu, kappa })
    }

    pub fn micz(m: f64, kappa: f64, alpha_monopole: f64) -> Result<Self, ModelError> {
        check_positive("m", m)?;
        check_finite("kappa", kappa)?;
        check_finite("alpha_monopole", alpha_monopole)?;
        Ok(Self::Micz {
            m,
            kappa,
            alpha_monopole,
        })
    }

    pub fn rel_coulomb(m: f64, kappa: f64) -> Result<Self, ModelError> {
        check_positive("m", m)?;
        check_finite("kappa", kappa)?;
        Ok(Self::RelCoulomb { m, kappa })
    }

    pub fn custom(mu: f64, potential: Potential) -> Result<Self, ModelError> {
        check_positive("mu", mu)?;
        Ok(Self::Custom(CustomCentral { mu, potential }))
    }

    /// `U = Σ coeff · r^power`
    pub fn power_sum(mu: f64, terms: &[(f64, f64)]) -> Result<Self, ModelError> {
        Self::custom(mu, Potential::power_sum(terms))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::KeplerCoulomb { .. } => "kepler",
            Self::Micz { .. } => "micz",
            Self::RelCoulomb { .. } => "relcoulomb",
            Self::PostNewtonian(_) => "pn",
            Self::Custom(_) => "custom",
        }
    }

    /// Mass entering the kinetic term (`μ`, `m`, or the PN reduced mass).
    pub fn mass(&self) -> f64 {
        match self {
            Self::KeplerCoulomb { mu, .. } => *mu,
            Self::Micz { m, .. } | Self::RelCoulomb { m, .. } => *m,
            Self::PostNewtonian(pn) => pn.reduced_mass(),
            Self::Custom(c) => c.mu,
        }
    }

    /// True for `H = p²/2μ + U(r)` in canonical variables.
    pub fn is_newtonian(&self) -> bool {
        matches!(self, Self::KeplerCoulomb { .. } | Self::Custom(_))
    }

    /// `(U, U', U'')` for models that split into kinetic energy plus potential.
    pub fn potential(&self, r: f64) -> Result<PotentialTriple, ModelError> {
        if r.is_nan() || r <= 0.0 {
            return Err(ModelError::NonPositiveRadius(r));
        }
        match self {
            Self::KeplerCoulomb { kappa, .. } => Ok(PotentialTriple {
                u: kappa / r,
                du: -kappa / (r * r),
                d2u: Some(2.0 * kappa / (r * r * r)),
            }),
            Self::Micz {
                m,
                kappa,
                alpha_monopole: a,
            } => Ok(PotentialTriple {
                u: kappa / r + a * a / (2.0 * m * r * r),
                du: -kappa / (r * r) - a * a / (m * r * r * r),
                d2u: Some(2.0 * kappa / (r * r * r) + 3.0 * a * a / (m * r.powi(4))),
            }),
            Self::Custom(c) => c.potential.evaluate(r),
            Self::RelCoulomb { .. } => Err(ModelError::NoPotentialDecomposition("relcoulomb")),
            Self::PostNewtonian(_) => Err(ModelError::NoPotentialDecomposition("pn")),
        }
    }

    /// `H` and partials in `(r, p_r, ℓ²)`.
    pub(crate) fn squared_partials(
        &self,
        r: f64,
        pr: f64,
        l2: f64,
    ) -> Result<SquaredPartials, ModelError> {
        if r.is_nan() || r <= 0.0 {
            return Err(ModelError::NonPositiveRadius(r));
        }
        let r2 = r * r;
        let r3 = r2 * r;
        let out = match self {
            Self::KeplerCoulomb { mu, kappa } => SquaredPartials {
                h: (pr * pr + l2 / r2) / (2.0 * mu) + kappa / r,
                d_r: -l2 / (mu * r3) - kappa / r2,
                d_pr: pr / mu,
                d_l2: 1.0 / (2.0 * mu * r2),
            },
            Self::Micz {
                m,
                alpha_monopole: a,
                ..
            } => {
                let pot = self.potential(r)?;
                let orb = l2 - a * a;
                SquaredPartials {
                    h: (pr * pr + orb / r2) / (2.0 * m) + pot.u,
                    d_r: -orb / (m * r3) + pot.du,
                    d_pr: pr / m,
                    d_l2: 1.0 / (2.0 * m * r2),
                }
            }
            Self::Custom(c) => {
                let pot = c.potential.evaluate(r)?;
                SquaredPartials {
                    h: (pr * pr + l2 / r2) / (2.0 * c.mu) + pot.u,
                    d_r: -l2 / (c.mu * r3) + pot.du,
                    d_pr: pr / c.mu,
                    d_l2: 1.0 / (2.0 * c.mu * r2),
                }
            }
            Self::RelCoulomb { m, kappa } => {
                let s = (pr * pr + l2 / r2 + m * m).sqrt();
                SquaredPartials {
                    h: s + kappa / r,
                    d_r: -l2 / (r3 * s) - kappa / r2,
                    d_pr: pr / s,
                    d_l2: 1.0 / (2.0 * r2 * s),
                }
            }
            Self::PostNewtonian(pn) => {
                let mu = pn.reduced_mass();
                let c2 = pn.c * pn.c;
                let inv = pn.inv_nu3();
                let (kappa, alpha) = (pn.kappa, pn.alpha);
                let k2 = kappa / (2.0 * pn.m1 * pn.m2 * c2);
                let m0 = pn.total_mass();
                let p2 = pr * pr + l2 / r2;
                let h = p2 / (2.0 * mu) - p2 * p2 * inv / (8.0 * c2)
                    + kappa / r
                    + k2 / r * ((2.0 + alpha) * pr * pr + (1.0 + alpha) * l2 / r2)
                    + alpha * kappa * kappa / (6.0 * m0 * c2 * r2);
                let d_r = -l2 / (mu * r3) + inv * p2 * l2 / (2.0 * c2 * r3)
                    - kappa / r2
                    - k2 * ((2.0 + alpha) * pr * pr / r2 + 3.0 * (1.0 + alpha) * l2 / (r2 * r2))
                    - alpha * kappa * kappa / (3.0 * m0 * c2 * r3);
                let d_pr = pr / mu - p2 * pr * inv / (2.0 * c2) + 2.0 * k2 * (2.0 + alpha) * pr / r;
                let d_l2 =
                    1.0 / (2.0 * mu * r2) - p2 * inv / (4.0 * c2 * r2) + k2 * (1.0 + alpha) / r3;
                SquaredPartials { h, d_r, d_pr, d_l2 }
            }
        };
        Ok(out)
    }

    /// `p_r²` on the energy shell `H(r, p_r, ℓ) = E`. Negative values mark the
    /// classically forbidden region.
    pub fn radial_momentum_squared(&self, energy: f64, r: f64, l2: f64) -> Result<f64, ModelError> {
        if r.is_nan() || r <= 0.0 {
            return Err(ModelError::NonPositiveRadius(r));
        }
        let r2 = r * r;
        Ok(match self {
            Self::KeplerCoulomb { mu, kappa } => 2.0 * mu * (energy - kappa / r) - l2 / r2,
            Self::Micz {
                m,
                alpha_monopole: a,
                ..
            } => 2.0 * m * (energy - self.potential(r)?.u) - (l2 - a * a) / r2,
            Self::Custom(c) => 2.0 * c.mu * (energy - c.potential.evaluate(r)?.u) - l2 / r2,
            Self::RelCoulomb { m, kappa } => (energy - kappa / r).powi(2) - m * m - l2 / r2,
            Self::PostNewtonian(pn) => {
                // H is quadratic in q = p_r²: a₂q² + a₁q + a₀ = E; take the root
                // continuous with the Newtonian one.
                let mu = pn.reduced_mass();
                let c2 = pn.c * pn.c;
                let inv = pn.inv_nu3();
                let k2 = pn.kappa / (2.0 * pn.m1 * pn.m2 * c2);
                let lr = l2 / r2;
                let a2 = -inv / (8.0 * c2);
                let a1 = 1.0 / (2.0 * mu) - inv * lr / (4.0 * c2) + k2 * (2.0 + pn.alpha) / r;
                let a0 = lr / (2.0 * mu) - inv * lr * lr / (8.0 * c2)
                    + pn.kappa / r
                    + k2 * (1.0 + pn.alpha) * lr / r
                    + pn.alpha * pn.kappa * pn.kappa / (6.0 * pn.total_mass() * c2 * r2);
                let rhs = energy - a0;
                let disc = a1 * a1 + 4.0 * a2 * rhs;
                if disc < 0.0 {
                    return Ok(f64::NEG_INFINITY);
                }
                2.0 * rhs / (a1 + disc.sqrt())
            }
        })
    }

    /// `(∂H/∂p_r)/p_r`, regular at `p_r = 0`.
    pub fn radial_velocity_factor(&self, r: f64, pr: f64, l2: f64) -> Result<f64, ModelError> {
        if r.is_nan() || r <= 0.0 {
            return Err(ModelError::NonPositiveRadius(r));
        }
        Ok(match self {
            Self::KeplerCoulomb { mu, .. } => 1.0 / mu,
            Self::Micz { m, .. } => 1.0 / m,
            Self::Custom(c) => 1.0 / c.mu,
            Self::RelCoulomb { m, .. } => 1.0 / (pr * pr + l2 / (r * r) + m * m).sqrt(),
            Self::PostNewtonian(pn) => {
                let c2 = pn.c * pn.c;
                let k2 = pn.kappa / (2.0 * pn.m1 * pn.m2 * c2);
                let p2 = pr * pr + l2 / (r * r);
                1.0 / pn.reduced_mass() - p2 * pn.inv_nu3() / (2.0 * c2)
                    + 2.0 * k2 * (2.0 + pn.alpha) / r
            }
        })
    }

    /// `dθ/dr = (∂H/∂ℓ)/(∂H/∂p_r)` times `p_r`, i.e. `2ℓ H_{ℓ²} / (H_{p_r}/p_r)`.
    pub(crate) fn angular_rate_times_pr(
        &self,
        r: f64,
        pr: f64,
        l2: f64,
    ) -> Result<f64, ModelError> {
        let sp = self.squared_partials(r, pr, l2)?;
        Ok(2.0 * l2.sqrt() * sp.d_l2 / self.radial_velocity_factor(r, pr, l2)?)
    }

    /// `H(r, p_r, p_θ)`.
    pub fn hamiltonian(&self, s: &PolarState) -> Result<f64, ModelError> {
        Ok(self.squared_partials(s.r, s.p_r, s.p_theta * s.p_theta)?.h)
    }

    /// `(∂H/∂r, ∂H/∂p_r, ∂H/∂ℓ)`.
    pub fn gradients(&self, s: &PolarState) -> Result<Gradients, ModelError> {
        let sp = self.squared_partials(s.r, s.p_r, s.p_theta * s.p_theta)?;
        if !(sp.d_r.is_finite() && sp.d_pr.is_finite() && sp.d_l2.is_finite()) {
            return Err(ModelError::DerivativeUnavailable(s.r));
        }
        Ok(Gradients {
            d_r: sp.d_r,
            d_pr: sp.d_pr,
            d_ell: 2.0 * s.p_theta * sp.d_l2,
        })
    }

    /// Conserved internal angular momentum of a phase point.
    pub fn angular_momentum(&self, s: &PhaseState) -> Vec3 {
        let orbital = s.orbital_angular_momentum();
        match self {
            Self::Micz { alpha_monopole, .. } => orbital - s.r * (*alpha_monopole / s.radius()),
            _ => orbital,
        }
    }

    /// Conserved energy of a phase point.
    pub fn energy(&self, s: &PhaseState) -> Result<f64, ModelError> {
        let r = s.radius();
        let pr = s.radial_momentum();
        let l2 = self.angular_momentum(s).norm_squared();
        Ok(self.squared_partials(r, pr, l2)?.h)
    }

    /// Polar coordinates using the model's conserved angular momentum.
    pub fn polar_state(&self, s: &PhaseState, basis: &PlaneBasis) -> PolarState {
        PolarState {
            r: s.radius(),
            theta: basis.azimuth(&s.r),
            p_r: s.radial_momentum(),
            p_theta: self.angular_momentum(s).norm(),
        }
    }

    /// Basis whose normal is the conserved `ℓ̂` of `s`.
    pub fn plane_basis(
        &self,
        s: &PhaseState,
        reference: Option<Vec3>,
    ) -> Result<PlaneBasis, ModelError> {
        PlaneBasis::new(self.angular_momentum(s), reference)
    }

    /// Hamilton's equations `(dr/dt, dp/dt)` in Cartesian variables.
    pub fn phase_velocity(&self, s: &PhaseState) -> Result<(Vec3, Vec3), ModelError> {
        let r = s.radius();
        if let Self::Micz {
            m, alpha_monopole, ..
        } = self
        {
            let pot = self.potential(r)?;
            let v = s.p / *m;
            let force = v.cross(&s.r) * (alpha_monopole / (r * r * r)) - s.r * (pot.du / r);
            return Ok((v, force));
        }
        let rhat = s.r / r;
        let rp = s.r.dot(&s.p);
        let pr = rp / r;
        let p2 = s.p.norm_squared();
        let l2 = (r * r * p2 - rp * rp).max(0.0);
        let sp = self.squared_partials(r, pr, l2)?;
        let dl2_dp = (s.p * (r * r) - s.r * rp) * 2.0;
        let dl2_dr = (s.r * p2 - s.p * rp) * 2.0;
        let dpr_dr = (s.p - rhat * pr) / r;
        let rdot = rhat * sp.d_pr + dl2_dp * sp.d_l2;
        let pdot = -(rhat * sp.d_r + dpr_dr * sp.d_pr + dl2_dr * sp.d_l2);
        Ok((rdot, pdot))
    }

    /// `[rU(r)]''` for the W-route accumulation; `None` when the model has no
    /// Newtonian potential with a second derivative.
    pub fn w_kernel(&self, r: f64) -> Option<f64> {
        match self {
            Self::KeplerCoulomb { .. } => Some(0.0),
            Self::Custom(c) => {
                let p = c.potential.evaluate(r).ok()?;
                Some(2.0 * p.du + r * p.d2u?)
            }
            _ => None,
        }
    }

    /// A natural length scale for the orbit with angular momentum `ell`.
    pub fn length_scale(&self, ell: f64) -> f64 {
        let mass = self.mass();
        let kappa = match self {
            Self::KeplerCoulomb { kappa, .. }
            | Self::Micz { kappa, .. }
            | Self::RelCoulomb { kappa, .. } => *kappa,
            Self::PostNewtonian(pn) => pn.kappa,
            Self::Custom(_) => 0.0,
        };
        if kappa != 0.0 && ell > 0.0 {
            ell * ell / (mass * kappa.abs())
        } else {
            1.0
        }
    }
}

/// JSON-facing model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "lowercase", deny_unknown_fields)]
pub enum ModelSpec {
    Kepler {
        mu: f64,
        kappa: f64,
    },
    Micz {
        m: f64,
        kappa: f64,
        alpha: f64,
    },
    Relcoulomb {
        m: f64,
        kappa: f64,
    },
    Pn {
        m1: f64,
        m2: f64,
        kappa: f64,
        c: f64,
        interaction: PnInteraction,
        /// Only honoured with `interaction = "raw"`.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        alpha: Option<f64>,
    },
    Power {
        mu: f64,
        terms: Vec<PowerTerm>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PnInteraction {
    Electromagnetic,
    Gravitational,
    Raw,
}

impl TryFrom<&ModelSpec> for CentralModel {
    type Error = ModelError;

    fn try_from(spec: &ModelSpec) -> Result<Self, Self::Error> {
        match spec {
            ModelSpec::Kepler { mu, kappa } => CentralModel::kepler(*mu, *kappa),
            ModelSpec::Micz { m, kappa, alpha } => CentralModel::micz(*m, *kappa, *alpha),
            ModelSpec::Relcoulomb { m, kappa } => CentralModel::rel_coulomb(*m, *kappa),
            ModelSpec::Pn {
                m1,
                m2,
                kappa,
                c,
                interaction,
                alpha,
            } => {
                let pn = match (interaction, alpha) {
                    (PnInteraction::Electromagnetic, None) => {
                        PostNewtonian::electromagnetic(*m1, *m2, *kappa, *c)
                    }
                    (PnInteraction::Gravitational, None) => {
                        PostNewtonian::gravitational(*m1, *m2, *kappa, *c)
                    }
                    (PnInteraction::Raw, Some(a)) => PostNewtonian::raw(*m1, *m2, *kappa, *a, *c),
                    (PnInteraction::Raw, None) => {
                        return Err(ModelError::InvalidParameter(
                            "raw interaction requires alpha".into(),
                        ))
                    }
                    (_, Some(_)) => {
                        return Err(ModelError::InvalidParameter(
                            "alpha is only accepted with interaction \"raw\"".into(),
                        ))
                    }
                }?;
                Ok(CentralModel::PostNewtonian(pn))
            }
            ModelSpec::Power { mu, terms } => {
                if terms
                    .iter()
                    .any(|t| !(t.coeff.is_finite() && t.power.is_finite()))
                {
                    return Err(ModelError::InvalidParameter(
                        "power terms must be finite".into(),
                    ));
                }
                CentralModel::custom(*mu, Potential::PowerSum(terms.clone()))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn polar(r: f64, p_r: f64, p_theta: f64) -> PolarState {
        PolarState::new(r, 0.0, p_r, p_theta)
    }

    fn builtin_models() -> Vec<CentralModel> {
        vec![
            CentralModel::kepler(1.3, -0.7).unwrap(),
            CentralModel::micz(0.9, -1.1, 0.4).unwrap(),
            CentralModel::rel_coulomb(1.0, -0.3).unwrap(),
            CentralModel::PostNewtonian(
                PostNewtonian::gravitational(1.5, 0.7, -1.0, 20.0).unwrap(),
            ),
            CentralModel::PostNewtonian(
                PostNewtonian::electromagnetic(1.5, 0.7, -1.0, 20.0).unwrap(),
            ),
            CentralModel::power_sum(1.0, &[(1.0, 4.0), (-0.5, -1.0)]).unwrap(),
        ]
    }

    #[test]
    fn kepler_energy_by_substitution() {
        let m = CentralModel::kepler(1.0, -1.0).unwrap();
        assert_eq!(m.hamiltonian(&polar(1.0, 0.0, 1.0)).unwrap(), -0.5);
    }

    #[test]
    fn rel_coulomb_energy() {
        let m = CentralModel::rel_coulomb(1.0, -0.2).unwrap();
        let e = m.hamiltonian(&polar(1.0, 0.0, 0.4)).unwrap();
        // sqrt(1.16) - 0.2
        assert!((e - 0.877_032_961_426_900_8).abs() < 1e-15, "{e}");
    }

    #[test]
    fn kepler_radial_gradient() {
        let m = CentralModel::kepler(1.0, -1.0).unwrap();
        let g = m.gradients(&polar(2.0, 0.1, 1.0)).unwrap();
        assert!((g.d_r - 0.125).abs() < 1e-15);
        assert!((g.d_pr - 0.1).abs() < 1e-15);
    }

    #[test]
    fn radial_velocity_vanishes_at_zero_pr() {
        for m in builtin_models() {
            let g = m.gradients(&polar(1.7, 0.0, 0.8)).unwrap();
            assert_eq!(g.d_pr, 0.0, "{}", m.name());
        }
    }

    #[test]
    fn potential_triples() {
        let micz = CentralModel::micz(1.0, 1.0, 0.5).unwrap();
        assert!((micz.potential(2.0).unwrap().u - 0.53125).abs() < 1e-15);

        let k = CentralModel::kepler(1.0, -1.0).unwrap();
        let t = k.potential(1.0).unwrap();
        assert_eq!((t.u, t.du, t.d2u), (-1.0, 1.0, Some(-2.0)));

        let quad = CentralModel::power_sum(1.0, &[(1.0, 2.0)]).unwrap();
        let t = quad.potential(3.0).unwrap();
        assert_eq!((t.u, t.du, t.d2u), (9.0, 6.0, Some(2.0)));

        let closure = CentralModel::custom(1.0, Potential::closure(|r| r * r)).unwrap();
        let t = closure.potential(3.0).unwrap();
        assert!((t.u - 9.0).abs() < 1e-12);
        assert!((t.du - 6.0).abs() < 1e-7);
        assert!((t.d2u.unwrap() - 2.0).abs() < 1e-5);
    }

    #[test]
    fn relativistic_models_have_no_potential() {
        assert_eq!(
            CentralModel::rel_coulomb(1.0, -0.2).unwrap().potential(1.0),
            Err(ModelError::NoPotentialDecomposition("relcoulomb"))
        );
        assert!(matches!(
            CentralModel::kepler(1.0, -1.0)
                .unwrap()
                .hamiltonian(&polar(0.0, 0.0, 1.0)),
            Err(ModelError::NonPositiveRadius(_))
        ));
    }

    #[test]
    fn to_polar_examples() {
        let s = PhaseState::from_slice([1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        let (p, b) = to_polar(&s, None).unwrap();
        assert_eq!((p.r, p.p_r, p.p_theta), (1.0, 0.0, 1.0));
        assert_eq!(b.normal, Vec3::z());

        let s = PhaseState::from_slice([0.0, 2.0, 0.0, 0.3, 0.4, 0.0]).unwrap();
        let (p, _) = to_polar(&s, None).unwrap();
        assert!((p.p_r - 0.4).abs() < 1e-15);
        assert!((p.p_theta - 0.6).abs() < 1e-15);

        let head_on = PhaseState::from_slice([1.0, 0.0, 0.0, -1.0, 0.0, 0.0]).unwrap();
        assert_eq!(
            to_polar(&head_on, None).unwrap_err(),
            ModelError::ZeroAngularMomentum
        );
    }

    #[test]
    fn pn_presets() {
        let g = PostNewtonian::gravitational(1.0, 3.0, -1.0, 10.0).unwrap();
        assert!((g.alpha() - 3.0 * 16.0 / 3.0).abs() < 1e-14);
        assert_eq!(
            PostNewtonian::electromagnetic(1.0, 3.0, -1.0, 10.0)
                .unwrap()
                .alpha(),
            0.0
        );
        assert!(PostNewtonian::raw(1.0, 3.0, -1.0, 0.0, 0.0).is_err());
        // 1/ν³ = 1/μ³ − 3/(M₀ μ²)
        let mu = g.reduced_mass();
        assert!((g.inv_nu3() - (mu.powi(-3) - 3.0 / (g.total_mass() * mu * mu))).abs() < 1e-12);
    }

    #[test]
    fn model_spec_json() {
        let spec: ModelSpec =
            serde_json::from_str(r#"{"model":"kepler","mu":1.0,"kappa":-1.0}"#).unwrap();
        assert_eq!(
            spec,
            ModelSpec::Kepler {
                mu: 1.0,
                kappa: -1.0
            }
        );
        assert!(serde_json::from_str::<ModelSpec>(
            r#"{"model":"kepler","mu":1.0,"kappa":-1.0,"x":1}"#
        )
        .is_err());

        let pn: ModelSpec = serde_json::from_str(
            r#"{"model":"pn","m1":1,"m2":2,"kappa":-1,"c":100,"interaction":"gravitational"}"#,
        )
        .unwrap();
        assert!(matches!(
            CentralModel::try_from(&pn),
            Ok(CentralModel::PostNewtonian(_))
        ));

        let bad: ModelSpec = serde_json::from_str(
            r#"{"model":"pn","m1":1,"m2":2,"kappa":-1,"c":100,"interaction":"raw"}"#,
        )
        .unwrap();
        assert!(CentralModel::try_from(&bad).is_err());
    }

    #[test]
    fn pn_newtonian_limit_scales_as_inverse_c_squared() {
        let kepler = CentralModel::kepler(2.0 * 3.0 / 5.0, -1.0).unwrap();
        let states = [
            polar(1.0, 0.2, 0.9),
            polar(2.5, -0.4, 1.3),
            polar(0.7, 0.0, 0.6),
        ];
        let mut previous: Option<f64> = None;
        for c in [50.0, 100.0, 200.0, 400.0] {
            let pn = CentralModel::PostNewtonian(
                PostNewtonian::gravitational(2.0, 3.0, -1.0, c).unwrap(),
            );
            let worst = states
                .iter()
                .map(|s| {
                    (pn.hamiltonian(s).unwrap() - kepler.hamiltonian(s).unwrap()).abs() * c * c
                })
                .fold(0.0, f64::max);
            if let Some(prev) = previous {
                assert!(
                    (worst / prev - 1.0).abs() < 1e-3,
                    "C drifted: {prev} -> {worst}"
                );
            }
            previous = Some(worst);
        }
    }

    fn fd_gradients(m: &CentralModel, s: &PolarState) -> (f64, f64, f64) {
        let d = |f: &dyn Fn(f64) -> f64, x: f64| {
            let h = 1e-5 * x.abs().max(1.0);
            (f(x + h) - f(x - h)) / (2.0 * h)
        };
        let h = |r: f64, pr: f64, l: f64| m.hamiltonian(&polar(r, pr, l)).unwrap();
        (
            d(&|x| h(x, s.p_r, s.p_theta), s.r),
            d(&|x| h(s.r, x, s.p_theta), s.p_r),
            d(&|x| h(s.r, s.p_r, x), s.p_theta),
        )
    }

    proptest! {
        #[test]
        fn hamiltonians_are_even(r in 0.3f64..5.0, pr in -2.0f64..2.0, l in 0.1f64..2.0) {
            for m in builtin_models() {
                let h = m.hamiltonian(&polar(r, pr, l)).unwrap();
                prop_assert_eq!(h, m.hamiltonian(&polar(r, -pr, l)).unwrap());
                prop_assert_eq!(h, m.hamiltonian(&polar(r, pr, -l)).unwrap());
            }
        }

        #[test]
        fn gradients_match_finite_differences(r in 0.5f64..4.0, pr in -1.5f64..1.5, l in 0.3f64..2.0) {
            for m in builtin_models() {
                let s = polar(r, pr, l);
                let g = m.gradients(&s).unwrap();
                let (dr, dpr, dl) = fd_gradients(&m, &s);
                for (a, b) in [(g.d_r, dr), (g.d_pr, dpr), (g.d_ell, dl)] {
                    prop_assert!((a - b).abs() <= 1e-7 * b.abs().max(1.0), "{} {} vs {}", m.name(), a, b);
                }
            }
        }

        #[test]
        fn polar_round_trip(x in -3.0f64..3.0, y in -3.0f64..3.0, z in -3.0f64..3.0,
                            px in -2.0f64..2.0, py in -2.0f64..2.0, pz in -2.0f64..2.0) {
            let r = Vec3::new(x, y, z);
            let p = Vec3::new(px, py, pz);
            prop_assume!(r.norm() > 0.1 && r.cross(&p).norm() > 1e-3);
            let s = PhaseState::new(r, p, 0.0).unwrap();
            let (pol, basis) = to_polar(&s, None).unwrap();
            let back = from_polar(&pol, &basis, 0.0);
            prop_assert!((back.r - r).norm() < 1e-12 * r.norm().max(1.0));
            prop_assert!((back.p - p).norm() < 1e-12 * p.norm().max(1.0));
        }
    }

    #[test]
    fn energy_shell_momentum_inverts_hamiltonian() {
        for m in builtin_models() {
            for (r, pr, l) in [(1.3, 0.4, 0.9), (0.8, -0.2, 1.4), (2.2, 0.05, 0.3)] {
                let e = m.hamiltonian(&polar(r, pr, l)).unwrap();
                let q = m.radial_momentum_squared(e, r, l * l).unwrap();
                assert!(
                    (q - pr * pr).abs() < 1e-12,
                    "{}: {q} vs {}",
                    m.name(),
                    pr * pr
                );
                let g = m.gradients(&polar(r, pr, l)).unwrap();
                let factor = m.radial_velocity_factor(r, pr, l * l).unwrap();
                assert!((g.d_pr - factor * pr).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn cartesian_equations_match_kepler_force() {
        let m = CentralModel::kepler(2.0, -3.0).unwrap();
        let s = PhaseState::from_slice([1.0, 0.5, -0.2, 0.3, 0.9, 0.1]).unwrap();
        let (rdot, pdot) = m.phase_velocity(&s).unwrap();
        assert!((rdot - s.p / 2.0).norm() < 1e-14);
        let r = s.radius();
        let expected = s.r * (-3.0 / r.powi(3)); // −∇(κ/r) = κ r/r³
        assert!((pdot - expected).norm() < 1e-13);
    }
}
