//! The `o(4)` / `o(3,1)` structure of `(A⃗, ℓ⃗)`.
//!
//! Rescaling `K⃗` by `1/√|c|` gives `{Aⁱ, Aʲ} = η εⁱʲᵏ ℓᵏ` with `η = ±1`. Finite
//! transformations generated by `n⃗ · A⃗` mix `ℓ⃗` and `A⃗` while keeping both
//! Casimirs `η A² + ℓ²` and `A⃗ · ℓ⃗`; at fixed energy they connect orbits of
//! different angular momentum.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lrl::{closest_approach, self_pb_coefficient, LrlError, LrlResult};
use crate::models::{CentralModel, PhaseState, Vec3};
use crate::numerics::{brent_minimize, brent_root};

#[derive(Debug, Clone, Error)]
pub enum AlgebraError {
    #[error("self-bracket coefficient vanishes")]
    ZeroCoefficient,
    #[error("no bound states at E = {0}")]
    NoBoundStates(f64),
    #[error("transformation axis is not a unit vector (|n| = {0})")]
    NonUnitDirection(f64),
    #[error("no orbit with l = {ell} at E = {energy}")]
    UnreachableAngularMomentum { energy: f64, ell: f64 },
    #[error("model `{0}` is not supported")]
    ModelUnsupported(&'static str),
    #[error(transparent)]
    Lrl(#[from] LrlError),
}

/// Canonical LRL vector with its angular momentum and Casimirs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalPair {
    #[serde(rename = "A")]
    pub a: Vec3,
    pub ell: Vec3,
    /// `+1` for `o(4)` (bound), `−1` for `o(3,1)`.
    pub eta: i8,
    /// `η A² + ℓ²`.
    #[serde(rename = "C1")]
    pub c1: f64,
    /// `A⃗ · ℓ⃗`.
    #[serde(rename = "C2")]
    pub c2: f64,
}

impl CanonicalPair {
    pub fn new(a: Vec3, ell: Vec3, eta: i8) -> Self {
        let c1 = f64::from(eta) * a.norm_squared() + ell.norm_squared();
        Self {
            a,
            ell,
            eta,
            c1,
            c2: a.dot(&ell),
        }
    }
}

/// Scales `K⃗` to unit self-bracket. The component of `K⃗` along `ℓ⃗` is dropped
/// so that `C₂ = 0`.
pub fn canonicalize(model: &CentralModel, lrl: &LrlResult) -> Result<CanonicalPair, AlgebraError> {
    let coeff = match lrl.self_pb_coeff {
        Some(c) => c,
        None => self_pb_coefficient(model, lrl.energy, lrl.ell)?,
    };
    let scale = lrl.energy.abs().max(1.0) * lrl.k_mag.max(1.0);
    if !coeff.is_finite() || coeff.abs() <= 1e-14 * scale {
        return Err(AlgebraError::ZeroCoefficient);
    }
    let eta: i8 = if coeff > 0.0 { 1 } else { -1 };
    let ell = lrl.ell_vec;
    let n = ell / ell.norm();
    let k_perp = lrl.k_vec - n * lrl.k_vec.dot(&n);
    Ok(CanonicalPair::new(k_perp / coeff.abs().sqrt(), ell, eta))
}

enum WellBottom {
    /// Circular orbit exists with this energy.
    Found(f64),
    /// The angular momentum is too small for a stable well (collapse dominates).
    TooSmall,
    /// No well: the centrifugal term wins everywhere.
    TooLarge,
}

/// Lowest energy of a circular orbit with angular momentum `ell`.
fn well_bottom(model: &CentralModel, ell: f64) -> WellBottom {
    const NODES: usize = 400;
    let l2 = ell * ell;
    let r0 = model.length_scale(ell);
    let h = |r: f64| {
        model
            .squared_partials(r, 0.0, l2)
            .map_or(f64::NAN, |sp| sp.h)
    };
    let ratio = (1e12f64).powf(1.0 / (NODES - 1) as f64);
    let grid: Vec<f64> = (0..NODES)
        .map(|i| r0 * 1e-6 * ratio.powi(i as i32))
        .collect();
    let vals: Vec<f64> = grid.iter().map(|&r| h(r)).collect();
    // outermost interior minimum: a collapse region at small r is not a well
    for i in (1..NODES - 1).rev() {
        if vals[i] <= vals[i - 1] && vals[i] <= vals[i + 1] && vals[i].is_finite() {
            let (_, hm) = brent_minimize(&h, grid[i - 1], grid[i + 1], 0.0);
            return WellBottom::Found(hm);
        }
    }
    if vals[0] < vals[NODES - 1] {
        WellBottom::TooSmall
    } else {
        WellBottom::TooLarge
    }
}

/// Largest angular momentum of a bound orbit at energy `E` (the circular one).
pub fn ell_max(model: &CentralModel, energy: f64) -> Result<f64, AlgebraError> {
    if let CentralModel::Micz {
        m,
        kappa,
        alpha_monopole,
    } = model
    {
        // K² = 2mE(ℓ² − α²) + m²κ² vanishes on the circular orbit
        if energy >= 0.0 {
            return Err(AlgebraError::NoBoundStates(energy));
        }
        return Ok((alpha_monopole * alpha_monopole + m * kappa * kappa / (-2.0 * energy)).sqrt());
    }
    // f(ℓ) = bottom(ℓ) − E rises through zero at ℓ_max
    let f = |ell: f64| match well_bottom(model, ell) {
        WellBottom::Found(h) => h - energy,
        WellBottom::TooSmall => -1.0,
        WellBottom::TooLarge => 1.0,
    };
    let (mut lo, mut hi) = (1.0, 1.0);
    let mut tries = 0;
    while f(hi) <= 0.0 {
        hi *= 2.0;
        tries += 1;
        if tries > 60 {
            return Err(AlgebraError::NoBoundStates(energy));
        }
    }
    tries = 0;
    while f(lo) > 0.0 {
        lo *= 0.5;
        tries += 1;
        if tries > 60 {
            return Err(AlgebraError::NoBoundStates(energy));
        }
    }
    if lo == hi {
        lo = hi * 0.5;
    }
    if f(lo) > 0.0 {
        return Err(AlgebraError::NoBoundStates(energy));
    }
    brent_root(f, lo, hi, 0.0).map_err(|_| AlgebraError::NoBoundStates(energy))
}

/// Finite transformation generated by `n⃗ · A⃗` with parameter `χ`.
pub fn lrl_transform(
    pair: &CanonicalPair,
    n: &Vec3,
    chi: f64,
) -> Result<CanonicalPair, AlgebraError> {
    let norm = n.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(AlgebraError::NonUnitDirection(norm));
    }
    let (l, a) = (pair.ell, pair.a);
    let (ln, an) = (l.dot(n), a.dot(n));
    let (ell, a) = if pair.eta > 0 {
        let (c, s) = (chi.cos(), chi.sin());
        (
            l * c + n * ((1.0 - c) * ln) + n.cross(&a) * s,
            a * c + n * ((1.0 - c) * an) + n.cross(&l) * s,
        )
    } else {
        let (c, s) = (chi.cosh(), chi.sinh());
        (
            l * c - n * ((c - 1.0) * ln) + n.cross(&a) * s,
            a * c - n * ((c - 1.0) * an) - n.cross(&l) * s,
        )
    };
    Ok(CanonicalPair::new(a, ell, pair.eta))
}

/// A perihelion state at energy `E` whose angular momentum is `pair.ell` and
/// whose perihelion lies along `A⃗`.
pub fn realize_transformed_orbit(
    model: &CentralModel,
    energy: f64,
    pair: &CanonicalPair,
) -> Result<PhaseState, AlgebraError> {
    if let CentralModel::Micz { .. } = model {
        return Err(AlgebraError::ModelUnsupported("micz"));
    }
    let ell = pair.ell.norm();
    let unreachable = || AlgebraError::UnreachableAngularMomentum { energy, ell };
    if !(ell > 0.0) {
        return Err(unreachable());
    }
    let n = pair.ell / ell;
    let ca = closest_approach(model, energy, ell, None).map_err(|_| unreachable())?;
    let a_perp = pair.a - n * pair.a.dot(&n);
    let u = if a_perp.norm() > 1e-12 * ell {
        a_perp.normalize()
    } else {
        // circular: any in-plane direction
        let trial = if n.x.abs() < 0.9 {
            Vec3::x()
        } else {
            Vec3::y()
        };
        (trial - n * trial.dot(&n)).normalize()
    };
    let r = u * ca.r_m;
    let p = n.cross(&u) * (ell / ca.r_m);
    Ok(PhaseState::new(r, p, 0.0)?)
}

/// The orbit of `pair` under `χ ↦ exp(χ n⃗·A⃗)` for each `χ`.
pub fn transform_sweep(
    pair: &CanonicalPair,
    n: &Vec3,
    chis: &[f64],
) -> Result<Vec<(f64, CanonicalPair)>, AlgebraError> {
    chis.iter()
        .map(|&chi| Ok((chi, lrl_transform(pair, n, chi)?)))
        .collect()
}

pub const SWEEP_CSV_HEADER: &str = "chi,lx,ly,lz,Ax,Ay,Az,C1,C2";

pub fn write_sweep_csv(sweep: &[(f64, CanonicalPair)], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for (chi, p) in sweep {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            chi, p.ell.x, p.ell.y, p.ell.z, p.a.x, p.a.y, p.a.z, p.c1, p.c2
        )?;
    }
    Ok(())
}

impl From<crate::models::ModelError> for AlgebraError {
    fn from(e: crate::models::ModelError) -> Self {
        AlgebraError::Lrl(e.into())
    }
}
