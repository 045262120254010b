//! Property tests for the LRL constructions over random orbits.

use std::f64::consts::PI;

use nalgebra::Rotation3;
use proptest::prelude::*;

use lrl_core::brackets::{vector_self_bracket, BracketConfig};
use lrl_core::lrl::{
    closest_approach, lrl_magnitude, lrl_observable, lrl_vector_via_perihelion,
    self_pb_coefficient, w_route_at, w_route_observable, PerihelionOptions,
};
use lrl_core::{
    ell_max, integrate, CentralModel, IntegratorConfig, LrlNote, PhaseState, PostNewtonian, Vec3,
};

fn precessing() -> CentralModel {
    CentralModel::power_sum(1.0, &[(-1.0, -1.0), (0.036, -2.0)]).unwrap()
}

fn quartic() -> CentralModel {
    CentralModel::power_sum(1.0, &[(1.0, 4.0)]).unwrap()
}

/// State at radius `r` with momentum `p` at angle `psi` from `r̂`, turned by
/// the rotation vector `axis`.
fn oriented(r: f64, p: f64, psi: f64, axis: [f64; 3]) -> PhaseState {
    let rot = Rotation3::from_scaled_axis(Vec3::from(axis));
    let pos = rot * Vec3::new(r, 0.0, 0.0);
    let mom = rot * Vec3::new(p * psi.cos(), p * psi.sin(), 0.0);
    PhaseState::new(pos, mom, 0.0).unwrap()
}

/// Momentum giving energy `e` at radius `r` for `p²/2 + U(r)`.
fn newtonian_momentum(model: &CentralModel, e: f64, r: f64) -> f64 {
    (2.0 * (e - model.potential(r).unwrap().u)).sqrt()
}

fn axis() -> impl Strategy<Value = [f64; 3]> {
    [-PI..PI, -PI..PI, -PI..PI]
}

fn psi() -> impl Strategy<Value = f64> {
    0.35..(PI - 0.35)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn perihelion_direction_lies_in_the_orbital_plane(
        which in 0usize..4, r in 0.9..1.8f64, e in -0.45..-0.15f64, psi in 0.8..(PI - 0.8), axis in axis(),
    ) {
        let (model, s) = match which {
            0 => { let m = CentralModel::kepler(1.0, -1.0).unwrap(); let p = newtonian_momentum(&m, e, r); (m, oriented(r, p, psi, axis)) }
            1 => { let m = precessing(); let p = newtonian_momentum(&m, e, r); (m, oriented(r, p, psi, axis)) }
            2 => (CentralModel::rel_coulomb(1.0, -0.2).unwrap(), oriented(r, 0.4 + 0.1 * (e + 0.45) / 0.3, psi, axis)),
            _ => {
                let pn = PostNewtonian::gravitational(2.0, 2.0, -1.0, 30.0).unwrap();
                let m = CentralModel::PostNewtonian(pn);
                (m, oriented(r, (2.0 * (e + 1.0 / r)).sqrt(), psi, axis))
            }
        };
        let res = lrl_vector_via_perihelion(&model, &s, &PerihelionOptions::default()).unwrap().result;
        let lhat = res.ell_vec / res.ell;
        prop_assert!((res.u_o.norm() - 1.0).abs() < 1e-12);
        prop_assert!(res.u_o.dot(&lhat).abs() < 1e-10, "u_o.l = {}", res.u_o.dot(&lhat));
        prop_assert!((res.k_vec - res.u_o * res.k_mag).norm() <= 1e-14 * res.k_mag.max(1.0));
        prop_assert!(res.k_mag > 0.0);
    }

    #[test]
    fn vector_is_the_same_from_any_point_before_the_perihelion(
        precess in any::<bool>(), r in 0.7..1.8f64, e in -0.45..-0.15f64, psi in psi(), axis in axis(), frac in 0.1..0.9f64,
    ) {
        let model = if precess { precessing() } else { CentralModel::kepler(1.0, -1.0).unwrap() };
        let s0 = oriented(r, newtonian_momentum(&model, e, r), psi, axis);
        let first = lrl_vector_via_perihelion(&model, &s0, &PerihelionOptions::default()).unwrap();
        let t_peri = first.perihelia[0].t;
        let traj = integrate(&model, &s0, frac * t_peri, &IntegratorConfig::with_tol(1e-12)).unwrap();
        let later = lrl_vector_via_perihelion(&model, &traj.last().phase, &PerihelionOptions::default()).unwrap();
        let k = first.result.k_vec;
        prop_assert!((later.result.k_vec - k).norm() <= 1e-6 * k.norm(), "{} vs {}", later.result.k_vec, k);
    }

    #[test]
    fn route_one_and_w_route_agree(
        quart in any::<bool>(), r in 0.7..1.6f64, e in -0.45..-0.15f64, psi in psi(), axis in axis(),
    ) {
        let model = if quart { quartic() } else { precessing() };
        // the quartic well is bound at any energy; sample its momentum directly
        let p = if quart { 0.5 + 3.0 * (e + 0.45) } else { newtonian_momentum(&model, e, r) };
        let s = oriented(r, p, psi, axis);
        let k1 = lrl_vector_via_perihelion(&model, &s, &PerihelionOptions::default()).unwrap().result.k_vec;
        let kw = w_route_at(&model, &s, 1e-12).unwrap();
        prop_assert!((k1 - kw).norm() <= 1e-6 * k1.norm(), "{k1} vs {kw}");
        // the phase-space function measures from the last closest approach, which
        // is the next perihelion only while falling in
        if s.radial_momentum() < 0.0 {
            let kq = lrl_observable(&model).eval(&s);
            prop_assert!((kq - k1).norm() <= 1e-6 * k1.norm(), "{kq} vs {k1}");
        }
    }

    #[test]
    fn magnitude_vanishes_towards_the_circular_limit(e in -0.45..-0.12f64) {
        let model = precessing();
        let l_max = ell_max(&model, e).unwrap();
        let near = lrl_magnitude(&model, e, l_max * (1.0 - 1e-6)).unwrap();
        let far = lrl_magnitude(&model, e, l_max * 0.8).unwrap();
        prop_assert!(near > 0.0 && near < 1e-2 * far, "K near l_max = {near}, at 0.8 l_max = {far}");
    }
}

#[test]
fn w_route_observable_self_bracket_matches_coefficient() {
    let cfg = BracketConfig::default();
    for (model, s) in [
        (
            precessing(),
            PhaseState::from_slice([0.9, 0.3, 0.1, -0.2, 1.1, 0.15]).unwrap(),
        ),
        (
            quartic(),
            PhaseState::from_slice([1.0, 0.0, 0.2, 0.5, 1.0, 0.2]).unwrap(),
        ),
    ] {
        let k = w_route_observable(&model, 1e-12);
        let e = model.energy(&s).unwrap();
        let ell = s.orbital_angular_momentum();
        let c = self_pb_coefficient(&model, e, ell.norm()).unwrap();
        let sb = vector_self_bracket(&k, &s, &cfg).unwrap();
        let expected = ell * c;
        let rel = (sb.lambda - expected).norm() / expected.norm();
        assert!(rel < 1e-4, "{}: residual {rel:e}", model.name());
    }
}

#[test]
fn circular_state_is_flagged_with_zero_vector() {
    let model = CentralModel::kepler(1.0, -1.0).unwrap();
    let s = PhaseState::from_slice([0.0, 2.0, 0.0, -(0.5f64).sqrt(), 0.0, 0.0]).unwrap();
    let res = lrl_vector_via_perihelion(&model, &s, &PerihelionOptions::default())
        .unwrap()
        .result;
    assert_eq!(res.k_mag, 0.0);
    assert!(res.notes.contains(&LrlNote::CircularDegenerate));
    assert!(
        closest_approach(&model, res.energy, res.ell, None)
            .unwrap()
            .double_root
    );
}
