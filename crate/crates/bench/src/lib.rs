//! Shared fixtures for the criterion benches.

use lrl_core::{CentralModel, PhaseState, PostNewtonian};

/// Bound Kepler ellipse with `e = 0.44`, starting at perihelion.
pub fn kepler_case() -> (CentralModel, PhaseState) {
    (
        CentralModel::kepler(1.0, -1.0).unwrap(),
        state([1.0, 0.0, 0.0, 0.0, 1.2, 0.0]),
    )
}

/// Precessing orbit in `U = −1/r + β/r²`.
pub fn precessing_case() -> (CentralModel, PhaseState) {
    let model = CentralModel::power_sum(1.0, &[(-1.0, -1.0), (0.036, -2.0)]).unwrap();
    (model, state([0.9, 0.3, 0.1, -0.2, 1.1, 0.15]))
}

pub fn post_newtonian_case() -> (CentralModel, PhaseState) {
    let pn = PostNewtonian::gravitational(2.0, 2.0, -1.0, 100.0).unwrap();
    (
        CentralModel::PostNewtonian(pn),
        state([1.0, 0.0, 0.0, 0.1, 1.2, 0.0]),
    )
}

fn state(v: [f64; 6]) -> PhaseState {
    PhaseState::from_slice(v).unwrap()
}
