//! Generalized Laplace-Runge-Lenz vectors for rotationally symmetric two-body systems.
//!
//! Every rotationally symmetric Hamiltonian `H(r, p_r, ℓ)` with a turning point
//! carries a constant vector pointing at the closest approach, even when the
//! orbit precesses. [`lrl`] builds it two independent ways, [`brackets`] checks
//! its Poisson algebra numerically, [`algebra`] turns it into the canonical
//! `o(4)` / `o(3,1)` pair and [`closedform`] holds analytic oracles.

pub mod algebra;
pub mod brackets;
pub mod closedform;
pub mod dynamics;
pub mod lrl;
pub mod models;
pub mod numerics;

pub use algebra::{
    canonicalize, ell_max, lrl_transform, realize_transformed_orbit, AlgebraError, CanonicalPair,
};
pub use brackets::{
    BracketConfig, BracketError, BracketResidual, FdScheme, Observable, VectorObservable,
};
pub use closedform::{ClosedFormError, CoulombRegime, PnCoefficients};
pub use dynamics::{
    integrate, integrate_until, DynamicsError, IntegratorConfig, StopCondition, Trajectory,
    TurningEvent, TurningKind,
};
pub use lrl::{LrlError, LrlNote, LrlResult};
pub use models::{
    CentralModel, ModelError, ModelSpec, PhaseState, PlaneBasis, PolarState, PostNewtonian,
    Potential, Vec3,
};
