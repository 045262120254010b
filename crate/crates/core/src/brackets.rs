//! Numerical Poisson brackets over the Cartesian chart `(r⃗, p⃗)`.
//!
//! Gradients are central finite differences with a relative step
//! `h·max(1, |x|)`. The bracket is assembled so that `{F,G} = −{G,F}` holds
//! bit-for-bit.
//!
//! A non-zero [`BracketConfig::magnetic_charge`] `g` switches to the twisted
//! bracket of a charge in a monopole field, `{pᵢ, pⱼ} = g εᵢⱼₖ rₖ/r³`, where
//! `p` is the kinetic momentum. This is what the MICZ observables need.

use std::fmt;
use std::sync::Arc;

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{CentralModel, PhaseState, Vec3};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BracketError {
    #[error("observable `{label}` is not finite near r = {r:?}, p = {p:?}")]
    EvaluationFailure {
        label: String,
        r: [f64; 3],
        p: [f64; 3],
    },
    #[error("empty state sample")]
    EmptyStateSample,
    #[error("finite-difference step must be positive and finite, got {0}")]
    InvalidStep(f64),
}

pub type ScalarFn = Arc<dyn Fn(&PhaseState) -> f64 + Send + Sync>;
pub type VectorFn = Arc<dyn Fn(&PhaseState) -> Vec3 + Send + Sync>;

/// Scalar phase-space function.
#[derive(Clone)]
pub struct Observable {
    pub label: String,
    eval: ScalarFn,
}

/// Vector-valued phase-space function.
#[derive(Clone)]
pub struct VectorObservable {
    pub label: String,
    eval: VectorFn,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Observable({})", self.label)
    }
}

impl fmt::Debug for VectorObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VectorObservable({})", self.label)
    }
}

impl Observable {
    pub fn new(
        label: impl Into<String>,
        f: impl Fn(&PhaseState) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            eval: Arc::new(f),
        }
    }

    pub fn eval(&self, s: &PhaseState) -> f64 {
        (self.eval)(s)
    }

    pub fn position(i: usize) -> Self {
        Self::new(["x", "y", "z"][i], move |s| s.r[i])
    }

    pub fn momentum(i: usize) -> Self {
        Self::new(["px", "py", "pz"][i], move |s| s.p[i])
    }

    pub fn energy(model: &CentralModel) -> Self {
        let model = model.clone();
        Self::new("H", move |s| model.energy(s).unwrap_or(f64::NAN))
    }

    pub fn ell_squared(model: &CentralModel) -> Self {
        let model = model.clone();
        Self::new("l2", move |s| model.angular_momentum(s).norm_squared())
    }

    pub fn constant(value: f64) -> Self {
        Self::new("const", move |_| value)
    }

    pub fn product(a: &Observable, b: &Observable) -> Self {
        let (a, b) = (a.clone(), b.clone());
        Self::new(format!("{}*{}", a.label, b.label), move |s| {
            a.eval(s) * b.eval(s)
        })
    }

    /// `a · b`
    pub fn dot(a: &VectorObservable, b: &VectorObservable) -> Self {
        let (a, b) = (a.clone(), b.clone());
        Self::new(format!("{}.{}", a.label, b.label), move |s| {
            a.eval(s).dot(&b.eval(s))
        })
    }
}

impl VectorObservable {
    pub fn new(
        label: impl Into<String>,
        f: impl Fn(&PhaseState) -> Vec3 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            eval: Arc::new(f),
        }
    }

    pub fn eval(&self, s: &PhaseState) -> Vec3 {
        (self.eval)(s)
    }

    pub fn component(&self, i: usize) -> Observable {
        let v = self.clone();
        Observable::new(format!("{}[{i}]", self.label), move |s| v.eval(s)[i])
    }

    /// The model's conserved angular momentum.
    pub fn angular_momentum(model: &CentralModel) -> Self {
        let model = model.clone();
        Self::new("l", move |s| model.angular_momentum(s))
    }

    /// `r × p`
    pub fn orbital_angular_momentum() -> Self {
        Self::new("rxp", |s| s.r.cross(&s.p))
    }

    pub fn radial_unit() -> Self {
        Self::new("rhat", |s| s.r / s.r.norm())
    }

    pub fn constant(v: Vec3) -> Self {
        Self::new("const", move |_| v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FdScheme {
    Central2,
    Central4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BracketConfig {
    /// Relative finite-difference step.
    pub step: f64,
    pub scheme: FdScheme,
    /// Monopole strength `g` of the twisted momentum bracket; 0 is canonical.
    pub magnetic_charge: f64,
}

impl Default for BracketConfig {
    fn default() -> Self {
        Self {
            step: 1e-5,
            scheme: FdScheme::Central2,
            magnetic_charge: 0.0,
        }
    }
}

impl BracketConfig {
    /// Default settings with the bracket matching the model's phase variables.
    pub fn for_model(model: &CentralModel) -> Self {
        Self::default().with_model(model)
    }

    pub fn with_model(mut self, model: &CentralModel) -> Self {
        self.magnetic_charge = match model {
            CentralModel::Micz { alpha_monopole, .. } => *alpha_monopole,
            _ => 0.0,
        };
        self
    }

    pub fn with_scheme(mut self, scheme: FdScheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.step = step;
        self
    }

    fn validate(&self) -> Result<(), BracketError> {
        if self.step.is_finite() && self.step > 0.0 {
            Ok(())
        } else {
            Err(BracketError::InvalidStep(self.step))
        }
    }
}

/// Derivatives with respect to `(x, y, z, px, py, pz)`, one row per component.
type Jacobian<const N: usize> = [[f64; 6]; N];

fn coordinate(s: &PhaseState, k: usize) -> f64 {
    if k < 3 {
        s.r[k]
    } else {
        s.p[k - 3]
    }
}

fn shifted(s: &PhaseState, k: usize, dx: f64) -> PhaseState {
    let mut out = *s;
    if k < 3 {
        out.r[k] += dx;
    } else {
        out.p[k - 3] += dx;
    }
    out
}

fn failure(label: &str, s: &PhaseState) -> BracketError {
    BracketError::EvaluationFailure {
        label: label.to_string(),
        r: s.r.into(),
        p: s.p.into(),
    }
}

fn jacobian<const N: usize>(
    f: impl Fn(&PhaseState) -> [f64; N],
    label: &str,
    s: &PhaseState,
    cfg: &BracketConfig,
) -> Result<Jacobian<N>, BracketError> {
    cfg.validate()?;
    let mut jac = [[0.0; 6]; N];
    let eval = |x: &PhaseState| {
        let v = f(x);
        if v.iter().all(|c| c.is_finite()) {
            Ok(v)
        } else {
            Err(failure(label, x))
        }
    };
    for k in 0..6 {
        let h = cfg.step * coordinate(s, k).abs().max(1.0);
        match cfg.scheme {
            FdScheme::Central2 => {
                let fp = eval(&shifted(s, k, h))?;
                let fm = eval(&shifted(s, k, -h))?;
                for c in 0..N {
                    jac[c][k] = (fp[c] - fm[c]) / (2.0 * h);
                }
            }
            FdScheme::Central4 => {
                let f2p = eval(&shifted(s, k, 2.0 * h))?;
                let fp = eval(&shifted(s, k, h))?;
                let fm = eval(&shifted(s, k, -h))?;
                let f2m = eval(&shifted(s, k, -2.0 * h))?;
                for c in 0..N {
                    jac[c][k] = (f2m[c] - 8.0 * fm[c] + 8.0 * fp[c] - f2p[c]) / (12.0 * h);
                }
            }
        }
    }
    Ok(jac)
}

pub fn gradient(
    f: &Observable,
    s: &PhaseState,
    cfg: &BracketConfig,
) -> Result<[f64; 6], BracketError> {
    Ok(jacobian(|x| [f.eval(x)], &f.label, s, cfg)?[0])
}

pub fn vector_jacobian(
    k: &VectorObservable,
    s: &PhaseState,
    cfg: &BracketConfig,
) -> Result<[[f64; 6]; 3], BracketError> {
    jacobian(|x| k.eval(x).into(), &k.label, s, cfg)
}

/// Bracket of two gradient rows; antisymmetric bit-for-bit.
fn contract(a: &[f64; 6], b: &[f64; 6], r: &Vec3, g: f64) -> f64 {
    let mut sum = 0.0;
    for i in 0..3 {
        sum += a[i] * b[i + 3] - a[i + 3] * b[i];
    }
    if g != 0.0 {
        let w = r * (g / r.norm().powi(3));
        // Σ_{i<j} (aᵢbⱼ − aⱼbᵢ) εᵢⱼₖ wₖ over the momentum slots
        for (i, j, k) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
            sum += (a[i + 3] * b[j + 3] - a[j + 3] * b[i + 3]) * w[k];
        }
    }
    sum
}

/// `{F, G}` at `s`.
pub fn bracket(
    f: &Observable,
    g: &Observable,
    s: &PhaseState,
    cfg: &BracketConfig,
) -> Result<f64, BracketError> {
    let a = gradient(f, s, cfg)?;
    let b = gradient(g, s, cfg)?;
    Ok(contract(&a, &b, &s.r, cfg.magnetic_charge))
}

/// `{F, Kⁱ}` for every component of a vector observable.
pub fn bracket_scalar_vector(
    f: &Observable,
    k: &VectorObservable,
    s: &PhaseState,
    cfg: &BracketConfig,
) -> Result<Vec3, BracketError> {
    let a = gradient(f, s, cfg)?;
    let jk = vector_jacobian(k, s, cfg)?;
    Ok(Vec3::from_fn(|i, _| {
        contract(&a, &jk[i], &s.r, cfg.magnetic_charge)
    }))
}

/// `Mᵢⱼ = {Aⁱ, Bʲ}`.
pub fn bracket_matrix(
    a: &VectorObservable,
    b: &VectorObservable,
    s: &PhaseState,
    cfg: &BracketConfig,
) -> Result<Matrix3<f64>, BracketError> {
    let ja = vector_jacobian(a, s, cfg)?;
    let jb = vector_jacobian(b, s, cfg)?;
    Ok(Matrix3::from_fn(|i, j| {
        contract(&ja[i], &jb[j], &s.r, cfg.magnetic_charge)
    }))
}

/// Self-bracket matrix of a vector observable and its dual vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfBracket {
    pub matrix: Matrix3<f64>,
    /// `Λᵏ = ½ εᵏⁱʲ Mⁱʲ`
    pub lambda: Vec3,
    /// Largest `|Mᵢⱼ + Mⱼᵢ|`.
    pub asymmetry: f64,
}

pub fn vector_self_bracket(
    k: &VectorObservable,
    s: &PhaseState,
    cfg: &BracketConfig,
) -> Result<SelfBracket, BracketError> {
    let jk = vector_jacobian(k, s, cfg)?;
    let m = Matrix3::from_fn(|i, j| contract(&jk[i], &jk[j], &s.r, cfg.magnetic_charge));
    Ok(self_bracket_from_matrix(m))
}

fn self_bracket_from_matrix(m: Matrix3<f64>) -> SelfBracket {
    let lambda = Vec3::new(
        0.5 * (m[(1, 2)] - m[(2, 1)]),
        0.5 * (m[(2, 0)] - m[(0, 2)]),
        0.5 * (m[(0, 1)] - m[(1, 0)]),
    );
    let asymmetry = (m + m.transpose()).abs().max();
    SelfBracket {
        matrix: m,
        lambda,
        asymmetry,
    }
}

/// Aggregate residual over a state sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BracketResidual {
    pub max_abs: f64,
    pub rms: f64,
    /// Largest residual relative to the magnitude of the expected value.
    pub max_rel: f64,
    pub states_tested: usize,
}

impl BracketResidual {
    pub fn passes(&self, max_rel: f64) -> bool {
        self.max_rel <= max_rel
    }
}

#[derive(Default)]
struct ResidualAccumulator {
    max_abs: f64,
    sum_sq: f64,
    count: usize,
    max_rel: f64,
    states: usize,
}

impl ResidualAccumulator {
    fn push(&mut self, residual: f64, scale: f64) {
        self.max_abs = self.max_abs.max(residual);
        self.sum_sq += residual * residual;
        self.count += 1;
        self.max_rel = self.max_rel.max(residual / scale.max(f64::MIN_POSITIVE));
    }

    fn finish(self) -> BracketResidual {
        BracketResidual {
            max_abs: self.max_abs,
            rms: (self.sum_sq / self.count.max(1) as f64).sqrt(),
            max_rel: self.max_rel,
            states_tested: self.states,
        }
    }
}

const LEVI: [(usize, usize, usize); 3] = [(0, 1, 2), (1, 2, 0), (2, 0, 1)];

/// Residual of `{Kⁱ, ℓʲ} = εⁱʲᵏ Kᵏ` over `states`; relative to `|K|`.
pub fn verify_rotational(
    k: &VectorObservable,
    ell: &VectorObservable,
    states: &[PhaseState],
    cfg: &BracketConfig,
) -> Result<BracketResidual, BracketError> {
    if states.is_empty() {
        return Err(BracketError::EmptyStateSample);
    }
    let mut acc = ResidualAccumulator::default();
    for s in states {
        let m = bracket_matrix(k, ell, s, cfg)?;
        let kv = k.eval(s);
        let mut expected = Matrix3::zeros();
        for (i, j, l) in LEVI {
            expected[(i, j)] = kv[l];
            expected[(j, i)] = -kv[l];
        }
        let scale = kv.norm();
        for res in (m - expected).iter() {
            acc.push(res.abs(), scale);
        }
        acc.states += 1;
    }
    Ok(acc.finish())
}

/// Relative step for `∂F/∂(ℓ²)`.
const LSQ_STEP: f64 = 1e-6;

/// Central difference of `ksq(E, ℓ²)` in `ℓ²`.
pub fn dksq_dl2(ksq: &dyn Fn(f64, f64) -> f64, energy: f64, l2: f64) -> f64 {
    let h = LSQ_STEP * l2.abs().max(1e-8);
    (ksq(energy, l2 + h) - ksq(energy, l2 - h)) / (2.0 * h)
}

/// Residual between the extracted `Λ⃗` of `K` and `−∂F/∂(ℓ²) ℓ⃗`, relative to
/// `|Λ_expected|`. The bracket twist is taken from the model.
pub fn verify_prop2(
    model: &CentralModel,
    k: &VectorObservable,
    ksq: &dyn Fn(f64, f64) -> f64,
    states: &[PhaseState],
    cfg: &BracketConfig,
) -> Result<BracketResidual, BracketError> {
    if states.is_empty() {
        return Err(BracketError::EmptyStateSample);
    }
    let cfg = cfg.with_model(model);
    let mut acc = ResidualAccumulator::default();
    for s in states {
        let energy = model.energy(s).map_err(|_| failure("H", s))?;
        let ell = model.angular_momentum(s);
        let expected = ell * -dksq_dl2(ksq, energy, ell.norm_squared());
        let sb = vector_self_bracket(k, s, &cfg)?;
        acc.push((sb.lambda - expected).norm(), expected.norm());
        acc.states += 1;
    }
    Ok(acc.finish())
}

/// Both sides of the parallelism criterion at one state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParallelismCheck {
    /// `|Λ̂ × ℓ̂|`
    pub sin_angle: f64,
    /// `maxᵢ |{Kⁱ, ℓ⃗·K⃗}|`
    pub scalar_bracket: f64,
    /// `|K|²`, the natural scale of `scalar_bracket`.
    pub scale: f64,
}

/// `Λ⃗ ∥ ℓ⃗` if and only if `{K⃗, ℓ⃗·K⃗} = 0`.
pub fn parallelism_check(
    k: &VectorObservable,
    ell: &VectorObservable,
    s: &PhaseState,
    cfg: &BracketConfig,
) -> Result<ParallelismCheck, BracketError> {
    let sb = vector_self_bracket(k, s, cfg)?;
    let l = ell.eval(s);
    let lambda_norm = sb.lambda.norm();
    let sin_angle = if lambda_norm == 0.0 {
        0.0
    } else {
        sb.lambda.cross(&l).norm() / (lambda_norm * l.norm())
    };
    let kl = Observable::dot(ell, k);
    let b = bracket_scalar_vector(&kl, k, s, cfg)?;
    Ok(ParallelismCheck {
        sin_angle,
        scalar_bracket: b.amax(),
        scale: k.eval(s).norm_squared(),
    })
}
