//! Dormand-Prince 5(4) stepper on a fixed-size state.

pub(crate) const DIM: usize = 9;
pub(crate) type Y = [f64; DIM];

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;

// Difference between the 5th- and embedded 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combine(y: &Y, h: f64, terms: &[(f64, &Y)]) -> Y {
    let mut out = *y;
    for i in 0..DIM {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] += h * acc;
    }
    out
}

pub(crate) struct StepResult {
    pub y: Y,
    /// Derivative at the new point (first stage of the next step).
    pub dy: Y,
    /// Per-component local error estimate.
    pub err: Y,
}

/// One step of size `h` from `(t, y)` with `dy = f(t, y)` already known.
pub(crate) fn step<E>(
    f: &mut impl FnMut(f64, &Y) -> Result<Y, E>,
    t: f64,
    y: &Y,
    dy: &Y,
    h: f64,
) -> Result<StepResult, E> {
    let k1 = dy;
    let k2 = f(t + C2 * h, &combine(y, h, &[(A21, k1)]))?;
    let k3 = f(t + C3 * h, &combine(y, h, &[(A31, k1), (A32, &k2)]))?;
    let k4 = f(
        t + C4 * h,
        &combine(y, h, &[(A41, k1), (A42, &k2), (A43, &k3)]),
    )?;
    let k5 = f(
        t + C5 * h,
        &combine(y, h, &[(A51, k1), (A52, &k2), (A53, &k3), (A54, &k4)]),
    )?;
    let k6 = f(
        t + h,
        &combine(
            y,
            h,
            &[(A61, k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        ),
    )?;
    let y_new = combine(
        y,
        h,
        &[(B1, k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
    );
    let k7 = f(t + h, &y_new)?;
    let mut err = [0.0; DIM];
    for i in 0..DIM {
        err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
    }
    Ok(StepResult {
        y: y_new,
        dy: k7,
        err,
    })
}

/// Scaled max-norm of the error estimate.
pub(crate) fn error_norm(err: &Y, y0: &Y, y1: &Y, rtol: f64, atol: f64, active: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..active {
        let sc = atol + rtol * y0[i].abs().max(y1[i].abs());
        worst = worst.max((err[i] / sc).abs());
    }
    worst
}
