//! Adaptive Dormand-Prince 5(4) integration for scalar ODEs, with event
//! stopping.
//!
//! The boundary solver integrates backward in the maximum variable, so the
//! stepper supports both directions. An event monitor can terminate the
//! integration: the crossing is located by bisecting the step size, which
//! keeps the integrator free of dense-output machinery.

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Copy)]
pub struct OdeConfig<F> {
    pub abs_tol: F,
    pub rel_tol: F,
    /// Hard cap on |step|; also bounds the spacing of recorded points.
    pub max_step: Option<F>,
    pub max_steps: usize,
}

impl<F: Real> Default for OdeConfig<F> {
    fn default() -> Self {
        OdeConfig {
            abs_tol: F::of(1e-10),
            rel_tol: F::of(1e-8),
            max_step: None,
            max_steps: 4_000_000,
        }
    }
}

/// Where the integration ended.
#[derive(Debug, Clone, Copy)]
pub struct OdeEnd<F> {
    pub t: F,
    pub y: F,
    /// True when the event monitor fired before `t_end`.
    pub event: bool,
}

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
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
// Difference between the 5th- and 4th-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// One Dormand-Prince step of signed size `h`. Returns `(y_new, err_est, k7)`.
fn dp_step<F: Real>(
    rhs: &impl Fn(F, F) -> Result<F>,
    t: F,
    y: F,
    k1: F,
    h: F,
) -> Result<(F, F)> {
    let of = F::of;
    let k2 = rhs(t + of(C2) * h, y + h * of(A21) * k1)?;
    let k3 = rhs(t + of(C3) * h, y + h * (of(A31) * k1 + of(A32) * k2))?;
    let k4 = rhs(t + of(C4) * h, y + h * (of(A41) * k1 + of(A42) * k2 + of(A43) * k3))?;
    let k5 = rhs(
        t + of(C5) * h,
        y + h * (of(A51) * k1 + of(A52) * k2 + of(A53) * k3 + of(A54) * k4),
    )?;
    let k6 = rhs(
        t + h,
        y + h * (of(A61) * k1 + of(A62) * k2 + of(A63) * k3 + of(A64) * k4 + of(A65) * k5),
    )?;
    let y_new = y + h * (of(B1) * k1 + of(B3) * k3 + of(B4) * k4 + of(B5) * k5 + of(B6) * k6);
    let k7 = rhs(t + h, y_new)?;
    let err = h
        * (of(E1) * k1 + of(E3) * k3 + of(E4) * k4 + of(E5) * k5 + of(E6) * k6 + of(E7) * k7);
    Ok((y_new, err))
}

/// Integrates `y' = rhs(t, y)` from `(t0, y0)` toward `t_end` (either
/// direction).
///
/// `monitor(t, y)` must be positive at the start; when an accepted step
/// makes it non-positive the crossing is located and integration stops
/// there. `record` receives every accepted point including the endpoint.
pub fn integrate<F: Real>(
    rhs: impl Fn(F, F) -> Result<F>,
    t0: F,
    y0: F,
    t_end: F,
    cfg: &OdeConfig<F>,
    monitor: impl Fn(F, F) -> F,
    mut record: impl FnMut(F, F),
) -> Result<OdeEnd<F>> {
    let span = t_end - t0;
    if span == F::zero() {
        record(t0, y0);
        return Ok(OdeEnd {
            t: t0,
            y: y0,
            event: false,
        });
    }
    let dir = if span > F::zero() { F::one() } else { -F::one() };
    let span_abs = span.abs();
    let mut h = span_abs * F::of(1e-4);
    if let Some(hm) = cfg.max_step {
        h = h.min(hm);
    }
    let h_min = span_abs * F::of(1e-14);
    let mut t = t0;
    let mut y = y0;
    let mut k1 = rhs(t, y)?;
    record(t, y);
    for _ in 0..cfg.max_steps {
        let remaining = (t_end - t) * dir;
        if remaining <= F::zero() {
            return Ok(OdeEnd {
                t,
                y,
                event: false,
            });
        }
        h = h.min(remaining);
        if let Some(hm) = cfg.max_step {
            h = h.min(hm);
        }
        let signed = dir * h;
        match dp_step(&rhs, t, y, k1, signed) {
            Ok((y_new, err)) => {
                let scale = cfg.abs_tol + cfg.rel_tol * y.abs().max(y_new.abs());
                let ratio = (err / scale).abs();
                if ratio <= F::one() {
                    let t_new = t + signed;
                    if monitor(t_new, y_new) <= F::zero() {
                        let (te, ye) = locate_event(&rhs, t, y, k1, signed, &monitor)?;
                        record(te, ye);
                        return Ok(OdeEnd {
                            t: te,
                            y: ye,
                            event: true,
                        });
                    }
                    t = t_new;
                    y = y_new;
                    k1 = rhs(t, y)?;
                    record(t, y);
                    let grow = F::of(0.9) * ratio.powf(F::of(-0.2));
                    h = h * grow.min(F::of(5.0)).max(F::of(0.2));
                } else {
                    let shrink = F::of(0.9) * ratio.powf(F::of(-0.2));
                    h = h * shrink.max(F::of(0.1));
                }
            }
            Err(_) if h > h_min => {
                // Trial stages stepped somewhere the rhs rejects (e.g. past
                // the diagonal); retry shorter.
                h = h * F::half();
            }
            Err(e) => return Err(e),
        }
        if h < h_min {
            return Err(Error::Ode(format!(
                "step size underflow at t = {}",
                t.to_f64()
            )));
        }
    }
    Err(Error::Ode(format!(
        "step budget exhausted at t = {}",
        t.to_f64()
    )))
}

/// Bisects the step size to land on the first point where the monitor is
/// non-positive.
fn locate_event<F: Real>(
    rhs: &impl Fn(F, F) -> Result<F>,
    t: F,
    y: F,
    k1: F,
    signed_h: F,
    monitor: &impl Fn(F, F) -> F,
) -> Result<(F, F)> {
    let mut lo = F::zero();
    let mut hi = signed_h;
    let mut y_hi = None;
    for _ in 0..80 {
        let mid = (lo + hi) * F::half();
        if mid == lo || mid == hi {
            break;
        }
        let (y_mid, _) = dp_step(rhs, t, y, k1, mid)?;
        if monitor(t + mid, y_mid) <= F::zero() {
            hi = mid;
            y_hi = Some(y_mid);
        } else {
            lo = mid;
        }
        if (hi - lo).abs() <= signed_h.abs() * F::of(1e-13) {
            break;
        }
    }
    let y_event = match y_hi {
        Some(v) => v,
        None => dp_step(rhs, t, y, k1, hi)?.0,
    };
    Ok((t + hi, y_event))
}
