//! Bracketed root finding and one-dimensional maximization.

use crate::error::{Error, Result};
use crate::real::Real;

/// Bisection on `[lo, hi]`. Requires a sign change (an endpoint root counts).
///
/// Runs until the bracket is below `xtol` or `max_iter` halvings, whichever
/// comes first, and returns the bracket midpoint.
pub fn bisect<F: Real>(
    f: impl Fn(F) -> F,
    mut lo: F,
    mut hi: F,
    xtol: F,
    max_iter: usize,
) -> Result<F> {
    if lo > hi {
        std::mem::swap(&mut lo, &mut hi);
    }
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == F::zero() {
        return Ok(lo);
    }
    if fhi == F::zero() {
        return Ok(hi);
    }
    if (flo > F::zero()) == (fhi > F::zero()) {
        return Err(Error::NoRoot(format!(
            "no sign change on [{}, {}] (f = {}, {})",
            lo.to_f64(),
            hi.to_f64(),
            flo.to_f64(),
            fhi.to_f64()
        )));
    }
    for _ in 0..max_iter {
        let mid = (lo + hi) * F::half();
        if mid <= lo || mid >= hi || hi - lo < xtol {
            break;
        }
        let fm = f(mid);
        if fm == F::zero() {
            return Ok(mid);
        }
        if (fm > F::zero()) == (flo > F::zero()) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok((lo + hi) * F::half())
}

/// Golden-section maximization of a unimodal function on `[lo, hi]`.
///
/// Returns `(argmax, max)`. The function may fail, in which case the error
/// is propagated.
pub fn golden_max<F: Real>(
    f: impl Fn(F) -> Result<F>,
    lo: F,
    hi: F,
    xtol: F,
) -> Result<(F, F)> {
    if !(lo < hi) {
        return Err(Error::argument("golden_max needs lo < hi"));
    }
    let inv_phi = F::of(0.618_033_988_749_894_8);
    let inv_phi2 = F::of(0.381_966_011_250_105_2);
    let mut a = lo;
    let mut b = hi;
    let mut h = b - a;
    let mut c = a + inv_phi2 * h;
    let mut d = a + inv_phi * h;
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while h > xtol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            h = b - a;
            c = a + inv_phi2 * h;
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            h = b - a;
            d = a + inv_phi * h;
            fd = f(d)?;
        }
        if c >= d {
            break;
        }
    }
    let x = (a + b) * F::half();
    Ok((x, f(x)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x: f64| x * x - 2.0, 0.0, 2.0, 1e-14, 200).unwrap();
        assert!((r - std::f64::consts::SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn bisect_endpoint_root() {
        let r = bisect(|x: f64| x - 1.0, 1.0, 3.0, 1e-12, 100).unwrap();
        assert_eq!(r, 1.0);
    }

    #[test]
    fn bisect_rejects_no_sign_change() {
        assert!(matches!(
            bisect(|x: f64| x * x + 1.0, -1.0, 1.0, 1e-12, 100),
            Err(Error::NoRoot(_))
        ));
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, v) = golden_max(|x: f64| Ok(-(x - 0.3) * (x - 0.3)), -2.0, 2.0, 1e-10).unwrap();
        assert!((x - 0.3).abs() < 1e-7);
        assert!(v.abs() < 1e-12);
    }
}
