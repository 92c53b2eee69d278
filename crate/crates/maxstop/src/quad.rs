//! Adaptive Gauss-Kronrod quadrature (7-15 pair).
//!
//! Globally adaptive: the interval with the largest error estimate is
//! bisected until the total estimate meets the configured tolerance. Nodes
//! are interior, so integrable endpoint singularities are handled by
//! refinement alone.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::real::Real;

/// Kronrod abscissae (positive half, 15-point rule).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_7,
    0.949_107_912_342_758_524_526_189_7,
    0.864_864_423_359_769_072_789_712_8,
    0.741_531_185_599_394_439_863_864_8,
    0.586_087_235_467_691_130_294_144_8,
    0.405_845_151_377_397_166_906_606_4,
    0.207_784_955_007_898_467_600_689_4,
    0.0,
];

/// Kronrod weights.
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_0,
    0.063_092_092_629_978_553_290_700_7,
    0.104_790_010_322_250_183_839_876_3,
    0.140_653_259_715_525_918_745_189_6,
    0.169_004_726_639_267_902_826_583_4,
    0.190_350_578_064_785_409_913_256_4,
    0.204_432_940_075_298_892_414_161_99,
    0.209_482_141_084_727_828_012_999_2,
];

/// Gauss weights for the embedded 7-point rule (nodes XGK[1], XGK[3], XGK[5], XGK[7]).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_4,
    0.279_705_391_489_276_667_901_467_8,
    0.381_830_050_505_118_944_950_369_8,
    0.417_959_183_673_469_387_755_102_0,
];

/// Quadrature tolerances.
#[derive(Debug, Clone, Copy)]
pub struct QuadConfig<F> {
    pub abs_tol: F,
    pub rel_tol: F,
    /// Cap on the number of subintervals before giving up.
    pub max_intervals: usize,
}

impl<F: Real> Default for QuadConfig<F> {
    fn default() -> Self {
        QuadConfig {
            abs_tol: F::of(1e-10),
            rel_tol: F::of(1e-8),
            max_intervals: 20_000,
        }
    }
}

struct Segment<F> {
    a: F,
    b: F,
    value: F,
    err: f64,
}

impl<F: Real> PartialEq for Segment<F> {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl<F: Real> Eq for Segment<F> {}
impl<F: Real> PartialOrd for Segment<F> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<F: Real> Ord for Segment<F> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.partial_cmp(&other.err).unwrap_or(Ordering::Equal)
    }
}

fn kronrod_pair<F: Real>(f: &impl Fn(F) -> F, a: F, b: F) -> Result<(F, f64)> {
    let half = (b - a) * F::half();
    let mid = (a + b) * F::half();
    let mut kron = F::zero();
    let mut gauss = F::zero();
    for (i, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let dx = half * F::of(x);
        let (f_lo, f_hi) = if x == 0.0 {
            let v = f(mid);
            (v, F::zero())
        } else {
            (f(mid - dx), f(mid + dx))
        };
        let pair_sum = if x == 0.0 { f_lo } else { f_lo + f_hi };
        if !pair_sum.is_finite() {
            return Err(Error::Divergence(format!(
                "integrand non-finite near x = {}",
                (mid + dx).to_f64()
            )));
        }
        kron = kron + F::of(wk) * pair_sum;
        // Odd indices (and the centre node i = 7) carry the embedded
        // 7-point Gauss rule.
        if i % 2 == 1 {
            gauss = gauss + F::of(WG[i / 2]) * pair_sum;
        }
    }
    let kron = kron * half;
    let gauss = gauss * half;
    let err = (kron - gauss).to_f64().abs();
    Ok((kron, err))
}

/// Integrates `f` over `[a, b]` adaptively. A reversed interval negates the
/// result.
pub fn integrate<F: Real>(f: impl Fn(F) -> F, a: F, b: F, cfg: &QuadConfig<F>) -> Result<F> {
    if a == b {
        return Ok(F::zero());
    }
    if a > b {
        return integrate(f, b, a, cfg).map(|v| -v);
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::argument(
            "integrate expects finite endpoints; substitute or truncate first",
        ));
    }
    let (v0, e0) = kronrod_pair(&f, a, b)?;
    let mut heap = BinaryHeap::new();
    heap.push(Segment {
        a,
        b,
        value: v0,
        err: e0,
    });
    let mut total = v0;
    let mut total_err = e0;
    while total_err
        > cfg
            .abs_tol
            .to_f64()
            .max(cfg.rel_tol.to_f64() * total.to_f64().abs())
    {
        if heap.len() >= cfg.max_intervals {
            return Err(Error::Quadrature(format!(
                "tolerance not reached after {} subintervals (err ~ {:.3e})",
                heap.len(),
                total_err
            )));
        }
        let worst = heap.pop().expect("heap non-empty while error positive");
        let m = (worst.a + worst.b) * F::half();
        if m <= worst.a || m >= worst.b {
            // Interval at floating-point resolution; accept its estimate.
            total_err -= worst.err;
            let mut spent = worst;
            spent.err = 0.0;
            heap.push(spent);
            continue;
        }
        let (vl, el) = kronrod_pair(&f, worst.a, m)?;
        let (vr, er) = kronrod_pair(&f, m, worst.b)?;
        total = total - worst.value + vl + vr;
        total_err = total_err - worst.err + el + er;
        heap.push(Segment {
            a: worst.a,
            b: m,
            value: vl,
            err: el,
        });
        heap.push(Segment {
            a: m,
            b: worst.b,
            value: vr,
            err: er,
        });
    }
    Ok(total)
}

/// Integrates with forced subdivision at the given interior breakpoints
/// (integrand discontinuities, kinks).
pub fn integrate_with_breakpoints<F: Real>(
    f: impl Fn(F) -> F,
    a: F,
    b: F,
    breakpoints: &[F],
    cfg: &QuadConfig<F>,
) -> Result<F> {
    if a == b {
        return Ok(F::zero());
    }
    if a > b {
        return integrate_with_breakpoints(f, b, a, breakpoints, cfg).map(|v| -v);
    }
    let mut cuts: Vec<F> = breakpoints
        .iter()
        .copied()
        .filter(|&p| p > a && p < b)
        .collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
    cuts.dedup();
    let mut lo = a;
    let mut sum = F::zero();
    for &p in cuts.iter().chain(std::iter::once(&b)) {
        sum = sum + integrate(&f, lo, p, cfg)?;
        lo = p;
    }
    Ok(sum)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> QuadConfig<f64> {
        QuadConfig::default()
    }

    #[test]
    fn polynomial_exact() {
        let v = integrate(|x: f64| x * x, 0.0, 1.0, &cfg()).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn oscillatory() {
        let v = integrate(|x: f64| (10.0 * x).sin(), 0.0, std::f64::consts::PI, &cfg()).unwrap();
        let exact = (1.0 - (10.0 * std::f64::consts::PI).cos()) / 10.0;
        assert!((v - exact).abs() < 1e-10);
    }

    #[test]
    fn reversed_interval_negates() {
        let v = integrate(|x: f64| x, 1.0, 0.0, &cfg()).unwrap();
        assert!((v + 0.5).abs() < 1e-14);
    }

    #[test]
    fn integrable_endpoint_singularity() {
        // \int_0^1 x^{-1/2} dx = 2
        let v = integrate(|x: f64| x.sqrt().recip(), 0.0, 1.0, &cfg()).unwrap();
        assert!((v - 2.0).abs() < 1e-7, "got {v}");
    }

    #[test]
    fn divergent_integrand_detected() {
        let r = integrate(|x: f64| 1.0 / x, 0.0, 1.0, &cfg());
        assert!(matches!(
            r,
            Err(Error::Divergence(_)) | Err(Error::Quadrature(_))
        ));
    }

    #[test]
    fn breakpoints_handle_jumps() {
        let f = |x: f64| if x < 0.5 { 1.0 } else { 3.0 };
        let v = integrate_with_breakpoints(f, 0.0, 1.0, &[0.5], &cfg()).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_mass() {
        let v = integrate(
            |x: f64| (-x * x / 2.0).exp(),
            -8.0,
            8.0,
            &QuadConfig {
                abs_tol: 1e-12,
                rel_tol: 1e-12,
                max_intervals: 20_000,
            },
        )
        .unwrap();
        assert!((v - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-10);
    }
}
