//! Regular one-dimensional diffusions: scale function, speed measure, exit
//! probabilities and expected additive costs up to exit times.
//!
//! For a diffusion with drift `δ` and volatility `σ` on `(a_X, b_X)` the
//! scale function is
//!
//! ```text
//! L'(x) = exp(-∫_{x_ref}^x 2 δ(u) / σ²(u) du),    L(x) = ∫_{x_ref}^x L'(u) du,
//! ```
//!
//! and the speed density is `m(x) = 2 / (L'(x) σ²(x))`. Exit probabilities
//! are linear in `L`; expected costs integrate the Green kernel of the exit
//! interval against the cost and the speed measure. `L` enters every formula
//! through differences only, so the normalization point `x_ref` is
//! immaterial.

use crate::error::{Error, Result};
use crate::func::{real_fn, RealFn};
use crate::problem::CostSpec;
use crate::quad::{integrate, integrate_with_breakpoints, QuadConfig};
use crate::real::Real;

/// Declared endpoint behavior (Feller classification is not inferred).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryKind {
    Natural,
    Exit,
    Entrance,
    RegularReflecting,
}

/// How the scale function is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ScaleForm {
    /// Zero drift, unit-free scale: `L(x) = x - x_ref`. Used by the
    /// Brownian presets.
    Identity,
    /// Nested quadrature of the general formula.
    General,
}

/// A time-homogeneous regular diffusion on an interval.
#[derive(Clone)]
pub struct DiffusionSpec<F: Real> {
    drift: RealFn<F>,
    volatility: RealFn<F>,
    state_lo: F,
    state_hi: F,
    kind_lo: BoundaryKind,
    kind_hi: BoundaryKind,
    x_ref: F,
    scale_form: ScaleForm,
    quad: QuadConfig<F>,
}

impl<F: Real> DiffusionSpec<F> {
    /// Standard Brownian motion on the whole line.
    pub fn brownian() -> Self {
        DiffusionSpec {
            drift: real_fn(|_x: F| F::zero()),
            volatility: real_fn(|_x: F| F::one()),
            state_lo: F::neg_infinity(),
            state_hi: F::infinity(),
            kind_lo: BoundaryKind::Natural,
            kind_hi: BoundaryKind::Natural,
            x_ref: F::zero(),
            scale_form: ScaleForm::Identity,
            quad: QuadConfig::default(),
        }
    }

    /// Reflected Brownian motion `|B|` on `(0, ∞)`; the scale is the
    /// identity there.
    pub fn reflected_brownian() -> Self {
        DiffusionSpec {
            drift: real_fn(|_x: F| F::zero()),
            volatility: real_fn(|_x: F| F::one()),
            state_lo: F::zero(),
            state_hi: F::infinity(),
            kind_lo: BoundaryKind::RegularReflecting,
            kind_hi: BoundaryKind::Natural,
            x_ref: F::one(),
            scale_form: ScaleForm::Identity,
            quad: QuadConfig::default(),
        }
    }

    /// General diffusion from drift and volatility functions.
    pub fn new(
        drift: RealFn<F>,
        volatility: RealFn<F>,
        state: (F, F),
        kinds: (BoundaryKind, BoundaryKind),
        x_ref: F,
    ) -> Result<Self> {
        if !(state.0 < state.1) {
            return Err(Error::argument("state interval must have state_lo < state_hi"));
        }
        if !(x_ref > state.0 && x_ref < state.1) {
            return Err(Error::argument(
                "x_ref must lie strictly inside the state interval",
            ));
        }
        Ok(DiffusionSpec {
            drift,
            volatility,
            state_lo: state.0,
            state_hi: state.1,
            kind_lo: kinds.0,
            kind_hi: kinds.1,
            x_ref,
            scale_form: ScaleForm::General,
            quad: QuadConfig::default(),
        })
    }

    pub fn with_quad_config(mut self, quad: QuadConfig<F>) -> Self {
        self.quad = quad;
        self
    }

    /// Moves the scale normalization point. Payoffs and probabilities are
    /// invariant under this.
    pub fn with_x_ref(mut self, x_ref: F) -> Result<Self> {
        if !(x_ref > self.state_lo && x_ref < self.state_hi) {
            return Err(Error::argument(
                "x_ref must lie strictly inside the state interval",
            ));
        }
        self.x_ref = x_ref;
        Ok(self)
    }

    pub fn state_lo(&self) -> F {
        self.state_lo
    }

    pub fn state_hi(&self) -> F {
        self.state_hi
    }

    pub fn kind_lo(&self) -> BoundaryKind {
        self.kind_lo
    }

    pub fn kind_hi(&self) -> BoundaryKind {
        self.kind_hi
    }

    pub fn x_ref(&self) -> F {
        self.x_ref
    }

    pub fn drift(&self, x: F) -> F {
        (self.drift)(x)
    }

    pub fn volatility(&self, x: F) -> F {
        (self.volatility)(x)
    }

    pub fn quad_config(&self) -> &QuadConfig<F> {
        &self.quad
    }

    fn check_state(&self, x: F) -> Result<()> {
        if x > self.state_lo && x < self.state_hi {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "x = {} outside the open state interval ({}, {})",
                x.to_f64(),
                self.state_lo.to_f64(),
                self.state_hi.to_f64()
            )))
        }
    }

    /// Scale function and its derivative at `x`: `(L(x), L'(x))`.
    pub fn scale(&self, x: F) -> Result<(F, F)> {
        Ok((self.scale_value(x)?, self.scale_slope(x)?))
    }

    /// `L(x)`, normalized so that `L(x_ref) = 0`.
    pub fn scale_value(&self, x: F) -> Result<F> {
        self.check_state(x)?;
        match self.scale_form {
            ScaleForm::Identity => Ok(x - self.x_ref),
            ScaleForm::General => {
                let slope = |u: F| self.scale_slope_unchecked(u);
                integrate(slope, self.x_ref, x, &self.quad)
            }
        }
    }

    /// `L'(x) > 0`.
    pub fn scale_slope(&self, x: F) -> Result<F> {
        self.check_state(x)?;
        Ok(self.scale_slope_unchecked(x))
    }

    fn scale_slope_unchecked(&self, x: F) -> F {
        match self.scale_form {
            ScaleForm::Identity => F::one(),
            ScaleForm::General => {
                let ratio = |u: F| {
                    let s = (self.volatility)(u);
                    F::two() * (self.drift)(u) / (s * s)
                };
                match integrate(ratio, self.x_ref, x, &self.quad) {
                    Ok(i) => (-i).exp(),
                    Err(_) => F::nan(),
                }
            }
        }
    }

    /// Speed density `m(x) = 2 / (L'(x) σ²(x))`.
    pub fn speed_density(&self, x: F) -> Result<F> {
        self.check_state(x)?;
        let lp = self.scale_slope_unchecked(x);
        let s = (self.volatility)(x);
        let m = F::two() / (lp * s * s);
        if !m.is_finite() || m <= F::zero() {
            return Err(Error::domain(format!(
                "speed density not positive/finite at x = {}",
                x.to_f64()
            )));
        }
        Ok(m)
    }

    fn check_exit_interval(&self, a: F, b: F, x: F) -> Result<()> {
        if !(a < b) {
            return Err(Error::argument("exit interval needs a < b"));
        }
        if !(a >= self.state_lo && b <= self.state_hi && a.is_finite() && b.is_finite()) {
            return Err(Error::argument(
                "exit interval must be a finite subinterval of the state space",
            ));
        }
        if !(x >= a && x <= b) {
            return Err(Error::argument("x must lie in [a, b]"));
        }
        Ok(())
    }

    /// Probability of leaving `[a, b]` at the top when started from `x`:
    /// `(L(x) - L(a)) / (L(b) - L(a))`.
    pub fn exit_up_probability(&self, a: F, b: F, x: F) -> Result<F> {
        self.check_exit_interval(a, b, x)?;
        if x == a {
            return Ok(F::zero());
        }
        if x == b {
            return Ok(F::one());
        }
        let la = self.scale_boundary_value(a)?;
        let lb = self.scale_boundary_value(b)?;
        let lx = self.scale_value(x)?;
        Ok((lx - la) / (lb - la))
    }

    // Allows a or b to sit exactly on the state boundary for exit
    // computations (the scale may still be finite there, e.g. reflected
    // Brownian motion at 0).
    fn scale_boundary_value(&self, x: F) -> Result<F> {
        if x > self.state_lo && x < self.state_hi {
            return self.scale_value(x);
        }
        match self.scale_form {
            ScaleForm::Identity => Ok(x - self.x_ref),
            ScaleForm::General => Err(Error::domain(
                "scale at a state-space endpoint requires the identity form",
            )),
        }
    }

    /// Expected accumulated cost until exiting `[a, b]` from `x`:
    ///
    /// ```text
    /// E_x[∫_0^ρ c(X_u) du] = ∫_a^b G_ab(x, y) c(y) m(y) dy,
    /// G_ab(x, y) = (L(x∧y) - L(a)) (L(b) - L(x∨y)) / (L(b) - L(a)).
    /// ```
    pub fn expected_cost_to_exit(
        &self,
        cost: &CostSpec<F>,
        a: F,
        b: F,
        x: F,
    ) -> Result<F> {
        self.check_exit_interval(a, b, x)?;
        if let Some(lo) = cost.infinite_below() {
            if a < lo {
                return Err(Error::Divergence(format!(
                    "cost is +inf on [{}, {})",
                    a.to_f64(),
                    lo.to_f64()
                )));
            }
        }
        if let Some(hi) = cost.infinite_above() {
            if b > hi {
                return Err(Error::Divergence(format!(
                    "cost is +inf on ({}, {}]",
                    hi.to_f64(),
                    b.to_f64()
                )));
            }
        }
        let la = self.scale_boundary_value(a)?;
        let lb = self.scale_boundary_value(b)?;
        let lx = self.scale_value(x)?;
        let denom = lb - la;
        let weighted = |y: F| -> F {
            let ly = match self.scale_value(y) {
                Ok(v) => v,
                Err(_) => return F::nan(),
            };
            let m = match self.speed_density(y) {
                Ok(v) => v,
                Err(_) => return F::nan(),
            };
            let green = if y <= x {
                (ly - la) * (lb - lx)
            } else {
                (lx - la) * (lb - ly)
            };
            green / denom * cost.value(y) * m
        };
        let cuts = cost.discontinuities();
        let lower = integrate_with_breakpoints(&weighted, a, x, cuts, &self.quad)?;
        let upper = integrate_with_breakpoints(&weighted, x, b, cuts, &self.quad)?;
        Ok(lower + upper)
    }
}

impl<F: Real> std::fmt::Debug for DiffusionSpec<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiffusionSpec")
            .field("state_lo", &self.state_lo)
            .field("state_hi", &self.state_hi)
            .field("kind_lo", &self.kind_lo)
            .field("kind_hi", &self.kind_hi)
            .field("x_ref", &self.x_ref)
            .field("scale_form", &self.scale_form)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::func::real_fn;
    use crate::problem::CostSpec;

    fn ou() -> DiffusionSpec<f64> {
        DiffusionSpec::new(
            real_fn(|x: f64| -x),
            real_fn(|_x: f64| 1.0),
            (f64::NEG_INFINITY, f64::INFINITY),
            (BoundaryKind::Natural, BoundaryKind::Natural),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn brownian_scale_is_identity() {
        let d = DiffusionSpec::<f64>::brownian();
        let (l, lp) = d.scale(3.5).unwrap();
        assert_eq!(l, 3.5);
        assert_eq!(lp, 1.0);
        let (l0, lp0) = d.scale(0.0).unwrap();
        assert_eq!(l0, 0.0);
        assert!(lp0 > 0.0);
    }

    #[test]
    fn ou_scale_matches_series_oracle() {
        // L'(1) = e, L(1) = ∫_0^1 e^{u²} du = Σ 1/(n! (2n+1)).
        let d = ou();
        let (l, lp) = d.scale(1.0).unwrap();
        assert!((lp - std::f64::consts::E).abs() < 1e-9, "L' = {lp}");
        let mut series = 0.0;
        let mut term;
        let mut fact = 1.0;
        for n in 0..30 {
            if n > 0 {
                fact *= n as f64;
            }
            term = 1.0 / (fact * (2 * n + 1) as f64);
            series += term;
        }
        assert!((l - series).abs() < 1e-8, "L(1) = {l}, series = {series}");
        assert!((series - 1.4626517459071815).abs() < 1e-12);
    }

    #[test]
    fn scale_normalization_point() {
        let d = ou();
        let (l, lp) = d.scale(0.0).unwrap();
        assert_eq!(l, 0.0);
        assert!(lp > 0.0);
    }

    #[test]
    fn speed_density_values() {
        let bm = DiffusionSpec::<f64>::brownian();
        assert!((bm.speed_density(0.0).unwrap() - 2.0).abs() < 1e-14);

        let wide = DiffusionSpec::new(
            real_fn(|_x: f64| 0.0),
            real_fn(|_x: f64| 2.0),
            (f64::NEG_INFINITY, f64::INFINITY),
            (BoundaryKind::Natural, BoundaryKind::Natural),
            0.0,
        )
        .unwrap();
        assert!((wide.speed_density(1.7).unwrap() - 0.5).abs() < 1e-10);

        let d = ou();
        let m = d.speed_density(1.0).unwrap();
        assert!((m - 2.0 * (-1.0f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn domain_errors() {
        let r = DiffusionSpec::<f64>::reflected_brownian();
        assert!(matches!(r.scale(-0.5), Err(Error::Domain(_))));
        assert!(matches!(r.speed_density(0.0), Err(Error::Domain(_))));
    }

    #[test]
    fn exit_probability_brownian() {
        let d = DiffusionSpec::<f64>::brownian();
        let p = d.exit_up_probability(0.0, 1.0, 0.5).unwrap();
        assert!((p - 0.5).abs() < 1e-14);
        let near_bottom = d.exit_up_probability(0.0, 1.0, 1e-9).unwrap();
        assert!(near_bottom < 1e-8);
    }

    #[test]
    fn exit_probability_ou_symmetric() {
        // Odd drift makes L odd, so the middle point splits evenly.
        let d = ou();
        let p = d.exit_up_probability(-1.0, 1.0, 0.0).unwrap();
        assert!((p - 0.5).abs() < 1e-9, "p = {p}");
    }

    #[test]
    fn exit_probability_monotone_in_x() {
        let d = ou();
        let mut prev = 0.0;
        for i in 1..10 {
            let x = -1.0 + 0.2 * i as f64;
            let p = d.exit_up_probability(-1.0, 1.0, x).unwrap();
            assert!(p > prev);
            prev = p;
        }
    }

    #[test]
    fn exit_argument_errors() {
        let d = DiffusionSpec::<f64>::brownian();
        assert!(matches!(
            d.exit_up_probability(1.0, 0.0, 0.5),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            d.exit_up_probability(0.0, 1.0, 2.0),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn expected_cost_unit_cost_brownian() {
        // E_x[exit time of [a,b]] = (x-a)(b-x) for Brownian motion.
        let d = DiffusionSpec::<f64>::brownian();
        let c = CostSpec::constant(1.0);
        let v = d.expected_cost_to_exit(&c, 0.0, 1.0, 0.5).unwrap();
        assert!((v - 0.25).abs() < 1e-9, "v = {v}");
        let v2 = d.expected_cost_to_exit(&c, 0.0, 2.0, 0.5).unwrap();
        assert!((v2 - 0.75).abs() < 1e-9, "v2 = {v2}");
    }

    #[test]
    fn expected_cost_zero_cost() {
        let d = DiffusionSpec::<f64>::brownian();
        let c = CostSpec::constant(0.0);
        let v = d.expected_cost_to_exit(&c, -1.0, 1.0, 0.2).unwrap();
        assert!(v.abs() < 1e-12);
    }

    #[test]
    fn expected_cost_additive_in_cost() {
        let d = ou();
        let c1 = CostSpec::from_fn(real_fn(|x: f64| 1.0 + x * x));
        let c2 = CostSpec::from_fn(real_fn(|x: f64| (0.5 * x).exp()));
        let sum = CostSpec::from_fn(real_fn(|x: f64| 1.0 + x * x + (0.5 * x).exp()));
        let a = d.expected_cost_to_exit(&c1, -1.0, 2.0, 0.3).unwrap();
        let b = d.expected_cost_to_exit(&c2, -1.0, 2.0, 0.3).unwrap();
        let s = d.expected_cost_to_exit(&sum, -1.0, 2.0, 0.3).unwrap();
        assert!((a + b - s).abs() < 1e-8);
    }

    #[test]
    fn infinite_cost_region_diverges() {
        let d = DiffusionSpec::<f64>::brownian();
        let c = CostSpec::constant(1.0).with_infinite_below(0.5);
        assert!(matches!(
            d.expected_cost_to_exit(&c, 0.0, 1.0, 0.75),
            Err(Error::Divergence(_))
        ));
    }

    #[test]
    fn payoff_invariant_under_x_ref_shift() {
        // Exit probabilities and Green costs only see scale differences.
        let d1 = ou();
        let d2 = ou().with_x_ref(0.7).unwrap();
        let c = CostSpec::constant(2.0);
        let p1 = d1.exit_up_probability(-1.0, 1.5, 0.2).unwrap();
        let p2 = d2.exit_up_probability(-1.0, 1.5, 0.2).unwrap();
        assert!((p1 - p2).abs() < 1e-8);
        let e1 = d1.expected_cost_to_exit(&c, -1.0, 1.5, 0.2).unwrap();
        let e2 = d2.expected_cost_to_exit(&c, -1.0, 1.5, 0.2).unwrap();
        assert!((e1 - e2).abs() < 1e-8);
    }
}
