//! Reward, cost and problem containers for the optimal stopping problem
//!
//! ```text
//! V*(x, s) = sup_τ E_{x,s}[ φ(S_τ) - ∫_0^τ c(X_t) dt ].
//! ```
//!
//! The reward `φ` is non-decreasing and right-continuous with isolated
//! jumps and kinks; the cost `c` is non-negative, may vanish on declared
//! intervals and may be `+∞` outside a declared finite-cost range.

use crate::diffusion::DiffusionSpec;
use crate::error::{Error, Result};
use crate::func::{real_fn, RealFn};
use crate::real::Real;

/// A positive jump of the reward function.
#[derive(Debug, Clone, Copy)]
pub struct RewardJump<F> {
    /// Location (the reward is right-continuous here).
    pub at: F,
    /// Height `φ(at) - φ(at-) > 0`.
    pub size: F,
}

/// Non-decreasing, right-continuous reward with isolated jumps and kinks.
#[derive(Clone)]
pub struct RewardSpec<F: Real> {
    value: RealFn<F>,
    derivative: RealFn<F>,
    /// Jumps in descending order of location.
    jumps: Vec<RewardJump<F>>,
    /// Discontinuities of `φ'` (including jump locations), descending.
    kinks: Vec<F>,
    /// Above this point the reward is C¹ with a strictly positive slope
    /// (when such a point exists).
    r_phi: Option<F>,
    /// Supremum of the support of `φ'`; `None` means the reward keeps
    /// increasing all the way up. Above this point stopping at once is
    /// optimal.
    increase_sup: Option<F>,
    /// Optional C¹ companion lying below `φ` and agreeing with it above
    /// `r_phi`.
    smooth_companion: Option<RealFn<F>>,
}

impl<F: Real> RewardSpec<F> {
    /// φ(s) = s.
    pub fn identity() -> Self {
        RewardSpec {
            value: real_fn(|s: F| s),
            derivative: real_fn(|_s: F| F::one()),
            jumps: Vec::new(),
            kinks: Vec::new(),
            r_phi: Some(F::zero()),
            increase_sup: None,
            smooth_companion: Some(real_fn(|s: F| s)),
        }
    }

    /// φ(s) = s^p on `s >= 0` (power reward for reflected problems).
    pub fn power(p: F) -> Self {
        RewardSpec {
            value: real_fn(move |s: F| s.powf(p)),
            derivative: real_fn(move |s: F| p * s.powf(p - F::one())),
            jumps: Vec::new(),
            kinks: Vec::new(),
            r_phi: Some(F::one()),
            increase_sup: None,
            smooth_companion: None,
        }
    }

    /// φ(s) = height · 1_{s >= at}: a pure jump with flat plateaus on both
    /// sides.
    pub fn step(at: F, height: F) -> Self {
        RewardSpec {
            value: real_fn(move |s: F| if s >= at { height } else { F::zero() }),
            derivative: real_fn(|_s: F| F::zero()),
            jumps: vec![RewardJump { at, size: height }],
            kinks: vec![at],
            r_phi: None,
            increase_sup: Some(at),
            smooth_companion: None,
        }
    }

    /// φ(s) = min(s, cap): identity below the cap, constant above.
    pub fn capped_identity(cap: F) -> Self {
        RewardSpec {
            value: real_fn(move |s: F| s.min(cap)),
            derivative: real_fn(move |s: F| if s < cap { F::one() } else { F::zero() }),
            jumps: Vec::new(),
            kinks: vec![cap],
            r_phi: None,
            increase_sup: Some(cap),
            smooth_companion: None,
        }
    }

    /// Fully custom reward. Jumps and kinks must be supplied in
    /// descending order of location (the topmost first).
    pub fn from_parts(
        value: RealFn<F>,
        derivative: RealFn<F>,
        jumps: Vec<RewardJump<F>>,
        kinks: Vec<F>,
        r_phi: Option<F>,
        increase_sup: Option<F>,
    ) -> Result<Self> {
        if jumps.windows(2).any(|w| w[0].at <= w[1].at) {
            return Err(Error::argument("reward jumps must be strictly descending"));
        }
        if jumps.iter().any(|j| j.size <= F::zero()) {
            return Err(Error::argument("reward jumps must be strictly positive"));
        }
        let mut kinks = kinks;
        kinks.sort_by(|a, b| b.partial_cmp(a).unwrap());
        kinks.dedup();
        for j in &jumps {
            if !kinks.contains(&j.at) {
                kinks.push(j.at);
            }
        }
        kinks.sort_by(|a, b| b.partial_cmp(a).unwrap());
        Ok(RewardSpec {
            value,
            derivative,
            jumps,
            kinks,
            r_phi,
            increase_sup,
            smooth_companion: None,
        })
    }

    pub fn with_smooth_companion(mut self, companion: RealFn<F>) -> Self {
        self.smooth_companion = Some(companion);
        self
    }

    pub fn value(&self, s: F) -> F {
        (self.value)(s)
    }

    pub fn derivative(&self, s: F) -> F {
        (self.derivative)(s)
    }

    /// Left limit `φ(s-)`.
    pub fn left_value(&self, s: F) -> F {
        let v = self.value(s);
        match self.jumps.iter().find(|j| j.at == s) {
            Some(j) => v - j.size,
            None => v,
        }
    }

    pub fn jumps(&self) -> &[RewardJump<F>] {
        &self.jumps
    }

    pub fn kinks(&self) -> &[F] {
        &self.kinks
    }

    pub fn r_phi(&self) -> Option<F> {
        self.r_phi
    }

    pub fn increase_sup(&self) -> Option<F> {
        self.increase_sup
    }

    pub fn smooth_companion(&self) -> Option<&RealFn<F>> {
        self.smooth_companion.as_ref()
    }

    /// True when `φ' ≡ 0` on `(lo, hi)` (sampled at the midpoint; pieces
    /// between kinks are assumed to be either flat or strictly
    /// increasing).
    pub fn flat_on(&self, lo: F, hi: F) -> bool {
        let mid = (lo + hi) * F::half();
        self.derivative(mid) <= F::zero()
    }

    /// Sampled invariant checks; returns human-readable findings.
    pub fn validate(&self, lo: F, hi: F, samples: usize) -> Vec<String> {
        let mut findings = Vec::new();
        let n = samples.max(2);
        let step = (hi - lo) / F::from_usize(n - 1).unwrap();
        let mut prev = self.value(lo);
        for i in 1..n {
            let s = lo + step * F::from_usize(i).unwrap();
            let v = self.value(s);
            if v < prev - F::of(1e-12) {
                findings.push(format!("reward decreases near s = {}", s.to_f64()));
                break;
            }
            prev = v;
        }
        for i in 0..n {
            let s = lo + step * F::from_usize(i).unwrap();
            if self.derivative(s) < F::zero() {
                findings.push(format!("reward derivative negative at s = {}", s.to_f64()));
                break;
            }
        }
        if let Some(r) = self.r_phi {
            for i in 0..n {
                let s = r - F::one() + step * F::from_usize(i).unwrap();
                if s > hi {
                    break;
                }
                if self.derivative(s) <= F::zero() {
                    findings.push(format!(
                        "derivative not strictly positive at s = {} despite r_phi = {}",
                        s.to_f64(),
                        r.to_f64()
                    ));
                    break;
                }
            }
            if let Some(companion) = &self.smooth_companion {
                for i in 0..n {
                    let s = lo + step * F::from_usize(i).unwrap();
                    let c = companion(s);
                    if c > self.value(s) + F::of(1e-12) {
                        findings.push(format!(
                            "smooth companion exceeds reward at s = {}",
                            s.to_f64()
                        ));
                        break;
                    }
                    if s >= r && (c - self.value(s)).abs() > F::of(1e-12) {
                        findings.push(format!(
                            "smooth companion differs from reward above r_phi at s = {}",
                            s.to_f64()
                        ));
                        break;
                    }
                }
            }
        }
        findings
    }
}

impl<F: Real> std::fmt::Debug for RewardSpec<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RewardSpec")
            .field("jumps", &self.jumps)
            .field("kinks", &self.kinks)
            .field("r_phi", &self.r_phi)
            .field("increase_sup", &self.increase_sup)
            .finish()
    }
}

/// Non-negative running cost.
#[derive(Clone)]
pub struct CostSpec<F: Real> {
    value: RealFn<F>,
    /// Discontinuity points of `c`, ascending.
    discontinuities: Vec<F>,
    /// Open intervals where `c ≡ 0`.
    zero_intervals: Vec<(F, F)>,
    /// `c = +∞` strictly below this point.
    infinite_below: Option<F>,
    /// `c = +∞` strictly above this point.
    infinite_above: Option<F>,
}

impl<F: Real> CostSpec<F> {
    pub fn constant(c: F) -> Self {
        CostSpec {
            value: real_fn(move |_x: F| c),
            discontinuities: Vec::new(),
            zero_intervals: Vec::new(),
            infinite_below: None,
            infinite_above: None,
        }
    }

    /// `c(x) = coeff · x^exponent` (the power family used with reflected
    /// Brownian motion).
    pub fn power(coeff: F, exponent: F) -> Self {
        CostSpec {
            value: real_fn(move |x: F| coeff * x.powf(exponent)),
            discontinuities: Vec::new(),
            zero_intervals: Vec::new(),
            infinite_below: None,
            infinite_above: None,
        }
    }

    pub fn from_fn(value: RealFn<F>) -> Self {
        CostSpec {
            value,
            discontinuities: Vec::new(),
            zero_intervals: Vec::new(),
            infinite_below: None,
            infinite_above: None,
        }
    }

    pub fn with_discontinuities(mut self, mut points: Vec<F>) -> Self {
        points.sort_by(|a, b| a.partial_cmp(b).unwrap());
        points.dedup();
        self.discontinuities = points;
        self
    }

    pub fn with_zero_intervals(mut self, intervals: Vec<(F, F)>) -> Self {
        self.zero_intervals = intervals;
        self
    }

    pub fn with_infinite_below(mut self, lo: F) -> Self {
        self.infinite_below = Some(lo);
        self
    }

    pub fn with_infinite_above(mut self, hi: F) -> Self {
        self.infinite_above = Some(hi);
        self
    }

    /// Evaluates the cost, honoring the declared infinite regions.
    pub fn value(&self, x: F) -> F {
        if let Some(lo) = self.infinite_below {
            if x < lo {
                return F::infinity();
            }
        }
        if let Some(hi) = self.infinite_above {
            if x > hi {
                return F::infinity();
            }
        }
        (self.value)(x)
    }

    pub fn discontinuities(&self) -> &[F] {
        &self.discontinuities
    }

    pub fn zero_intervals(&self) -> &[(F, F)] {
        &self.zero_intervals
    }

    pub fn infinite_below(&self) -> Option<F> {
        self.infinite_below
    }

    pub fn infinite_above(&self) -> Option<F> {
        self.infinite_above
    }

    /// The declared zero interval containing `x`, if any.
    pub fn zero_interval_at(&self, x: F) -> Option<(F, F)> {
        self.zero_intervals
            .iter()
            .copied()
            .find(|&(a, b)| x > a && x < b)
    }

    /// Sampled invariant checks.
    pub fn validate(&self, lo: F, hi: F, samples: usize) -> Vec<String> {
        let mut findings = Vec::new();
        let n = samples.max(2);
        let step = (hi - lo) / F::from_usize(n - 1).unwrap();
        for i in 0..n {
            let x = lo + step * F::from_usize(i).unwrap();
            let c = self.value(x);
            if c < F::zero() {
                findings.push(format!("cost negative at x = {}", x.to_f64()));
                break;
            }
        }
        findings
    }
}

impl<F: Real> std::fmt::Debug for CostSpec<F> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CostSpec")
            .field("discontinuities", &self.discontinuities)
            .field("zero_intervals", &self.zero_intervals)
            .field("infinite_below", &self.infinite_below)
            .field("infinite_above", &self.infinite_above)
            .finish()
    }
}

/// A fully specified optimal stopping problem for the maximum process.
#[derive(Debug, Clone)]
pub struct StoppingProblem<F: Real> {
    pub diffusion: DiffusionSpec<F>,
    pub reward: RewardSpec<F>,
    pub cost: CostSpec<F>,
    pub start_x: F,
    pub start_s: F,
}

impl<F: Real> StoppingProblem<F> {
    pub fn new(
        diffusion: DiffusionSpec<F>,
        reward: RewardSpec<F>,
        cost: CostSpec<F>,
        start_x: F,
        start_s: F,
    ) -> Result<Self> {
        if !(start_x <= start_s) {
            return Err(Error::argument("start must satisfy x <= s"));
        }
        if !(start_x > diffusion.state_lo() && start_s < diffusion.state_hi()) {
            return Err(Error::argument(
                "start point must lie inside the state interval",
            ));
        }
        Ok(StoppingProblem {
            diffusion,
            reward,
            cost,
            start_x,
            start_s,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::DiffusionSpec;

    #[test]
    fn step_reward_left_values() {
        let r = RewardSpec::<f64>::step(5.0, 1.0);
        assert_eq!(r.value(4.999), 0.0);
        assert_eq!(r.value(5.0), 1.0);
        assert_eq!(r.left_value(5.0), 0.0);
        assert_eq!(r.increase_sup(), Some(5.0));
    }

    #[test]
    fn capped_identity_flats() {
        let r = RewardSpec::<f64>::capped_identity(0.0);
        assert_eq!(r.value(-1.0), -1.0);
        assert_eq!(r.value(2.0), 0.0);
        assert!(r.flat_on(0.0, 3.0));
        assert!(!r.flat_on(-2.0, -1.0));
    }

    #[test]
    fn from_parts_rejects_bad_jumps() {
        let v = real_fn(|s: f64| s);
        let d = real_fn(|_s: f64| 1.0);
        assert!(RewardSpec::from_parts(
            v.clone(),
            d.clone(),
            vec![
                RewardJump { at: 1.0, size: 1.0 },
                RewardJump { at: 2.0, size: 1.0 },
            ],
            vec![],
            None,
            None,
        )
        .is_err());
        assert!(RewardSpec::from_parts(
            v,
            d,
            vec![RewardJump { at: 1.0, size: -0.5 }],
            vec![],
            None,
            None,
        )
        .is_err());
    }

    #[test]
    fn cost_infinite_regions() {
        let c = CostSpec::constant(0.5)
            .with_infinite_below(-1.0)
            .with_infinite_above(1.0);
        assert_eq!(c.value(0.0), 0.5);
        assert_eq!(c.value(-2.0), f64::INFINITY);
        assert_eq!(c.value(1.5), f64::INFINITY);
        assert_eq!(c.value(1.0), 0.5);
    }

    #[test]
    fn zero_interval_lookup() {
        let c = CostSpec::constant(1.0).with_zero_intervals(vec![(0.5, 1.0)]);
        assert_eq!(c.zero_interval_at(0.75), Some((0.5, 1.0)));
        assert_eq!(c.zero_interval_at(0.5), None);
        assert_eq!(c.zero_interval_at(1.2), None);
    }

    #[test]
    fn problem_start_validation() {
        let d = DiffusionSpec::<f64>::brownian();
        assert!(StoppingProblem::new(
            d.clone(),
            RewardSpec::identity(),
            CostSpec::constant(0.5),
            1.0,
            0.0
        )
        .is_err());
        assert!(StoppingProblem::new(
            d,
            RewardSpec::identity(),
            CostSpec::constant(0.5),
            0.0,
            0.0
        )
        .is_ok());
    }

    #[test]
    fn identity_reward_validates_clean() {
        let r = RewardSpec::<f64>::identity();
        assert!(r.validate(-5.0, 5.0, 101).is_empty());
    }
}
