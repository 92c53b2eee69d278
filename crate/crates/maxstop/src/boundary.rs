//! Maximal-solution boundary solver for the optimal stopping problem of the
//! running maximum.
//!
//! The optimal rule stops when the diffusion falls to a boundary `g*(S)` of
//! its maximum. On every interval where the reward is smooth and increasing
//! the boundary solves
//!
//! ```text
//! g'(s) = φ'(s) σ²(g) L'(g) / ( 2 c(g) (L(s) - L(g)) ),
//! ```
//!
//! and `g*` is the *maximal* solution staying below the diagonal. The solver
//! integrates backward from a terminal point placed just under the diagonal:
//! going down in `s` the flow contracts onto the maximal solution, whereas
//! forward shooting repels from it. Robustness comes from a sweep: the
//! terminal offset is divided by 2 and 4, the terminal abscissa is doubled,
//! and the run is accepted once successive curves agree on the reporting
//! window. A sweep that never settles is the numerical signature of a
//! problem with no maximal solution below the diagonal, i.e. infinite
//! payoff.
//!
//! Special structure is handled exactly rather than smoothed over:
//!
//! * flats of the reward produce flats of the boundary (the ODE slope
//!   vanishes), and a flat piece that meets the diagonal turns into a
//!   stop-at-once (diagonal) segment until the reward starts increasing
//!   again;
//! * reward jumps produce boundary jumps; the left value is the maximizer
//!   of the exit-interval payoff decomposition, computed from the already
//!   solved part of the curve ([`jump_boundary_value`]);
//! * zero-cost intervals of `c` are never in the range of the boundary: the
//!   curve jumps across them at fixed `s` (the inverse ODE is regular
//!   there);
//! * when the curve reaches the lower state endpoint the boundary is
//!   clipped there; for entrance/regular-reflecting lower endpoints the
//!   clip is additionally flagged, since the limiting value is not covered
//!   by the natural/exit theory.
//!
//! Caveats: a cost vanishing *continuously* at the edge of a declared
//! zero-cost interval leaves the restarted ODE singular and is not
//! supported (the embedding constructions always jump to a positive value),
//! and a problem sitting exactly at an existence threshold converges too
//! slowly to distinguish from a divergent one.

use std::io::{BufRead, Write};

use crate::diffusion::BoundaryKind;
use crate::error::{Error, Result};
use crate::ode::{self, OdeConfig};
use crate::problem::StoppingProblem;
use crate::quad::integrate_with_breakpoints;
use crate::real::Real;
use crate::roots::golden_max;

/// Discretization and acceptance controls for [`solve_maximal_boundary`].
#[derive(Debug, Clone, Copy)]
pub struct SolverGrid<F> {
    /// Bottom of the reporting window.
    pub s_min: F,
    /// Top of the reporting window (also the base terminal abscissa).
    pub s_max: F,
    /// Terminal offset below the diagonal.
    pub eps_diag: F,
    /// Acceptance tolerance for the Richardson sweep.
    pub accept_tol: F,
    /// How many times the terminal abscissa may be doubled.
    pub max_doublings: u32,
    pub ode_abs_tol: F,
    pub ode_rel_tol: F,
    /// Number of probe points used when comparing curves.
    pub report_points: usize,
}

impl<F: Real> SolverGrid<F> {
    pub fn new(s_min: F, s_max: F) -> Self {
        SolverGrid {
            s_min,
            s_max,
            eps_diag: F::of(1e-6),
            accept_tol: F::of(1e-4),
            max_doublings: 6,
            ode_abs_tol: F::of(1e-10),
            ode_rel_tol: F::of(1e-8),
            report_points: 2001,
        }
    }
}

/// A jump of the boundary: `left = g(at-) < right = g(at+)`.
#[derive(Debug, Clone, Copy)]
pub struct Jump<F> {
    pub at: F,
    pub left: F,
    pub right: F,
}

/// Clip of the boundary at the lower state endpoint.
#[derive(Debug, Clone, Copy)]
pub struct ClipInfo<F> {
    /// The boundary equals the lower endpoint for all `s` below this.
    pub at_s: F,
    pub level: F,
    /// Set for entrance / regular-reflecting lower endpoints, where the
    /// limiting value is recorded as-is rather than justified by theory.
    pub flagged: bool,
}

/// Monotone piecewise-linear stopping boundary.
///
/// The grid is non-decreasing in `s`; a jump contributes two consecutive
/// entries with the same abscissa (left value first). Evaluation is
/// right-continuous at jumps.
#[derive(Debug, Clone)]
pub struct Boundary<F> {
    points: Vec<(F, F)>,
    jumps: Vec<Jump<F>>,
    clip: Option<ClipInfo<F>>,
}

impl<F: Real> Boundary<F> {
    /// Builds a boundary from `(s, g)` samples (ascending `s`, duplicates
    /// allowed exactly at jumps).
    pub fn from_points(
        points: Vec<(F, F)>,
        jumps: Vec<Jump<F>>,
        clip: Option<ClipInfo<F>>,
    ) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::argument("boundary needs at least two grid points"));
        }
        if points.windows(2).any(|w| w[0].0 > w[1].0) {
            return Err(Error::argument("boundary grid must be sorted in s"));
        }
        Ok(Boundary {
            points,
            jumps,
            clip,
        })
    }

    /// Samples a closure on a uniform grid (no jumps).
    pub fn from_fn(g: impl Fn(F) -> F, s_lo: F, s_hi: F, n: usize) -> Result<Self> {
        if !(s_lo < s_hi) || n < 2 {
            return Err(Error::argument("from_fn needs s_lo < s_hi and n >= 2"));
        }
        let step = (s_hi - s_lo) / F::from_usize(n - 1).unwrap();
        let points = (0..n)
            .map(|i| {
                let s = s_lo + step * F::from_usize(i).unwrap();
                (s, g(s))
            })
            .collect();
        Boundary::from_points(points, Vec::new(), None)
    }

    pub fn s_lo(&self) -> F {
        self.points.first().unwrap().0
    }

    pub fn s_hi(&self) -> F {
        self.points.last().unwrap().0
    }

    pub fn grid(&self) -> &[(F, F)] {
        &self.points
    }

    pub fn jumps(&self) -> &[Jump<F>] {
        &self.jumps
    }

    pub fn clip(&self) -> Option<&ClipInfo<F>> {
        self.clip.as_ref()
    }

    /// Right-continuous evaluation; errors outside the covered `s` range.
    pub fn eval(&self, s: F) -> Result<F> {
        if s < self.s_lo() || s > self.s_hi() {
            return Err(Error::domain(format!(
                "boundary undefined at s = {} (covered range [{}, {}])",
                s.to_f64(),
                self.s_lo().to_f64(),
                self.s_hi().to_f64()
            )));
        }
        // Last index with s_i <= s: right-continuity at duplicated abscissae.
        let idx = self.points.partition_point(|&(si, _)| si <= s);
        if idx == 0 {
            return Ok(self.points[0].1);
        }
        let (s0, g0) = self.points[idx - 1];
        if s0 == s || idx == self.points.len() {
            return Ok(g0);
        }
        let (s1, g1) = self.points[idx];
        if s1 == s0 {
            return Ok(g1);
        }
        let t = (s - s0) / (s1 - s0);
        Ok(g0 + t * (g1 - g0))
    }

    /// Left-limit evaluation (differs from [`eval`](Self::eval) only at
    /// jumps).
    pub fn eval_left(&self, s: F) -> Result<F> {
        if let Some(j) = self.jumps.iter().find(|j| j.at == s) {
            return Ok(j.left);
        }
        self.eval(s)
    }

    /// Evaluation that extends the last segment linearly above the covered
    /// range (useful when simulated maxima overshoot the solved window).
    pub fn eval_or_extend(&self, s: F) -> Result<F> {
        if s > self.s_hi() {
            let n = self.points.len();
            let (s1, g1) = self.points[n - 1];
            let (s0, g0) = self.points[n - 2];
            if s1 == s0 {
                return Ok(g1);
            }
            let slope = (g1 - g0) / (s1 - s0);
            return Ok(g1 + slope * (s - s1));
        }
        self.eval(s)
    }

    /// Largest |difference| against another boundary on `[lo, hi]`.
    pub fn sup_diff(&self, other: &Boundary<F>, lo: F, hi: F, n: usize) -> Result<F> {
        let n = n.max(2);
        let step = (hi - lo) / F::from_usize(n - 1).unwrap();
        let mut worst = F::zero();
        for i in 0..n {
            let s = lo + step * F::from_usize(i).unwrap();
            let d = (self.eval(s)? - other.eval(s)?).abs();
            worst = worst.max(d);
        }
        Ok(worst)
    }

    /// Writes the `s,g,side` CSV representation.
    pub fn write_csv(&self, w: &mut impl Write) -> std::io::Result<()> {
        writeln!(w, "s,g,side")?;
        let mut i = 0;
        while i < self.points.len() {
            let (s, g) = self.points[i];
            let dup = i + 1 < self.points.len() && self.points[i + 1].0 == s;
            if dup {
                writeln!(w, "{},{},left", s.to_f64(), g.to_f64())?;
                writeln!(w, "{},{},right", s.to_f64(), self.points[i + 1].1.to_f64())?;
                i += 2;
            } else {
                writeln!(w, "{},{},", s.to_f64(), g.to_f64())?;
                i += 1;
            }
        }
        Ok(())
    }

    /// Parses the CSV representation produced by
    /// [`write_csv`](Self::write_csv).
    pub fn read_csv(r: impl BufRead) -> Result<Self> {
        let mut points: Vec<(F, F)> = Vec::new();
        let mut jumps = Vec::new();
        let mut pending_left: Option<(F, F)> = None;
        for (lineno, line) in r.lines().enumerate() {
            let line = line.map_err(|e| Error::argument(format!("csv read: {e}")))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if lineno == 0 {
                if line != "s,g,side" {
                    return Err(Error::argument(format!(
                        "expected header 's,g,side', got {line:?}"
                    )));
                }
                continue;
            }
            let mut cols = line.split(',');
            let s: f64 = cols
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::argument(format!("bad s column on line {lineno}")))?;
            let g: f64 = cols
                .next()
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::argument(format!("bad g column on line {lineno}")))?;
            let side = cols.next().unwrap_or("");
            let (s, g) = (F::of(s), F::of(g));
            match side {
                "left" => {
                    points.push((s, g));
                    pending_left = Some((s, g));
                }
                "right" => {
                    let (ls, lg) = pending_left.take().ok_or_else(|| {
                        Error::argument(format!("'right' row without 'left' on line {lineno}"))
                    })?;
                    if ls != s {
                        return Err(Error::argument("left/right rows disagree on s".to_string()));
                    }
                    points.push((s, g));
                    jumps.push(Jump {
                        at: s,
                        left: lg,
                        right: g,
                    });
                }
                "" => points.push((s, g)),
                other => {
                    return Err(Error::argument(format!(
                        "unknown side {other:?} on line {lineno}"
                    )))
                }
            }
        }
        Boundary::from_points(points, jumps, None)
    }
}

/// Right-hand side of the boundary ODE at `(s, g)`.
///
/// Returns the `ZeroCost` signal when `c(g) = 0` (the slope is infinite
/// there; the solver crosses such intervals through the inverse equation)
/// and a singularity error on or above the diagonal. An infinite cost gives
/// slope zero.
pub fn ode_rhs<F: Real>(p: &StoppingProblem<F>, s: F, g: F) -> Result<F> {
    if g >= s {
        return Err(Error::Singularity(format!(
            "ode_rhs needs g < s, got g = {}, s = {}",
            g.to_f64(),
            s.to_f64()
        )));
    }
    let d = &p.diffusion;
    if g <= d.state_lo() || s >= d.state_hi() {
        return Err(Error::domain(
            "ode_rhs arguments outside the open state interval",
        ));
    }
    let phi_prime = p.reward.derivative(s);
    if phi_prime == F::zero() {
        return Ok(F::zero());
    }
    let c = p.cost.value(g);
    if c == F::zero() {
        return Err(Error::ZeroCost { at: g.to_f64() });
    }
    if c == F::infinity() {
        return Ok(F::zero());
    }
    let sigma = d.volatility(g);
    let lp = d.scale_slope(g)?;
    let ls = d.scale_value(s)?;
    let lg = d.scale_value(g)?;
    let val = phi_prime * sigma * sigma * lp / (F::two() * c * (ls - lg));
    if !val.is_finite() {
        return Err(Error::Singularity(format!(
            "non-finite slope at (s, g) = ({}, {})",
            s.to_f64(),
            g.to_f64()
        )));
    }
    Ok(val)
}

/// `∫_lower^x (L(x) - L(u)) c(u) m(u) du`, the running-cost part of the
/// payoff formula.
fn payoff_integral<F: Real>(p: &StoppingProblem<F>, lower: F, x: F) -> Result<F> {
    if lower >= x {
        return Ok(F::zero());
    }
    if let Some(lo) = p.cost.infinite_below() {
        if lower < lo {
            return Err(Error::Divergence(
                "payoff integral crosses an infinite-cost region".into(),
            ));
        }
    }
    if let Some(hi) = p.cost.infinite_above() {
        if x > hi {
            return Err(Error::Divergence(
                "payoff integral crosses an infinite-cost region".into(),
            ));
        }
    }
    let d = &p.diffusion;
    let lx = d.scale_value(x)?;
    let f = |u: F| {
        let lu = match d.scale_value(u) {
            Ok(v) => v,
            Err(_) => return F::nan(),
        };
        let m = match d.speed_density(u) {
            Ok(v) => v,
            Err(_) => return F::nan(),
        };
        let c = p.cost.value(u);
        if c == F::infinity() {
            return F::infinity();
        }
        (lx - lu) * c * m
    };
    integrate_with_breakpoints(f, lower, x, p.cost.discontinuities(), d.quad_config())
}

/// Payoff `V(x, s) = φ(s) + ∫_{x ∧ g(s)}^{x} (L(x) - L(u)) c(u) m(u) du`.
pub fn payoff<F: Real>(p: &StoppingProblem<F>, g: &Boundary<F>, x: F, s: F) -> Result<F> {
    if !(x <= s) {
        return Err(Error::argument("payoff needs x <= s"));
    }
    if x <= p.diffusion.state_lo() || s >= p.diffusion.state_hi() {
        return Err(Error::domain("payoff point outside the state interval"));
    }
    let gs = g.eval(s)?;
    let lower = x.min(gs);
    Ok(p.reward.value(s) + payoff_integral(p, lower, x)?)
}

/// Left boundary value at a reward jump `s0`, given the payoff
/// `v_right = V(s0, s0)` of the already-solved part and the left reward
/// limit `phi_left = φ(s0-)`.
///
/// The value is the maximizer over `a` of the exit-interval decomposition
///
/// ```text
/// V^a(x, x) = (v_right - phi_left) · P_x(exit [a, s0] at top)
///             - E_x[cost to exit [a, s0]] + phi_left,
/// ```
///
/// which does not depend on the probe `x` in a left neighborhood of `s0`.
pub fn jump_boundary_value<F: Real>(
    p: &StoppingProblem<F>,
    v_right: F,
    s0: F,
    phi_left: F,
) -> Result<F> {
    let probe = default_jump_probe(p, s0);
    jump_boundary_value_with_probe(p, v_right, s0, phi_left, probe)
}

pub(crate) fn default_jump_probe<F: Real>(p: &StoppingProblem<F>, s0: F) -> F {
    let span = (s0 - p.diffusion.state_lo()).min(F::one());
    s0 - span * F::of(1e-3)
}

/// Same as [`jump_boundary_value`] with an explicit probe point
/// `x ∈ (a, s0)`; the result must not depend on it.
pub fn jump_boundary_value_with_probe<F: Real>(
    p: &StoppingProblem<F>,
    v_right: F,
    s0: F,
    phi_left: F,
    x: F,
) -> Result<F> {
    if !(x < s0) {
        return Err(Error::argument("probe must satisfy x < s0"));
    }
    let delta = v_right - phi_left;
    if delta <= F::zero() {
        // Degenerate jump: nothing to gain by waiting, the boundary touches
        // the jump point.
        return Ok(s0);
    }
    let d = &p.diffusion;
    let objective = |a: F| -> Result<F> {
        let p_up = d.exit_up_probability(a, s0, x)?;
        let cost = d.expected_cost_to_exit(&p.cost, a, s0, x)?;
        Ok(delta * p_up - cost)
    };
    let scale = F::one().max(s0.abs());
    let xtol = F::of(1e-9) * scale;
    let mut width = scale;
    let hard_lo = d.state_lo() + F::of(1e-12) * scale;
    loop {
        let lo = (s0 - width).max(hard_lo);
        let hi = x - (x - lo) * F::of(1e-6) - xtol;
        if !(lo < hi) {
            return Err(Error::NoInteriorMax(format!(
                "empty search bracket at s0 = {}",
                s0.to_f64()
            )));
        }
        let (amax, _) = golden_max(objective, lo, hi, xtol)?;
        let at_edge = amax - lo < (hi - lo) * F::of(1e-3);
        if !at_edge || lo <= hard_lo {
            return Ok(amax);
        }
        width = width * F::of(4.0);
        if width > F::of(1e7) * scale {
            return Err(Error::NoInteriorMax(format!(
                "maximizer keeps escaping to -inf at s0 = {} (cost too small)",
                s0.to_f64()
            )));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    Curve,
    Diagonal,
}

/// Raw single-pass output.
struct Pass<F> {
    /// Descending in s while building; reversed at the end.
    points: Vec<(F, F)>,
    jumps: Vec<Jump<F>>,
    clip: Option<ClipInfo<F>>,
}

impl<F: Real> Pass<F> {
    fn push(&mut self, s: F, g: F) {
        if let Some(&(ls, lg)) = self.points.last() {
            if ls == s && lg == g {
                return;
            }
        }
        self.points.push((s, g));
    }

    fn into_boundary(mut self) -> Result<Boundary<F>> {
        self.points.reverse();
        self.jumps.reverse();
        Boundary::from_points(self.points, self.jumps, self.clip)
    }
}

/// Levels in `g` that interrupt an integration leg.
#[derive(Debug, Clone, Copy)]
enum LevelKind<F> {
    /// Lower state endpoint: clip and finish.
    Clip,
    /// Top of a zero-cost interval: jump across to its bottom.
    ZeroInterval { bottom: F },
    /// Cost discontinuity: restart the integrator cleanly.
    Restart,
}

fn next_level_below<F: Real>(p: &StoppingProblem<F>, g: F) -> Option<(F, LevelKind<F>)> {
    let mut best: Option<(F, LevelKind<F>)> = None;
    let mut consider = |level: F, kind: LevelKind<F>| {
        if level < g && best.map_or(true, |(b, _)| level > b) {
            best = Some((level, kind));
        }
    };
    let lo = p.diffusion.state_lo();
    if lo.is_finite() {
        consider(lo, LevelKind::Clip);
    }
    for &(a, b) in p.cost.zero_intervals() {
        consider(b, LevelKind::ZeroInterval { bottom: a });
    }
    for &dpt in p.cost.discontinuities() {
        consider(dpt, LevelKind::Restart);
    }
    if let Some(edge) = p.cost.infinite_below() {
        consider(edge, LevelKind::Restart);
    }
    best
}

struct PassDriver<'a, F: Real> {
    p: &'a StoppingProblem<F>,
    grid: &'a SolverGrid<F>,
    eps: F,
    ode_cfg: OdeConfig<F>,
    out: Pass<F>,
}

impl<'a, F: Real> PassDriver<'a, F> {
    /// Integrates one curve leg from `(s_from, g_from)` down to `s_to`,
    /// honoring level events. Returns the state where it stopped and
    /// whether the diagonal was touched or the curve was clipped.
    fn curve_leg(&mut self, s_from: F, g_from: F, s_to: F) -> Result<LegEnd<F>> {
        let mut s_cur = s_from;
        let mut g_cur = g_from;
        let diag_tol = self.eps * F::of(0.25);
        loop {
            let level = next_level_below(self.p, g_cur);
            let level_val = level.map(|(v, _)| v);
            let monitor = move |s: F, g: F| {
                let mut dist = (s - g) - diag_tol;
                if let Some(v) = level_val {
                    dist = dist.min(g - v);
                }
                dist
            };
            let rhs = |s: F, g: F| ode_rhs(self.p, s, g);
            let out = &mut self.out;
            let end = ode::integrate(
                rhs,
                s_cur,
                g_cur,
                s_to,
                &self.ode_cfg,
                monitor,
                |s, g| out.push(s, g),
            )?;
            if !end.event {
                return Ok(LegEnd::Reached { g: end.y });
            }
            // Which monitor fired?
            let gap = end.t - end.y;
            if gap <= diag_tol * F::of(1.000001) {
                return Ok(LegEnd::DiagonalTouch { s: end.t });
            }
            let (lv, kind) = level.expect("level event fired without a level");
            match kind {
                LevelKind::Clip => {
                    self.clip_from(end.t, lv);
                    return Ok(LegEnd::Clipped);
                }
                LevelKind::ZeroInterval { bottom } => {
                    // The inverse equation is flat across the interval: the
                    // boundary jumps from its top to its bottom at fixed s.
                    self.out.push(end.t, lv);
                    self.out.push(end.t, bottom);
                    self.out.jumps.push(Jump {
                        at: end.t,
                        left: bottom,
                        right: lv,
                    });
                    if bottom <= self.p.diffusion.state_lo() {
                        self.clip_from(end.t, self.p.diffusion.state_lo());
                        return Ok(LegEnd::Clipped);
                    }
                    s_cur = end.t;
                    g_cur = bottom;
                }
                LevelKind::Restart => {
                    self.out.push(end.t, lv);
                    s_cur = end.t;
                    // Nudge just below the discontinuity so the next leg
                    // evaluates the cost on the correct side.
                    g_cur = lv - (F::of(1e-14) * (F::one() + lv.abs()));
                }
            }
            if s_cur <= s_to {
                return Ok(LegEnd::Reached { g: g_cur });
            }
        }
    }

    fn clip_from(&mut self, s_at: F, level: F) {
        let flagged = matches!(
            self.p.diffusion.kind_lo(),
            BoundaryKind::Entrance | BoundaryKind::RegularReflecting
        );
        self.out.push(s_at, level);
        self.out.push(self.grid.s_min, level);
        self.out.clip = Some(ClipInfo {
            at_s: s_at,
            level,
            flagged,
        });
    }

    /// Payoff `V(s0, s0)` of the already-solved part, with right boundary
    /// value `g_right` at `s0`.
    fn payoff_at_jump(&self, s0: F, g_right: F) -> Result<F> {
        let lower = g_right.min(s0);
        Ok(self.p.reward.value(s0) + payoff_integral(self.p, lower, s0)?)
    }
}

enum LegEnd<F> {
    Reached { g: F },
    DiagonalTouch { s: F },
    Clipped,
}

fn solve_pass<F: Real>(
    p: &StoppingProblem<F>,
    grid: &SolverGrid<F>,
    s_top: F,
    eps: F,
) -> Result<Boundary<F>> {
    let state_hi = p.diffusion.state_hi();
    let s_top = if state_hi.is_finite() {
        s_top.min(state_hi - eps)
    } else {
        s_top
    };
    let increase_sup = p.reward.increase_sup();
    let s_start = match increase_sup {
        Some(r) => r.min(s_top),
        None => s_top,
    };

    let window = grid.s_max - grid.s_min;
    let ode_cfg = OdeConfig {
        abs_tol: grid.ode_abs_tol,
        rel_tol: grid.ode_rel_tol,
        max_step: Some(window / F::of(800.0)),
        max_steps: 40_000_000,
    };
    let mut drv = PassDriver {
        p,
        grid,
        eps,
        ode_cfg,
        out: Pass {
            points: Vec::new(),
            jumps: Vec::new(),
            clip: None,
        },
    };

    // s-events below the start: kinks (which include jump locations).
    let mut events: Vec<F> = p
        .reward
        .kinks()
        .iter()
        .copied()
        .filter(|&k| k < s_start && k > grid.s_min)
        .collect();
    events.sort_by(|a, b| b.partial_cmp(a).unwrap());
    events.push(grid.s_min);

    let mut mode;
    let mut s_cur = s_start;
    let mut g_cur;

    if s_start < s_top {
        // Reward flat above s_start: stopping at once is optimal there.
        drv.out.push(s_top.max(grid.s_max), s_top.max(grid.s_max));
        drv.out.push(s_start, s_start);
        mode = Mode::Diagonal;
        g_cur = s_start;
    } else {
        mode = Mode::Curve;
        g_cur = s_start - eps;
        drv.out.push(s_cur, g_cur);
    }

    if s_start <= grid.s_min {
        // The whole window sits in the stop-at-once region.
        let mut pass = drv.out;
        pass.push(grid.s_min, grid.s_min);
        return pass.into_boundary();
    }

    'events: for &s_ev in &events {
        // Advance from s_cur down to s_ev in the current mode.
        match mode {
            Mode::Diagonal => {
                // Stays on the diagonal across flat pieces.
                drv.out.push(s_ev, s_ev);
                g_cur = s_ev;
            }
            Mode::Curve => {
                if p.reward.flat_on(s_ev, s_cur) {
                    // Slope is exactly zero: boundary constant; it meets the
                    // diagonal at s = g_cur if that lies inside the piece.
                    if g_cur > s_ev {
                        drv.out.push(g_cur, g_cur);
                        mode = Mode::Diagonal;
                        drv.out.push(s_ev, s_ev);
                        g_cur = s_ev;
                    } else {
                        drv.out.push(s_ev, g_cur);
                    }
                } else {
                    match drv.curve_leg(s_cur, g_cur, s_ev)? {
                        LegEnd::Reached { g } => g_cur = g,
                        LegEnd::DiagonalTouch { s } => {
                            mode = Mode::Diagonal;
                            drv.out.push(s, s);
                            drv.out.push(s_ev, s_ev);
                            g_cur = s_ev;
                        }
                        LegEnd::Clipped => break 'events,
                    }
                }
            }
        }
        s_cur = s_ev;
        if s_cur <= grid.s_min {
            break;
        }

        // Handle the event itself.
        if let Some(jump) = p.reward.jumps().iter().find(|j| j.at == s_ev) {
            let g_right = match mode {
                Mode::Curve => g_cur,
                Mode::Diagonal => s_ev,
            };
            let v_right = drv.payoff_at_jump(s_ev, g_right)?;
            let phi_left = p.reward.value(s_ev) - jump.size;
            let a_star = jump_boundary_value(p, v_right, s_ev, phi_left)?;
            drv.out.push(s_ev, g_right);
            drv.out.push(s_ev, a_star);
            drv.out.jumps.push(Jump {
                at: s_ev,
                left: a_star,
                right: g_right,
            });
            if a_star <= p.diffusion.state_lo() {
                drv.clip_from(s_ev, p.diffusion.state_lo());
                break 'events;
            }
            g_cur = a_star;
            mode = Mode::Curve;
        } else if mode == Mode::Diagonal {
            // Kink: if the reward starts increasing below, the boundary
            // detaches from the diagonal.
            let next_ev = events
                .iter()
                .copied()
                .find(|&e| e < s_ev)
                .unwrap_or(grid.s_min);
            if !p.reward.flat_on(next_ev, s_ev) {
                mode = Mode::Curve;
                g_cur = s_ev - eps;
                drv.out.push(s_ev, g_cur);
            }
        }
    }

    drv.out.into_boundary()
}

/// Result of a solve, including the sweep diagnostics.
#[derive(Debug, Clone)]
pub struct SolveReport<F> {
    pub boundary: Boundary<F>,
    /// Successive sup-differences observed while doubling the terminal
    /// abscissa.
    pub sweep_diffs: Vec<F>,
}

fn clip_pos<F: Real>(b: &Boundary<F>) -> F {
    b.clip().map(|c| c.at_s).unwrap_or(F::neg_infinity())
}

/// Computes the maximal boundary by backward integration with a
/// terminal-offset and terminal-abscissa sweep.
///
/// Fails with [`Error::InfinitePayoff`] when the sweep never stabilizes,
/// which is the numerical signature of the non-existence of a maximal
/// solution below the diagonal.
pub fn solve_maximal_boundary<F: Real>(
    p: &StoppingProblem<F>,
    grid: &SolverGrid<F>,
) -> Result<Boundary<F>> {
    solve_maximal_boundary_report(p, grid).map(|r| r.boundary)
}

pub fn solve_maximal_boundary_report<F: Real>(
    p: &StoppingProblem<F>,
    grid: &SolverGrid<F>,
) -> Result<SolveReport<F>> {
    if !(grid.s_min < grid.s_max) {
        return Err(Error::argument("solver grid needs s_min < s_max"));
    }
    let n = grid.report_points;
    let mut prev: Option<Boundary<F>> = None;
    let mut diffs: Vec<F> = Vec::new();
    let pinned_top = p
        .reward
        .increase_sup()
        .map_or(false, |r| r <= grid.s_max);
    for k in 0..=grid.max_doublings {
        let s_top = grid.s_max * F::of(f64::powi(2.0, k as i32));
        let b1 = solve_pass(p, grid, s_top, grid.eps_diag)?;
        let b2 = solve_pass(p, grid, s_top, grid.eps_diag * F::half())?;
        let b3 = solve_pass(p, grid, s_top, grid.eps_diag * F::of(0.25))?;
        let d_eps = b1
            .sup_diff(&b3, grid.s_min, grid.s_max, n)?
            .max(b2.sup_diff(&b3, grid.s_min, grid.s_max, n)?);
        if let Some(prev_b) = &prev {
            let d = prev_b.sup_diff(&b3, grid.s_min, grid.s_max, n)?;
            let clip_drift = (clip_pos(prev_b) - clip_pos(&b3)).abs();
            let clip_stable = clip_drift.is_nan() || clip_drift < grid.accept_tol * F::of(100.0);
            diffs.push(d);
            if d < grid.accept_tol && d_eps < grid.accept_tol && clip_stable {
                return Ok(SolveReport {
                    boundary: b3,
                    sweep_diffs: diffs,
                });
            }
        } else if pinned_top && d_eps < grid.accept_tol {
            // The terminal point sits at the top of the reward's increase
            // region; doubling the abscissa cannot move it.
            return Ok(SolveReport {
                boundary: b3,
                sweep_diffs: diffs,
            });
        }
        prev = Some(b3);
    }
    Err(Error::InfinitePayoff(format!(
        "sweep did not stabilize after {} doublings (diffs: {:?})",
        grid.max_doublings,
        diffs.iter().map(|d| d.to_f64()).collect::<Vec<_>>()
    )))
}

/// Integrates the ODE *forward* from `(s1, g1)`; returns the abscissa where
/// the curve meets the diagonal, or `None` if it survives to `s_stop`.
///
/// Curves started above the maximal solution must cross the diagonal; this
/// is the numerical maximality test.
pub fn forward_diagonal_crossing<F: Real>(
    p: &StoppingProblem<F>,
    s1: F,
    g1: F,
    s_stop: F,
) -> Result<Option<F>> {
    if !(g1 < s1) {
        return Err(Error::argument("forward check needs g1 < s1"));
    }
    let scale = F::one().max(s1.abs());
    let touch = F::of(1e-7) * scale;
    let cfg = OdeConfig {
        abs_tol: F::of(1e-12),
        rel_tol: F::of(1e-10),
        max_step: Some((s_stop - s1).abs() / F::of(200.0)),
        max_steps: 10_000_000,
    };
    let end = ode::integrate(
        |s, g| ode_rhs(p, s, g),
        s1,
        g1,
        s_stop,
        &cfg,
        |s, g| (s - g) - touch,
        |_, _| {},
    )?;
    Ok(if end.event { Some(end.t) } else { None })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffusion::DiffusionSpec;
    use crate::problem::{CostSpec, RewardSpec, StoppingProblem};

    fn linear_problem() -> StoppingProblem<f64> {
        StoppingProblem::new(
            DiffusionSpec::brownian(),
            RewardSpec::identity(),
            CostSpec::constant(0.5),
            0.0,
            0.0,
        )
        .unwrap()
    }

    fn power_problem(c: f64) -> StoppingProblem<f64> {
        StoppingProblem::new(
            DiffusionSpec::reflected_brownian(),
            RewardSpec::power(2.0),
            CostSpec::constant(c),
            1.0,
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn rhs_linear_case() {
        let p = linear_problem();
        let v = ode_rhs(&p, 2.0, 1.0).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rhs_zero_when_reward_flat() {
        let p = StoppingProblem::new(
            DiffusionSpec::brownian(),
            RewardSpec::capped_identity(0.0),
            CostSpec::constant(0.5),
            0.0,
            0.0,
        )
        .unwrap();
        assert_eq!(ode_rhs(&p, 3.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn rhs_power_case_stationarity() {
        // At (s, alpha s) the slope equals alpha for the larger root of
        // alpha - alpha^2 = 1/8 (p = 2, c = 8).
        let p = power_problem(8.0);
        let alpha = 0.5 * (1.0 + 0.5f64.sqrt());
        let v = ode_rhs(&p, 1.0, alpha).unwrap();
        assert!((v - alpha).abs() < 1e-12, "rhs = {v}, alpha = {alpha}");
        // Rounded value quoted to four decimals: rhs over g close to one.
        let ratio = ode_rhs(&p, 1.0, 0.8536).unwrap() / 0.8536;
        assert!((ratio - 1.0004).abs() < 5e-4, "ratio = {ratio}");
    }

    #[test]
    fn rhs_errors() {
        let p = linear_problem();
        assert!(matches!(ode_rhs(&p, 1.0, 1.0), Err(Error::Singularity(_))));
        let pz = StoppingProblem::new(
            DiffusionSpec::brownian(),
            RewardSpec::identity(),
            CostSpec::constant(0.0),
            0.0,
            0.0,
        )
        .unwrap();
        assert!(matches!(ode_rhs(&pz, 2.0, 1.0), Err(Error::ZeroCost { .. })));
    }

    #[test]
    fn linear_boundary_solved() {
        let p = linear_problem();
        let grid = SolverGrid::new(0.0, 10.0);
        let b = solve_maximal_boundary(&p, &grid).unwrap();
        let mut worst: f64 = 0.0;
        for i in 0..=200 {
            let s = 10.0 * i as f64 / 200.0;
            let d = (b.eval(s).unwrap() - (s - 1.0)).abs();
            worst = worst.max(d);
        }
        assert!(worst < 1e-3, "sup|g - (s-1)| = {worst}");
    }

    #[test]
    fn power_boundary_slope() {
        let p = power_problem(8.0);
        let grid = SolverGrid::new(0.05, 10.0);
        let b = solve_maximal_boundary(&p, &grid).unwrap();
        let alpha = 0.5 * (1.0 + 0.5f64.sqrt());
        for &s in &[1.0, 2.5, 5.0, 9.0] {
            let slope = b.eval(s).unwrap() / s;
            assert!((slope - alpha).abs() < 1e-3, "slope at {s} = {slope}");
        }
    }

    #[test]
    fn power_below_threshold_is_infinite() {
        let p = power_problem(3.0);
        let grid = SolverGrid::new(0.05, 10.0);
        match solve_maximal_boundary(&p, &grid) {
            Err(Error::InfinitePayoff(_)) => {}
            other => panic!("expected INFINITE_PAYOFF, got {other:?}"),
        }
    }

    #[test]
    fn payoff_linear_case() {
        let p = linear_problem();
        let b = Boundary::from_fn(|s: f64| s - 1.0, -2.0, 12.0, 400).unwrap();
        // Stopping region: V = phi(s).
        let v = payoff(&p, &b, 1.5, 3.0).unwrap();
        assert!((v - 3.0).abs() < 1e-10);
        // On the diagonal: V = s + 1/2.
        let v = payoff(&p, &b, 3.0, 3.0).unwrap();
        assert!((v - 3.5).abs() < 1e-8, "v = {v}");
        // Interior: V = 3 + 0.5 * 0.25.
        let v = payoff(&p, &b, 2.5, 3.0).unwrap();
        assert!((v - 3.125).abs() < 1e-8, "v = {v}");
    }

    #[test]
    fn jump_left_value_brownian() {
        // Brownian, unit cost: a* = s0 - sqrt(delta / c).
        let p = StoppingProblem::new(
            DiffusionSpec::brownian(),
            RewardSpec::step(5.0, 1.0),
            CostSpec::constant(1.0),
            0.0,
            0.0,
        )
        .unwrap();
        let a = jump_boundary_value(&p, 1.0, 5.0, 0.0).unwrap();
        assert!((a - 4.0).abs() < 1e-5, "a = {a}");
        let a = jump_boundary_value(&p, 4.0, 5.0, 0.0).unwrap();
        assert!((a - 3.0).abs() < 1e-5, "a = {a}");
        // Degenerate jump: a* -> s0.
        let a = jump_boundary_value(&p, 1e-6, 5.0, 0.0).unwrap();
        assert!((a - 5.0).abs() < 2e-3, "a = {a}");
    }

    #[test]
    fn jump_left_value_probe_independent() {
        let p = StoppingProblem::new(
            DiffusionSpec::brownian(),
            RewardSpec::step(5.0, 1.0),
            CostSpec::constant(1.0),
            0.0,
            0.0,
        )
        .unwrap();
        let a1 = jump_boundary_value_with_probe(&p, 1.0, 5.0, 0.0, 4.999).unwrap();
        let a2 = jump_boundary_value_with_probe(&p, 1.0, 5.0, 0.0, 4.9).unwrap();
        assert!((a1 - a2).abs() < 1e-6, "a1 = {a1}, a2 = {a2}");
    }

    #[test]
    fn step_reward_full_solve() {
        let p = StoppingProblem::new(
            DiffusionSpec::brownian(),
            RewardSpec::step(5.0, 1.0),
            CostSpec::constant(1.0),
            0.0,
            0.0,
        )
        .unwrap();
        let grid = SolverGrid::new(0.0, 8.0);
        let b = solve_maximal_boundary(&p, &grid).unwrap();
        // Above the jump: diagonal. Plateau below: g = 4 until it meets the
        // diagonal, then diagonal again.
        assert!((b.eval(6.0).unwrap() - 6.0).abs() < 1e-9);
        assert!((b.eval(4.5).unwrap() - 4.0).abs() < 1e-4);
        assert!((b.eval(2.0).unwrap() - 2.0).abs() < 1e-9);
        assert_eq!(b.jumps().len(), 1);
        let j = b.jumps()[0];
        assert!((j.at - 5.0).abs() < 1e-12);
        assert!((j.left - 4.0).abs() < 1e-4);
        assert!((j.right - 5.0).abs() < 1e-9);
        assert!((b.eval_left(5.0).unwrap() - 4.0).abs() < 1e-4);
    }

    #[test]
    fn maximality_perturbation() {
        let p = linear_problem();
        let grid = SolverGrid::new(0.0, 10.0);
        let b = solve_maximal_boundary(&p, &grid).unwrap();
        for &s1 in &[1.0, 2.0, 3.0] {
            for &eps in &[1e-2, 1e-3] {
                let g1 = b.eval(s1).unwrap() + eps;
                let crossed = forward_diagonal_crossing(&p, s1, g1, 10.0).unwrap();
                assert!(
                    crossed.is_some(),
                    "curve from ({s1}, g*+{eps}) should hit the diagonal"
                );
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let p = StoppingProblem::new(
            DiffusionSpec::brownian(),
            RewardSpec::step(5.0, 1.0),
            CostSpec::constant(1.0),
            0.0,
            0.0,
        )
        .unwrap();
        let grid = SolverGrid::new(0.0, 8.0);
        let b = solve_maximal_boundary(&p, &grid).unwrap();
        let mut buf = Vec::new();
        b.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("s,g,side\n"));
        assert!(text.contains(",left\n"));
        assert!(text.contains(",right\n"));
        let b2 = Boundary::<f64>::read_csv(std::io::BufReader::new(&buf[..])).unwrap();
        assert_eq!(b2.jumps().len(), 1);
        let d = b.sup_diff(&b2, 0.0, 8.0, 500).unwrap();
        assert!(d < 1e-12, "round trip diff {d}");
    }

    #[test]
    fn eval_outside_range_errors() {
        let b = Boundary::from_fn(|s: f64| s - 1.0, 0.0, 5.0, 10).unwrap();
        assert!(b.eval(6.0).is_err());
        assert!((b.eval_or_extend(6.0).unwrap() - 5.0).abs() < 1e-12);
    }
}
