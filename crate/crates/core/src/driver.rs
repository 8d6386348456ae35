//! The guarded outer loop.
//!
//! Each outer iteration adds the proximal term `α‖x − p_{k−1}‖²` to `f` and
//! hands the surrogate to monitored AGD. If AGD reaches a small surrogate
//! gradient, its last iterate becomes `p_k`. If AGD instead certifies that the
//! surrogate is not `α`-strongly convex, `f` has curvature below `−α/2` on the
//! segment between the witness points, and `p_k` is the better of the best
//! recorded iterate and a negative-curvature step.
//!
//! Three parameter regimes are supported:
//!
//! * [`Mode::SecondOrder`]: `α = 2√(L2·ε)`, `η = α/L2`, symmetric
//!   curvature steps and plain best-iterate selection.
//! * [`Mode::ThirdOrder`]: `α = 2·L3^{1/3}·ε^{2/3}`, `η = √(2α/L3)`,
//!   asymmetric curvature steps and line-probing best-iterate selection.
//! * [`Mode::Practical`]: no known constants. The smoothness estimate starts
//!   at 1 and doubles on failed gradient steps, `α` and the inner tolerance
//!   follow the current gradient norm, an extra convexity test runs after
//!   every step, and curvature is exploited by a grid search over the most
//!   strongly violating pairs.

use serde::{Deserialize, Serialize};

use crate::agd_monitor::{
    run_monitored_agd_with, AgdObserver, AgdOptions, AgdOutcome, AgdParams, AgdStatus,
    WitnessPair,
};
use crate::error::{OptError, Result};
use crate::nc_exploit::{
    argmin_candidates, asymmetric_step, exploit_nc_pair, exploit_nc_pair_3, find_best, find_best_3, line_probes,
    Best, Candidate,
};
use crate::oracle::{EvalCounters, Evaluation, KnownConstants, Oracle};
use crate::trace::{Event, RunTrace};
use crate::vector::Vector;

/// Number of ranked witness pairs the practical mode exploits.
pub const RANKED_PAIRS: usize = 5;
/// Number of step lengths in the practical curvature grid.
pub const ETA_GRID_POINTS: usize = 10;
/// Slack allowed in the per-iteration progress assertions.
pub const PROGRESS_SLACK: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    SecondOrder,
    ThirdOrder,
    Practical,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuardedConfig {
    pub mode: Mode,
    /// Target gradient norm.
    pub eps: f64,
    /// Proximal weight; derived in the theoretical modes, dynamic in practice.
    pub alpha: f64,
    /// Curvature step length (theoretical modes).
    pub eta: f64,
    /// Gradient Lipschitz constant; the initial estimate in practical mode.
    pub l1: f64,
    pub l2: Option<f64>,
    pub l3: Option<f64>,
    /// Practical mode: `α = C1·‖∇f(p_{k−1})‖^{2/3}`.
    pub c1: f64,
    /// `None` derives the cap from the progress guarantee when possible.
    pub max_outer: Option<usize>,
    pub max_inner_iters: usize,
    /// Cap on the total number of inner AGD steps; exhausting it ends the
    /// run unconverged instead of failing.
    pub max_total_steps: Option<usize>,
    pub check_interval: usize,
    /// Use negative-curvature steps. Disabling it keeps only best-iterate
    /// selection.
    pub exploit_nc: bool,
    pub record_trace: bool,
    pub assert_lemmas: bool,
}

impl GuardedConfig {
    fn base(mode: Mode, eps: f64, l1: f64) -> Self {
        GuardedConfig {
            mode,
            eps,
            alpha: f64::NAN,
            eta: f64::NAN,
            l1,
            l2: None,
            l3: None,
            c1: 0.01,
            max_outer: None,
            max_inner_iters: 1_000_000,
            max_total_steps: None,
            check_interval: 1,
            exploit_nc: true,
            record_trace: false,
            assert_lemmas: false,
        }
    }

    /// `α = 2√(L2·ε)` and `η = α/L2`.
    pub fn second_order(eps: f64, l1: f64, l2: f64) -> Result<Self> {
        check_positive("ε", eps)?;
        check_positive("L1", l1)?;
        check_positive("L2", l2)?;
        let alpha = 2.0 * (l2 * eps).sqrt();
        Ok(GuardedConfig {
            alpha,
            eta: alpha / l2,
            l2: Some(l2),
            ..Self::base(Mode::SecondOrder, eps, l1)
        })
    }

    /// `α = 2·L3^{1/3}·ε^{2/3}` and `η = √(2α/L3)`.
    pub fn third_order(eps: f64, l1: f64, l3: f64) -> Result<Self> {
        check_positive("ε", eps)?;
        check_positive("L1", l1)?;
        check_positive("L3", l3)?;
        let alpha = 2.0 * l3.cbrt() * eps.powf(2.0 / 3.0);
        Ok(GuardedConfig {
            alpha,
            eta: (2.0 * alpha / l3).sqrt(),
            l3: Some(l3),
            ..Self::base(Mode::ThirdOrder, eps, l1)
        })
    }

    /// Practical regime with proximal constant `C1`; the smoothness estimate
    /// starts at 1.
    pub fn practical(eps: f64, c1: f64) -> Result<Self> {
        check_positive("ε", eps)?;
        check_positive("C1", c1)?;
        Ok(GuardedConfig {
            c1,
            ..Self::base(Mode::Practical, eps, 1.0)
        })
    }

    /// Builds a theoretical-mode config from advertised constants, failing
    /// when a required one is absent.
    pub fn from_constants(mode: Mode, eps: f64, c: &KnownConstants) -> Result<Self> {
        match mode {
            Mode::SecondOrder => Self::second_order(
                eps,
                c.l1.ok_or(OptError::MissingConstant("L1"))?,
                c.l2.ok_or(OptError::MissingConstant("L2"))?,
            ),
            Mode::ThirdOrder => Self::third_order(
                eps,
                c.l1.ok_or(OptError::MissingConstant("L1"))?,
                c.l3.ok_or(OptError::MissingConstant("L3"))?,
            ),
            Mode::Practical => Self::practical(eps, 0.01),
        }
    }

    pub fn with_max_outer(mut self, n: usize) -> Self {
        self.max_outer = Some(n);
        self
    }

    pub fn with_max_total_steps(mut self, n: usize) -> Self {
        self.max_total_steps = Some(n);
        self
    }

    pub fn with_max_inner_iters(mut self, n: usize) -> Self {
        self.max_inner_iters = n;
        self
    }

    pub fn with_check_interval(mut self, n: usize) -> Self {
        self.check_interval = n;
        self
    }

    pub fn with_nc_exploit(mut self, on: bool) -> Self {
        self.exploit_nc = on;
        self
    }

    pub fn with_trace(mut self, on: bool) -> Self {
        self.record_trace = on;
        self
    }

    pub fn with_lemma_checks(mut self, on: bool) -> Self {
        self.assert_lemmas = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("ε", self.eps)?;
        check_positive("L1", self.l1)?;
        if self.max_inner_iters == 0 || self.check_interval == 0 {
            return Err(OptError::InvalidParameter(
                "iteration caps and check interval must be positive".into(),
            ));
        }
        match self.mode {
            Mode::SecondOrder => {
                let l2 = self.l2.ok_or(OptError::MissingConstant("L2"))?;
                check_positive("L2", l2)?;
                check_positive("α", self.alpha)?;
                check_positive("η", self.eta)?;
            }
            Mode::ThirdOrder => {
                let l3 = self.l3.ok_or(OptError::MissingConstant("L3"))?;
                check_positive("L3", l3)?;
                check_positive("α", self.alpha)?;
                check_positive("η", self.eta)?;
            }
            Mode::Practical => check_positive("C1", self.c1)?,
        }
        Ok(())
    }

    /// Guaranteed decrease per non-final outer iteration,
    /// `min{ε²/(5α), α³/(64 L2²)}` or `min{ε²/(5α), α²/(32 L3)}`.
    pub fn progress_floor(&self) -> Option<f64> {
        let convex = self.eps * self.eps / (5.0 * self.alpha);
        match self.mode {
            Mode::SecondOrder => {
                let l2 = self.l2?;
                Some(convex.min(self.alpha.powi(3) / (64.0 * l2 * l2)))
            }
            Mode::ThirdOrder => {
                let l3 = self.l3?;
                Some(convex.min(self.alpha * self.alpha / (32.0 * l3)))
            }
            Mode::Practical => None,
        }
    }

    /// Default outer cap: ten times `⌈1 + Δf / progress_floor⌉`, or 10⁶ when
    /// no guarantee is available.
    pub fn default_max_outer(&self, delta_f: Option<f64>) -> usize {
        match (self.progress_floor(), delta_f) {
            (Some(floor), Some(df)) if floor > 0.0 && df.is_finite() && df >= 0.0 => {
                let k = (1.0 + df / floor).ceil();
                if k * 10.0 < 1e9 {
                    10 * k as usize
                } else {
                    1_000_000_000
                }
            }
            _ => 1_000_000,
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(OptError::InvalidParameter(format!(
            "{name} must be positive and finite, got {v}"
        )))
    }
}

/// Whether `ε ≤ min{Δf^{2/3} L2^{1/3}, L1²/(64 L2)}`.
pub fn second_order_eps_in_range(delta_f: f64, l1: f64, l2: f64, eps: f64) -> bool {
    eps <= (delta_f.powf(2.0 / 3.0) * l2.cbrt()).min(l1 * l1 / (64.0 * l2))
}

/// Whether `ε^{2/3} ≤ min{Δf^{1/2} L3^{1/6}, L1/(8 L3^{1/3})}`.
pub fn third_order_eps_in_range(delta_f: f64, l1: f64, l3: f64, eps: f64) -> bool {
    eps.powf(2.0 / 3.0) <= (delta_f.sqrt() * l3.powf(1.0 / 6.0)).min(l1 / (8.0 * l3.cbrt()))
}

/// `20·Δf·L1^{1/2}·L2^{1/4}·ε^{−7/4}·log(500·L1·Δf/ε²)` gradient evaluations.
pub fn second_order_budget(delta_f: f64, l1: f64, l2: f64, eps: f64) -> f64 {
    20.0 * delta_f * l1.sqrt() * l2.powf(0.25) * eps.powf(-1.75)
        * (500.0 * l1 * delta_f / (eps * eps)).ln()
}

/// `20·Δf·L1^{1/2}·L3^{1/6}·ε^{−5/3}·log(500·L1·Δf/ε²)` gradient evaluations.
pub fn third_order_budget(delta_f: f64, l1: f64, l3: f64, eps: f64) -> f64 {
    20.0 * delta_f * l1.sqrt() * l3.powf(1.0 / 6.0) * eps.powf(-5.0 / 3.0)
        * (500.0 * l1 * delta_f / (eps * eps)).ln()
}

/// `f̂(x) = f(x) + α‖x − center‖²`, forwarding exactly one call to `f` per
/// evaluation.
pub struct Proximal<'a> {
    inner: &'a mut dyn Oracle,
    center: Vector,
    alpha: f64,
}

pub fn proximal_wrap<'a>(f: &'a mut dyn Oracle, center: Vector, alpha: f64) -> Result<Proximal<'a>> {
    check_positive("α", alpha)?;
    if center.dim() != f.dim() {
        return Err(OptError::DimensionMismatch {
            expected: f.dim(),
            got: center.dim(),
        });
    }
    Ok(Proximal {
        inner: f,
        center,
        alpha,
    })
}

impl Proximal<'_> {
    pub fn center(&self) -> &Vector {
        &self.center
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }
}

/// Converts values and gradients of the proximal surrogate back to `f`
/// without new evaluations.
#[derive(Clone, Debug)]
pub struct SurrogateView {
    pub center: Vector,
    pub alpha: f64,
}

impl SurrogateView {
    pub fn penalty(&self, x: &Vector) -> f64 {
        self.alpha * x.dist_sq(&self.center)
    }

    pub fn base_value(&self, x: &Vector, surrogate_value: f64) -> f64 {
        surrogate_value - self.penalty(x)
    }

    pub fn base_gradient(&self, x: &Vector, surrogate_grad: &Vector) -> Vector {
        surrogate_grad.add_scaled(-2.0 * self.alpha, &x.sub(&self.center))
    }
}

impl Oracle for Proximal<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&mut self, x: &Vector, want_value: bool, want_gradient: bool) -> Result<Evaluation> {
        let e = self.inner.eval(x, want_value, want_gradient)?;
        let value = e.value.map(|v| v + self.alpha * x.dist_sq(&self.center));
        let gradient = e
            .gradient
            .map(|g| g.add_scaled(2.0 * self.alpha, &x.sub(&self.center)));
        Ok(Evaluation { value, gradient })
    }

    fn counters(&self) -> EvalCounters {
        self.inner.counters()
    }

    fn constants(&self) -> KnownConstants {
        let c = self.inner.constants();
        KnownConstants {
            l1: c.l1.map(|l| l + 2.0 * self.alpha),
            sigma: None,
            l2: c.l2,
            l3: c.l3,
            f_lower_bound: c.f_lower_bound,
        }
    }
}

/// Practical rule: `ε' = ‖∇f(p_{k−1})‖/10` and `α = C1·‖∇f(p_{k−1})‖^{2/3}`.
pub fn practical_dynamic_params(grad_norm_prev: f64, c1: f64) -> Result<(f64, f64)> {
    if !(grad_norm_prev > 0.0) {
        return Err(OptError::InvalidParameter(
            "dynamic parameters need a nonzero gradient; the run should have stopped".into(),
        ));
    }
    Ok((grad_norm_prev / 10.0, c1 * grad_norm_prev.powf(2.0 / 3.0)))
}

/// `n` points log-uniformly spaced on `[lo, hi]`, endpoints exact.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi > lo && hi.is_finite()) || n < 2 {
        return Err(OptError::InvalidParameter(format!(
            "log grid needs 0 < lo < hi and n ≥ 2, got [{lo}, {hi}], n={n}"
        )));
    }
    let ratio = (hi / lo).ln();
    Ok((0..n)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == n - 1 {
                hi
            } else {
                lo * (ratio * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect())
}

/// Ten step lengths log-uniformly spaced on `[0.01‖u−v‖, 100(‖u‖+‖v‖)]`.
pub fn practical_eta_grid(u: &Vector, v: &Vector) -> Result<Vec<f64>> {
    let sep = u.dist(v);
    if sep == 0.0 {
        return Err(OptError::InvalidParameter("η grid needs u ≠ v".into()));
    }
    log_grid(0.01 * sep, 100.0 * (u.norm() + v.norm()), ETA_GRID_POINTS)
}

/// A candidate pair with its curvature estimate
/// `α_{v,u} = 2(f(v) − f(u) + ∇f(v)ᵀ(u−v))/‖u−v‖²`, the negated curvature of
/// `f` along `u − v` implied by the two values and the gradient at `v`.
/// Convex functions give `α_{v,u} ≤ 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct RankedPair {
    pub u: Vector,
    pub v: Vector,
    pub alpha_uv: f64,
}

/// Pair data with values already known.
pub struct PairData<'a> {
    pub u: &'a Vector,
    pub f_u: f64,
    pub v: &'a Vector,
    pub f_v: f64,
    pub grad_v: &'a Vector,
}

/// Keeps pairs with `α_{v,u} ≥ 0` and returns the top [`RANKED_PAIRS`] by
/// `α_{v,u}`, descending. Equal scores keep enumeration order.
pub fn rank_pairs<'a, I>(pairs: I) -> Vec<RankedPair>
where
    I: IntoIterator<Item = PairData<'a>>,
{
    let mut scored: Vec<(f64, &Vector, &Vector)> = pairs
        .into_iter()
        .filter_map(|p| {
            let diff = p.u.sub(p.v);
            let d2 = diff.norm_sq();
            if d2 == 0.0 {
                return None;
            }
            let a = 2.0 * (p.f_v - p.f_u + p.grad_v.dot_unchecked(&diff)) / d2;
            (a >= 0.0).then_some((a, p.u, p.v))
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    scored
        .into_iter()
        .take(RANKED_PAIRS)
        .map(|(a, u, v)| RankedPair {
            u: u.clone(),
            v: v.clone(),
            alpha_uv: a,
        })
        .collect()
}

/// Scores every pair `(v = x_j, u ∈ {y_j, w_t})`, `0 ≤ j < t`, on `f` and
/// returns the top five non-negative scores. Evaluates `f` afresh.
pub fn practical_rank_witnesses(
    f: &mut dyn Oracle,
    xs: &[Vector],
    ys: &[Vector],
    w_t: &Vector,
) -> Result<Vec<RankedPair>> {
    let t = xs.len().min(ys.len());
    let f_w = f.value(w_t)?;
    let mut xv = Vec::with_capacity(t);
    let mut yv = Vec::with_capacity(t);
    for j in 0..t {
        let (fx, gx) = f.value_and_gradient(&xs[j])?;
        xv.push((fx, gx));
        yv.push(f.value(&ys[j])?);
    }
    Ok(rank_pairs((0..t).flat_map(|j| {
        let (fx, gx) = (&xv[j].0, &xv[j].1);
        [
            PairData {
                u: &ys[j],
                f_u: yv[j],
                v: &xs[j],
                f_v: *fx,
                grad_v: gx,
            },
            PairData {
                u: w_t,
                f_u: f_w,
                v: &xs[j],
                f_v: *fx,
                grad_v: gx,
            },
        ]
    })))
}

/// Evaluates `z ± ηδ` for `z ∈ {v, u}` and every `η` of the grid, for each
/// ranked pair, and returns the lowest point. Order: pairs by rank, `v`
/// before `u`, ascending `η`, plus before minus; ties keep the earliest.
pub fn practical_grid_exploit(f: &mut dyn Oracle, pairs: &[RankedPair]) -> Result<Option<Best>> {
    let mut points = Vec::new();
    for p in pairs {
        let diff = p.u.sub(&p.v);
        let delta = diff.scaled(1.0 / diff.norm());
        let grid = practical_eta_grid(&p.u, &p.v)?;
        for z in [&p.v, &p.u] {
            for &eta in &grid {
                points.push(z.add_scaled(eta, &delta));
                points.push(z.add_scaled(-eta, &delta));
            }
        }
    }
    if points.is_empty() {
        return Ok(None);
    }
    argmin_candidates(f, points.iter().map(|p| Candidate::new(p, None))).map(Some)
}

/// Summary of one outer iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub k: usize,
    pub f_prev: f64,
    pub f_next: f64,
    pub grad_norm_next: f64,
    pub inner_iters: usize,
    pub alpha: f64,
    pub witness: bool,
    pub nc_won: bool,
    pub uv_distance: Option<f64>,
    pub f_best_iterate: Option<f64>,
    pub f_nc_step: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct GuardedResult {
    pub p_final: Vector,
    pub f_final: f64,
    pub grad_norm_final: f64,
    pub converged: bool,
    /// Number of outer iterations `K`.
    pub outer_iters: usize,
    /// Total inner AGD steps.
    pub steps: usize,
    pub trace: RunTrace,
    pub counters: EvalCounters,
    /// `f(p_{k−1}) − f(p_k)` for each outer iteration.
    pub per_iter_progress: Vec<f64>,
    pub iterations: Vec<OuterRecord>,
    pub witness_events: usize,
    pub nc_exploit_wins: usize,
    /// Final smoothness estimate (practical mode) or `L1`.
    pub final_l1: f64,
    /// Failed runtime guarantee checks (only with `assert_lemmas`).
    pub lemma_violations: Vec<String>,
}

/// One inner monitored run, reported to observers of [`run_guarded_observed`].
pub struct InnerRun<'a> {
    pub outer_step: usize,
    pub center: &'a Vector,
    pub alpha: f64,
    pub outcome: &'a AgdOutcome,
}

/// Converts surrogate values to `f` before tracing.
struct DriverObserver<'a> {
    trace: &'a mut RunTrace,
    view: &'a SurrogateView,
    outer: u64,
}

impl AgdObserver for DriverObserver<'_> {
    fn on_step(
        &mut self,
        t: usize,
        y: &Vector,
        f_y: Option<f64>,
        grad_y: Option<&Vector>,
        counters: EvalCounters,
    ) {
        if !self.trace.is_enabled() {
            return;
        }
        let fv = f_y.map(|v| self.view.base_value(y, v));
        let gn = grad_y.map(|g| self.view.base_gradient(y, g).norm());
        self.trace
            .push(self.outer, t as u64, fv, gn, Event::AgdStep, counters);
    }

    fn on_certify_fail(&mut self, t: usize, counters: EvalCounters) {
        self.trace
            .push(self.outer, t as u64, None, None, Event::CertifyFail, counters);
    }

    fn on_witness(&mut self, t: usize, w: &WitnessPair, counters: EvalCounters) {
        let fu = self.view.base_value(&w.u, w.f_u);
        self.trace
            .push(self.outer, t as u64, Some(fu), None, Event::WitnessFound, counters);
    }
}

/// Mutable state carried between outer iterations.
#[derive(Clone, Debug)]
pub struct GuardedState {
    pub p: Vector,
    pub f_p: f64,
    pub grad_norm: f64,
    /// Current smoothness estimate.
    pub l1: f64,
    pub steps: usize,
}

/// What a single outer step did.
#[derive(Clone, Debug)]
pub struct StepReport {
    pub p_next: Vector,
    pub f_next: f64,
    pub inner_iters: usize,
    pub alpha: f64,
    pub witness: Option<WitnessPair>,
    pub nc_won: bool,
    pub f_best_iterate: Option<f64>,
    pub f_nc_step: Option<f64>,
    pub smoothness_factor: f64,
    /// Budget ran out inside the inner run; `p_next` is the previous point.
    pub exhausted: bool,
    pub inner_violations: Vec<String>,
}

/// Best-iterate selection for the practical mode: `y_0..y_t`, then `c_j, q_j`
/// for the witness index and for every `j` with `f(x_j) > f(y_j)`, then `u`.
fn practical_find_best(
    f: &mut dyn Oracle,
    out: &AgdOutcome,
    base_y: &[Option<f64>],
    base_x: &[Option<f64>],
    witness: Option<(&WitnessPair, f64)>,
) -> Result<Best> {
    let mut probe_idx: Vec<usize> = (1..out.xs.len().min(out.ys.len()))
        .filter(|&j| matches!((base_x[j], base_y[j]), (Some(fx), Some(fy)) if fx > fy))
        .collect();
    if let Some((w, _)) = witness {
        if w.v_index > 0 {
            probe_idx.push(w.v_index);
        }
    }
    probe_idx.sort_unstable();
    probe_idx.dedup();
    let probes: Vec<Vector> = probe_idx
        .iter()
        .flat_map(|&j| {
            let (c, q) = line_probes(&out.ys, j);
            [c, q]
        })
        .collect();
    let cands = out
        .ys
        .iter()
        .zip(base_y)
        .map(|(y, v)| Candidate::new(y, *v))
        .chain(probes.iter().map(|p| Candidate::new(p, None)))
        .chain(witness.map(|(w, fu)| Candidate::new(&w.u, Some(fu))));
    argmin_candidates(f, cands)
}

/// Performs one outer iteration from `state`, updating the practical
/// smoothness estimate in place.
pub fn guarded_step(
    f: &mut dyn Oracle,
    state: &mut GuardedState,
    cfg: &GuardedConfig,
    k: usize,
    trace: &mut RunTrace,
    observer: &mut dyn FnMut(&InnerRun<'_>),
) -> Result<StepReport> {
    let practical = cfg.mode == Mode::Practical;
    let (eps_inner, alpha) = if practical {
        practical_dynamic_params(state.grad_norm, cfg.c1)?
    } else {
        (cfg.eps / 10.0, cfg.alpha)
    };
    let remaining = cfg
        .max_total_steps
        .map(|m| m.saturating_sub(state.steps))
        .unwrap_or(usize::MAX);
    let inner_cap = cfg.max_inner_iters.min(remaining);
    let params = AgdParams {
        smoothness: state.l1 + 2.0 * alpha,
        strong_convexity: alpha,
        target_eps: eps_inner,
        max_iters: inner_cap.max(1),
        check_interval: cfg.check_interval,
    };
    let opts = AgdOptions {
        extra_convexity_check: practical,
        adaptive_smoothness: practical,
    };
    let view = SurrogateView {
        center: state.p.clone(),
        alpha,
    };

    let inner = {
        let mut fhat = proximal_wrap(&mut *f, state.p.clone(), alpha)?;
        let mut obs = DriverObserver {
            trace: &mut *trace,
            view: &view,
            outer: k as u64,
        };
        run_monitored_agd_with(&mut fhat, &state.p, &params, &opts, &mut obs)
    };
    let outcome = match inner {
        Ok(o) => o,
        Err(OptError::MaxIterations { .. }) if inner_cap < cfg.max_inner_iters || remaining == 0 => {
            return Ok(StepReport {
                p_next: state.p.clone(),
                f_next: state.f_p,
                inner_iters: inner_cap,
                alpha,
                witness: None,
                nc_won: false,
                f_best_iterate: None,
                f_nc_step: None,
                smoothness_factor: 1.0,
                exhausted: true,
                inner_violations: Vec::new(),
            });
        }
        Err(OptError::MaxIterations { what, limit, .. }) => {
            return Err(OptError::MaxIterations {
                what,
                limit,
                trace: Box::new(trace.clone()),
            })
        }
        Err(e) => return Err(e),
    };
    observer(&InnerRun {
        outer_step: k,
        center: &state.p,
        alpha,
        outcome: &outcome,
    });
    let inner_violations = if cfg.assert_lemmas {
        outcome
            .guarantee_violations(1.0)
            .into_iter()
            .map(|m| format!("outer {k}: {m}"))
            .collect()
    } else {
        Vec::new()
    };

    let base_y: Vec<Option<f64>> = outcome
        .ys
        .iter()
        .zip(&outcome.y_values)
        .map(|(y, v)| v.map(|v| view.base_value(y, v)))
        .collect();
    let base_x: Vec<Option<f64>> = outcome
        .xs
        .iter()
        .zip(&outcome.x_values)
        .map(|(x, v)| v.map(|v| view.base_value(x, v)))
        .collect();
    let t = outcome.iters;
    let smoothness_factor = match outcome.status {
        AgdStatus::SmoothnessIncreased { factor } => factor,
        _ => 1.0,
    };
    state.l1 *= smoothness_factor;

    let mut report = StepReport {
        p_next: state.p.clone(),
        f_next: state.f_p,
        inner_iters: t,
        alpha,
        witness: outcome.witness.clone(),
        nc_won: false,
        f_best_iterate: None,
        f_nc_step: None,
        smoothness_factor,
        exhausted: false,
        inner_violations,
    };

    let Some(w) = outcome.witness.as_ref() else {
        if practical {
            let b = practical_find_best(f, &outcome, &base_y, &base_x, None)?;
            report.p_next = b.point;
            report.f_next = b.value;
        } else {
            report.f_next = match base_y[t] {
                Some(v) => v,
                None => f.value(&outcome.ys[t])?,
            };
            report.p_next = outcome.ys[t].clone();
        }
        return Ok(report);
    };

    let f_u = view.base_value(&w.u, w.f_u);
    let b1 = match cfg.mode {
        Mode::SecondOrder => find_best(f, &outcome.ys, &base_y, &w.u, Some(f_u))?,
        Mode::ThirdOrder => find_best_3(
            f,
            &outcome.ys,
            &base_y,
            &outcome.xs[..t],
            &w.u,
            Some(f_u),
            &w.v,
        )?,
        Mode::Practical => practical_find_best(f, &outcome, &base_y, &base_x, Some((w, f_u)))?,
    };
    report.f_best_iterate = Some(b1.value);

    let b2 = if !cfg.exploit_nc {
        None
    } else {
        match cfg.mode {
            Mode::SecondOrder => {
                let r = exploit_nc_pair(f, &w.u, &w.v, cfg.eta)?;
                Some((r.z, r.f_z))
            }
            // A far-apart pair already guarantees progress through `b1`,
            // and the asymmetric step is undefined for it.
            Mode::ThirdOrder if asymmetric_step(cfg.eta, w.u.dist(&w.v)) < 0.0 => None,
            Mode::ThirdOrder => {
                let r = exploit_nc_pair_3(f, &w.u, &w.v, cfg.eta)?;
                Some((r.z, r.f_z))
            }
            Mode::Practical => {
                let pairs = practical_pairs(&outcome, &view, &base_x, &base_y);
                practical_grid_exploit(f, &pairs)?.map(|b| (b.point, b.value))
            }
        }
    };
    report.f_nc_step = b2.as_ref().map(|(_, v)| *v);
    match b2 {
        Some((z, fz)) if fz < b1.value => {
            report.nc_won = true;
            report.p_next = z;
            report.f_next = fz;
        }
        _ => {
            report.p_next = b1.point;
            report.f_next = b1.value;
        }
    }
    Ok(report)
}

/// Witness candidates for ranking, built from cached surrogate data.
fn practical_pairs(
    out: &AgdOutcome,
    view: &SurrogateView,
    base_x: &[Option<f64>],
    base_y: &[Option<f64>],
) -> Vec<RankedPair> {
    let t = out.iters;
    let Some((w, f_w_hat)) = out.certificate.as_ref() else {
        return Vec::new();
    };
    let f_w = view.base_value(w, *f_w_hat);
    let grads: Vec<Vector> = (0..t)
        .map(|j| view.base_gradient(&out.xs[j], &out.x_gradients[j]))
        .collect();
    let mut data = Vec::with_capacity(2 * t);
    for j in 0..t {
        let Some(f_v) = base_x[j] else { continue };
        if let Some(f_y) = base_y[j] {
            data.push(PairData {
                u: &out.ys[j],
                f_u: f_y,
                v: &out.xs[j],
                f_v,
                grad_v: &grads[j],
            });
        }
        data.push(PairData {
            u: w,
            f_u: f_w,
            v: &out.xs[j],
            f_v,
            grad_v: &grads[j],
        });
    }
    rank_pairs(data)
}

pub fn run_guarded(f: &mut dyn Oracle, p0: &Vector, cfg: &GuardedConfig) -> Result<GuardedResult> {
    run_guarded_observed(f, p0, cfg, &mut |_| {})
}

/// Runs the guarded method, calling `observer` after every inner run.
pub fn run_guarded_observed(
    f: &mut dyn Oracle,
    p0: &Vector,
    cfg: &GuardedConfig,
    observer: &mut dyn FnMut(&InnerRun<'_>),
) -> Result<GuardedResult> {
    cfg.validate()?;
    let start = f.counters();
    let mut trace = RunTrace::new(cfg.record_trace);
    let (f0, g0) = f.value_and_gradient(p0)?;
    let delta_f = f.constants().f_lower_bound.map(|lb| f0 - lb);
    let max_outer = cfg.max_outer.unwrap_or_else(|| cfg.default_max_outer(delta_f));

    let mut state = GuardedState {
        p: p0.clone(),
        f_p: f0,
        grad_norm: g0.norm(),
        l1: cfg.l1,
        steps: 0,
    };
    let mut iterations = Vec::new();
    let mut progress = Vec::new();
    let mut violations = Vec::new();
    let mut witness_events = 0;
    let mut nc_wins = 0;
    let mut converged = state.grad_norm <= cfg.eps;
    let mut k = 0;

    while !converged && k < max_outer {
        if cfg.max_total_steps.is_some_and(|m| state.steps >= m) {
            break;
        }
        k += 1;
        let report = guarded_step(f, &mut state, cfg, k, &mut trace, observer)?;
        state.steps += report.inner_iters;
        violations.extend(report.inner_violations.iter().cloned());
        if report.exhausted {
            break;
        }
        let (f_next, g_next) = f.value_and_gradient(&report.p_next)?;
        let grad_norm = g_next.norm();
        if report.witness.is_some() {
            witness_events += 1;
        }
        if report.nc_won {
            nc_wins += 1;
            trace.push(
                k as u64,
                report.inner_iters as u64,
                Some(f_next),
                Some(grad_norm),
                Event::NcExploit,
                f.counters(),
            );
        }
        if cfg.assert_lemmas {
            if let (Some(w), Some(fb1)) = (&report.witness, report.f_best_iterate) {
                if let Some((drop, radius)) = dichotomy(cfg) {
                    let sep = w.u.dist(&w.v);
                    if fb1 > state.f_p - drop && sep > radius {
                        violations.push(format!(
                            "outer {k}: best iterate dropped less than {drop} and ‖u−v‖ = {sep} > {radius}"
                        ));
                    }
                }
            }
        }
        iterations.push(OuterRecord {
            k,
            f_prev: state.f_p,
            f_next,
            grad_norm_next: grad_norm,
            inner_iters: report.inner_iters,
            alpha: report.alpha,
            witness: report.witness.is_some(),
            nc_won: report.nc_won,
            uv_distance: report.witness.as_ref().map(|w| w.u.dist(&w.v)),
            f_best_iterate: report.f_best_iterate,
            f_nc_step: report.f_nc_step,
        });
        progress.push(state.f_p - f_next);
        state.p = report.p_next;
        state.f_p = f_next;
        state.grad_norm = grad_norm;
        converged = grad_norm <= cfg.eps;
    }

    if cfg.assert_lemmas {
        violations.extend(progress_violations(cfg, &iterations, converged));
        let used = f.counters().since(start).n_gradient as f64;
        if let Some(df) = delta_f {
            if let Some(bound) = budget_if_in_range(cfg, df) {
                if converged && used > bound {
                    violations.push(format!(
                        "gradient evaluations {used} exceed the complexity bound {bound}"
                    ));
                }
            }
        }
    }

    trace.push(
        k as u64,
        0,
        Some(state.f_p),
        Some(state.grad_norm),
        Event::Terminate,
        f.counters(),
    );
    Ok(GuardedResult {
        p_final: state.p,
        f_final: state.f_p,
        grad_norm_final: state.grad_norm,
        converged,
        outer_iters: k,
        steps: state.steps,
        trace,
        counters: f.counters().since(start),
        per_iter_progress: progress,
        iterations,
        witness_events,
        nc_exploit_wins: nc_wins,
        final_l1: state.l1,
        lemma_violations: violations,
    })
}

/// Either the best iterate drops `f` by the first value, or the witness
/// points lie within the second value of each other.
pub fn dichotomy(cfg: &GuardedConfig) -> Option<(f64, f64)> {
    match cfg.mode {
        Mode::SecondOrder => {
            let l2 = cfg.l2?;
            Some((cfg.alpha.powi(3) / (64.0 * l2 * l2), cfg.alpha / (2.0 * l2)))
        }
        Mode::ThirdOrder => {
            let l3 = cfg.l3?;
            Some((cfg.alpha * cfg.alpha / (32.0 * l3), cfg.eta / 2.0))
        }
        Mode::Practical => None,
    }
}

/// The complexity bound for theoretical modes when `ε` is in the range where
/// it is stated.
pub fn budget_if_in_range(cfg: &GuardedConfig, delta_f: f64) -> Option<f64> {
    match cfg.mode {
        Mode::SecondOrder => {
            let l2 = cfg.l2?;
            second_order_eps_in_range(delta_f, cfg.l1, l2, cfg.eps)
                .then(|| second_order_budget(delta_f, cfg.l1, l2, cfg.eps))
        }
        Mode::ThirdOrder => {
            let l3 = cfg.l3?;
            third_order_eps_in_range(delta_f, cfg.l1, l3, cfg.eps)
                .then(|| third_order_budget(delta_f, cfg.l1, l3, cfg.eps))
        }
        Mode::Practical => None,
    }
}

/// Checks the per-iteration decrease for every outer iteration except the
/// last one of a converged run.
pub fn progress_violations(
    cfg: &GuardedConfig,
    iterations: &[OuterRecord],
    converged: bool,
) -> Vec<String> {
    let Some(floor) = cfg.progress_floor() else {
        return Vec::new();
    };
    let n = if converged {
        iterations.len().saturating_sub(1)
    } else {
        iterations.len()
    };
    iterations[..n]
        .iter()
        .filter(|r| r.f_next > r.f_prev - floor + PROGRESS_SLACK)
        .map(|r| {
            format!(
                "outer {}: decrease {} below guaranteed {floor}",
                r.k,
                r.f_prev - r.f_next
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{CountingOracle, Objective};
    use crate::problems::{double_well, quadratic, ripple};

    struct Zero(usize);

    impl Objective for Zero {
        fn dim(&self) -> usize {
            self.0
        }
        fn value(&self, _x: &[f64]) -> crate::Result<f64> {
            Ok(0.0)
        }
        fn gradient(&self, x: &[f64]) -> crate::Result<Vec<f64>> {
            Ok(vec![0.0; x.len()])
        }
    }

    fn vecf(c: &[f64]) -> Vector {
        Vector::new(c.to_vec()).unwrap()
    }

    #[test]
    fn proximal_examples() {
        let z = Zero(2);
        let mut o = CountingOracle::new(&z);
        let mut p = proximal_wrap(&mut o, Vector::zeros(2), 1.0).unwrap();
        let (v, g) = p.value_and_gradient(&vecf(&[1.0, 0.0])).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(g, vecf(&[2.0, 0.0]));
        assert_eq!(p.counters(), EvalCounters { n_value: 1, n_gradient: 1 });

        let q = quadratic(vec![1.0]).unwrap();
        let mut o = CountingOracle::new(&q);
        let mut p = proximal_wrap(&mut o, vecf(&[1.0]), 2.0).unwrap();
        let (v, g) = p.value_and_gradient(&vecf(&[0.0])).unwrap();
        assert_eq!(v, 2.0);
        assert_eq!(g, vecf(&[-4.0]));
        // At the center the penalty vanishes.
        let (v, g) = p.value_and_gradient(&vecf(&[1.0])).unwrap();
        assert_eq!((v, g), (0.5, vecf(&[1.0])));
    }

    #[test]
    fn schedules_follow_the_parameter_rules() {
        let c = GuardedConfig::second_order(1e-4, 11.0, 12.0).unwrap();
        assert!((c.alpha - 2.0 * (12.0f64 * 1e-4).sqrt()).abs() < 1e-15);
        assert!((c.eta - c.alpha / 12.0).abs() < 1e-15);
        let c = GuardedConfig::third_order(1e-3, 11.0, 6.0).unwrap();
        assert!((c.alpha - 2.0 * 6f64.cbrt() * 1e-3f64.powf(2.0 / 3.0)).abs() < 1e-15);
        assert!((c.eta - (2.0 * c.alpha / 6.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn theoretical_modes_need_constants() {
        let err = GuardedConfig::from_constants(Mode::SecondOrder, 1e-3, &KnownConstants::default())
            .unwrap_err();
        assert!(matches!(err, OptError::MissingConstant("L1")));
        let c = KnownConstants {
            l1: Some(1.0),
            ..Default::default()
        };
        assert!(matches!(
            GuardedConfig::from_constants(Mode::ThirdOrder, 1e-3, &c),
            Err(OptError::MissingConstant("L3"))
        ));
    }

    #[test]
    fn dynamic_params() {
        let (e, a) = practical_dynamic_params(1.0, 0.01).unwrap();
        assert!((e - 0.1).abs() < 1e-16 && (a - 0.01).abs() < 1e-16);
        let (e, a) = practical_dynamic_params(1e-3, 0.1).unwrap();
        assert!((e - 1e-4).abs() < 1e-18);
        assert!((a - 1e-3).abs() < 1e-15);
        let (_, a1) = practical_dynamic_params(2.0, 0.3).unwrap();
        let (_, a2) = practical_dynamic_params(2000.0, 0.3).unwrap();
        assert!((a2 / a1 - 100.0).abs() < 1e-9);
        assert!(practical_dynamic_params(0.0, 0.1).is_err());
    }

    #[test]
    fn eta_grid_spacing() {
        let u = vecf(&[0.5]);
        let v = vecf(&[-0.5]);
        let g = practical_eta_grid(&u, &v).unwrap();
        assert_eq!(g.len(), 10);
        assert_eq!(g[0], 0.01);
        assert_eq!(g[9], 100.0);
        let r = 10f64.powf(4.0 / 9.0);
        for w in g.windows(2) {
            assert!((w[1] / w[0] - r).abs() < 1e-12);
        }
        assert!(log_grid(1.0, 0.5, 10).is_err());
        assert!(practical_eta_grid(&u, &u).is_err());
    }

    #[test]
    fn ranking_rules() {
        struct NegHalf;
        impl Objective for NegHalf {
            fn dim(&self) -> usize {
                1
            }
            fn value(&self, x: &[f64]) -> crate::Result<f64> {
                Ok(-0.5 * x[0] * x[0])
            }
            fn gradient(&self, x: &[f64]) -> crate::Result<Vec<f64>> {
                Ok(vec![-x[0]])
            }
        }
        let f = NegHalf;
        let mut o = CountingOracle::new(&f);
        let r = practical_rank_witnesses(&mut o, &[vecf(&[0.0])], &[vecf(&[0.0])], &vecf(&[1.0]))
            .unwrap();
        assert_eq!(r.len(), 1);
        assert!((r[0].alpha_uv - 1.0).abs() < 1e-15);

        let q = quadratic(vec![2.0]).unwrap();
        let mut o = CountingOracle::new(&q);
        let xs = [vecf(&[1.0]), vecf(&[0.5])];
        let ys = [vecf(&[1.0]), vecf(&[0.3])];
        assert!(practical_rank_witnesses(&mut o, &xs, &ys, &vecf(&[-1.0]))
            .unwrap()
            .is_empty());

        let u_pts: Vec<Vector> = (1..=7).map(|i| vecf(&[i as f64])).collect();
        let zero = vecf(&[0.0]);
        let gz = vecf(&[0.0]);
        let ranked = rank_pairs(u_pts.iter().enumerate().map(|(i, u)| PairData {
            u,
            f_u: -(i as f64 + 1.0) * u[0] * u[0],
            v: &zero,
            f_v: 0.0,
            grad_v: &gz,
        }));
        assert_eq!(ranked.len(), 5);
        assert!(ranked.windows(2).all(|w| w[0].alpha_uv >= w[1].alpha_uv));
        assert!((ranked[0].alpha_uv - 14.0).abs() < 1e-12);
    }

    #[test]
    fn convex_quadratic_converges_without_witness() {
        let q = quadratic(vec![1.0, 3.0, 10.0]).unwrap();
        let mut o = CountingOracle::new(&q);
        let cfg = GuardedConfig::second_order(1e-6, 10.0, 1.0)
            .unwrap()
            .with_lemma_checks(true);
        let r = run_guarded(&mut o, &vecf(&[1.0, -2.0, 0.5]), &cfg).unwrap();
        assert!(r.converged);
        assert_eq!(r.witness_events, 0);
        assert!(r.grad_norm_final <= 1e-6);
        assert!(r.lemma_violations.is_empty(), "{:?}", r.lemma_violations);
        for rec in &r.iterations[..r.iterations.len() - 1] {
            assert!(rec.f_next <= rec.f_prev - 1e-12 / (5.0 * cfg.alpha));
        }
    }

    #[test]
    fn saddle_start_terminates_immediately() {
        let f = double_well(1);
        let mut o = CountingOracle::new(&f);
        let cfg = GuardedConfig::second_order(1e-4, 11.0, 12.0).unwrap();
        let r = run_guarded(&mut o, &vecf(&[0.0]), &cfg).unwrap();
        assert!(r.converged);
        assert_eq!(r.outer_iters, 0);
        assert_eq!(r.p_final, vecf(&[0.0]));
    }

    #[test]
    fn double_well_reaches_a_minimum() {
        let f = double_well(1);
        let mut o = CountingOracle::new(&f);
        let cfg = GuardedConfig::second_order(1e-4, 11.0, 12.0)
            .unwrap()
            .with_lemma_checks(true)
            .with_trace(true);
        let r = run_guarded(&mut o, &vecf(&[0.01]), &cfg).unwrap();
        assert!(r.converged);
        assert!((r.p_final[0].abs() - 1.0).abs() < 1e-3);
        assert!(r.lemma_violations.is_empty(), "{:?}", r.lemma_violations);
        assert_eq!(r.trace.count(Event::WitnessFound), r.witness_events);
        assert_eq!(r.trace.count(Event::Terminate), 1);
    }

    #[test]
    fn ripple_saddle_is_escaped_by_curvature_steps() {
        let f = ripple(2);
        for mode in [Mode::SecondOrder, Mode::ThirdOrder] {
            let mut o = CountingOracle::new(&f);
            let cfg = GuardedConfig::from_constants(mode, 1e-2, &f.constants())
                .unwrap()
                .with_lemma_checks(true)
                .with_trace(true);
            let r = run_guarded(&mut o, &vecf(&[0.01, -0.01 / 3.0]), &cfg).unwrap();
            assert!(r.converged);
            assert!(r.witness_events >= 1, "{mode:?}");
            assert!(r.lemma_violations.is_empty(), "{:?}", r.lemma_violations);
            assert_eq!(r.trace.count(Event::WitnessFound), r.witness_events);
            assert_eq!(r.trace.count(Event::NcExploit), r.nc_exploit_wins);
            assert!(r.f_final < -1.99);
        }
    }

    #[test]
    fn counters_match_oracle() {
        let f = double_well(3);
        let mut o = CountingOracle::new(&f);
        let cfg = GuardedConfig::third_order(1e-3, 11.0, 6.0).unwrap();
        let r = run_guarded(&mut o, &vecf(&[0.05, -0.02, 0.01]), &cfg).unwrap();
        assert!(r.converged);
        assert_eq!(r.counters, o.counters());
    }
}
