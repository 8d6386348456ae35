//! Accelerated gradient descent that monitors its own progress.
//!
//! [`run_monitored_agd`] runs Nesterov's method for an objective conjectured
//! to be `σ`-strongly convex. After each step it checks that the gradient
//! norm decays at the rate strong convexity would guarantee. When the check
//! fails, the recorded iterates contain a pair of points that violates the
//! strong-convexity inequality, and that pair is returned as a
//! [`WitnessPair`]. Otherwise the run ends at a point with small gradient.

use serde::{Deserialize, Serialize};

use crate::error::{OptError, Result};
use crate::oracle::{EvalCounters, Oracle};
use crate::trace::{Event, RunTrace};
use crate::vector::Vector;

const MAX_DOUBLINGS: usize = 200;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgdParams {
    /// Smoothness `L` used for the gradient steps.
    pub smoothness: f64,
    /// Conjectured strong convexity `σ`, `0 < σ ≤ L`.
    pub strong_convexity: f64,
    /// Stop once `‖∇f(y_t)‖ ≤ target_eps`.
    pub target_eps: f64,
    pub max_iters: usize,
    /// Certification and the stopping test run every `check_interval` steps.
    pub check_interval: usize,
}

impl AgdParams {
    pub fn new(smoothness: f64, strong_convexity: f64, target_eps: f64) -> Result<Self> {
        let p = AgdParams {
            smoothness,
            strong_convexity,
            target_eps,
            max_iters: 1_000_000,
            check_interval: 1,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_check_interval(mut self, check_interval: usize) -> Self {
        self.check_interval = check_interval;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.smoothness.is_finite()
            && self.strong_convexity > 0.0
            && self.strong_convexity <= self.smoothness
            && self.target_eps > 0.0
            && self.target_eps.is_finite()
            && self.max_iters > 0
            && self.check_interval > 0;
        if ok {
            Ok(())
        } else {
            Err(OptError::InvalidParameter(format!(
                "AGD parameters need 0 < σ ≤ L, ε' > 0 and positive counts; got {self:?}"
            )))
        }
    }

    /// `κ = L/σ`
    pub fn kappa(&self) -> f64 {
        self.smoothness / self.strong_convexity
    }

    /// `ω = (√κ − 1)/(√κ + 1)`
    pub fn momentum(&self) -> f64 {
        let s = self.kappa().sqrt();
        (s - 1.0) / (s + 1.0)
    }
}

/// Extra behaviour used by the practical variant of the guarded method.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AgdOptions {
    /// Also certify failure when a gradient step lands above the linear
    /// model built at its starting point.
    pub extra_convexity_check: bool,
    /// Double `L` whenever a gradient step misses sufficient decrease, then
    /// stop the run.
    pub adaptive_smoothness: bool,
}

/// Where the `u` point of a witness came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WitnessSource {
    /// `u = y_j` for the same index as `v = x_j`.
    Iterate,
    /// `u` is the point returned by the failed certification.
    Certificate,
}

/// Two points certifying that `f` is not `σ`-strongly convex:
/// `f(u) < f(v) + ∇f(v)ᵀ(u − v) + (σ/2)‖u − v‖²`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessPair {
    pub u: Vector,
    pub v: Vector,
    /// `f(v) + ∇f(v)ᵀ(u−v) + (σ/2)‖u−v‖² − f(u)`, strictly positive.
    pub violation_margin: f64,
    /// Index `j` with `v = x_j`.
    pub v_index: usize,
    pub u_source: WitnessSource,
    pub f_u: f64,
    pub f_v: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AgdStatus {
    Stationary,
    Witness,
    /// The adaptive smoothness estimate was multiplied by `factor`; the run
    /// stopped early.
    SmoothnessIncreased { factor: f64 },
}

/// Histories and caches of a finished monitored run.
///
/// `xs`/`ys` hold `x_0..x_t` and `y_0..y_t`. The value and gradient caches
/// record every evaluation the run paid for, so later consumers (best-iterate
/// selection, witness ranking) need not evaluate those points again.
#[derive(Clone, Debug)]
pub struct AgdOutcome {
    pub xs: Vec<Vector>,
    pub ys: Vec<Vector>,
    pub y_values: Vec<Option<f64>>,
    pub x_values: Vec<Option<f64>>,
    /// `∇f(x_j)` for `j < t`.
    pub x_gradients: Vec<Vector>,
    /// `∇f(y_t)` if the last step was checked.
    pub last_gradient: Option<Vector>,
    /// `ψ(z_s)` for every iteration `s` where it was computed.
    pub psi: Vec<Option<f64>>,
    /// The point `w_t` returned by a failed certification, with its value.
    pub certificate: Option<(Vector, f64)>,
    pub witness: Option<WitnessPair>,
    pub status: AgdStatus,
    pub iters: usize,
    pub params: AgdParams,
}

impl AgdOutcome {
    pub fn terminated_stationary(&self) -> bool {
        self.status == AgdStatus::Stationary
    }

    /// Right-hand side of the iteration bound
    /// `t ≤ 1 + max{0, √κ·log(2Lψ(z_{t−1})/ε'²)}`.
    pub fn iteration_bound(&self) -> Option<f64> {
        let t = self.iters;
        if t <= 1 {
            return Some(1.0);
        }
        let psi = self.psi.get(t - 1).copied().flatten()?;
        let p = &self.params;
        let log_term = (2.0 * p.smoothness * psi / (p.target_eps * p.target_eps)).ln();
        Some(1.0 + (p.kappa().sqrt() * log_term).max(0.0))
    }

    /// Checks the guarantees a monitored run must satisfy using cached
    /// values: the witness inequality, the value envelope
    /// `max{f(y_1..y_{t−1}), f(u)} ≤ f(y_0)`, and (with `check_interval = 1`)
    /// the iteration bound plus `slack`. Returns human-readable violations.
    pub fn guarantee_violations(&self, bound_slack: f64) -> Vec<String> {
        let mut out = Vec::new();
        let Some(f_y0) = self.y_values[0] else {
            return out;
        };
        if let Some(w) = &self.witness {
            if !(w.violation_margin > 0.0) {
                out.push(format!(
                    "witness margin {} is not positive",
                    w.violation_margin
                ));
            }
            if w.f_u > f_y0 {
                out.push(format!("witness f(u)={} exceeds f(y_0)={}", w.f_u, f_y0));
            }
            let last = self.iters.saturating_sub(1);
            for (s, v) in self.y_values.iter().enumerate().take(last + 1).skip(1) {
                if let Some(v) = v {
                    if *v > f_y0 {
                        out.push(format!("f(y_{s})={v} exceeds f(y_0)={f_y0}"));
                    }
                }
            }
        }
        if self.params.check_interval == 1 && !matches!(self.status, AgdStatus::SmoothnessIncreased { .. }) {
            match self.iteration_bound() {
                Some(b) if (self.iters as f64) <= b + bound_slack => {}
                Some(b) => out.push(format!(
                    "iteration count {} exceeds bound {b} (+{bound_slack})",
                    self.iters
                )),
                None => out.push("iteration bound unavailable: ψ(z_{t-1}) missing".into()),
            }
        }
        out
    }
}

/// Callbacks fired while a monitored run progresses.
pub trait AgdObserver {
    fn on_step(
        &mut self,
        _t: usize,
        _y: &Vector,
        _f_y: Option<f64>,
        _grad_y: Option<&Vector>,
        _counters: EvalCounters,
    ) {
    }

    fn on_certify_fail(&mut self, _t: usize, _counters: EvalCounters) {}

    fn on_witness(&mut self, _t: usize, _witness: &WitnessPair, _counters: EvalCounters) {}
}

pub struct NoopObserver;

impl AgdObserver for NoopObserver {}

/// Records monitored-run events into a [`RunTrace`] under a fixed outer step.
pub struct TraceObserver<'a> {
    pub trace: &'a mut RunTrace,
    pub outer_step: u64,
}

impl AgdObserver for TraceObserver<'_> {
    fn on_step(
        &mut self,
        t: usize,
        _y: &Vector,
        f_y: Option<f64>,
        grad_y: Option<&Vector>,
        counters: EvalCounters,
    ) {
        self.trace.push(
            self.outer_step,
            t as u64,
            f_y,
            grad_y.map(Vector::norm),
            Event::AgdStep,
            counters,
        );
    }

    fn on_certify_fail(&mut self, t: usize, counters: EvalCounters) {
        self.trace
            .push(self.outer_step, t as u64, None, None, Event::CertifyFail, counters);
    }

    fn on_witness(&mut self, t: usize, w: &WitnessPair, counters: EvalCounters) {
        self.trace.push(
            self.outer_step,
            t as u64,
            Some(w.f_u),
            None,
            Event::WitnessFound,
            counters,
        );
    }
}

/// `y_next = x_prev − (1/L)∇f(x_prev)`, `x_next = y_next + ω(y_next − y_prev)`.
/// Costs exactly one gradient evaluation.
pub fn agd_step(
    f: &mut dyn Oracle,
    x_prev: &Vector,
    y_prev: &Vector,
    params: &AgdParams,
) -> Result<(Vector, Vector)> {
    let g = f.gradient(x_prev)?;
    let y_next = x_prev.add_scaled(-1.0 / params.smoothness, &g);
    let x_next = extrapolate(&y_next, y_prev, params.momentum());
    Ok((y_next, x_next))
}

fn extrapolate(y_next: &Vector, y_prev: &Vector, omega: f64) -> Vector {
    y_next.lin_comb(1.0 + omega, y_prev, -omega)
}

/// Outcome of one certification test.
#[derive(Clone, Debug, PartialEq)]
pub struct Certification {
    pub f_yt: f64,
    pub grad_yt: Option<Vector>,
    /// `ψ(z_t)` when the gradient-decay branch was reached.
    pub psi: Option<f64>,
    /// `w_t` and `f(w_t)` when certification failed.
    pub failure: Option<(Vector, f64)>,
    /// Factor by which the adaptive smoothness estimate grew (1 if unchanged).
    pub smoothness_factor: f64,
}

/// Tests whether the run is still progressing as strong convexity predicts.
///
/// Returns `y_0` when `f(y_t) > f(y_0)`. Otherwise takes the gradient step
/// `z_t = y_t − (1/L)∇f(y_t)`, forms
/// `ψ(z_t) = f(y_0) − f(z_t) + (σ/2)‖z_t − y_0‖²`, and returns `z_t` when
/// `‖∇f(y_t)‖² > 2Lψ(z_t)·e^{−t/√κ}`. Evaluates everything afresh; the
/// monitored loop uses a cached variant.
pub fn certify_progress(
    f: &mut dyn Oracle,
    y0: &Vector,
    yt: &Vector,
    t: usize,
    params: &AgdParams,
) -> Result<Option<Vector>> {
    if t == 0 {
        return Err(OptError::InvalidParameter(
            "certification needs t ≥ 1".into(),
        ));
    }
    let f_y0 = f.value(y0)?;
    let mut smoothness = params.smoothness;
    let c = certify_cached(
        f,
        y0,
        f_y0,
        yt,
        None,
        t,
        &mut smoothness,
        params,
        &AgdOptions::default(),
        None,
    )?;
    Ok(c.failure.map(|(w, _)| w))
}

/// Practical extra check: with `g = ∇f̂(x)`, returns `y` as a certificate when
/// `f̂(x) + gᵀ(y − x) > f̂(y)`. The inequality is strict, so `x = y` never fires.
pub fn practical_certify_extra(
    f_x: f64,
    grad_x: &Vector,
    x: &Vector,
    y: &Vector,
    f_y: f64,
) -> Option<Vector> {
    let linear = f_x + grad_x.dot_unchecked(&y.sub(x));
    if linear > f_y {
        Some(y.clone())
    } else {
        None
    }
}

/// Information about the step that produced `y_t`, for the extra check.
struct StepOrigin<'a> {
    x_prev: &'a Vector,
    f_x_prev: f64,
    grad_x_prev: &'a Vector,
}

#[allow(clippy::too_many_arguments)]
fn certify_cached(
    f: &mut dyn Oracle,
    y0: &Vector,
    f_y0: f64,
    yt: &Vector,
    f_yt: Option<f64>,
    t: usize,
    smoothness: &mut f64,
    params: &AgdParams,
    opts: &AgdOptions,
    origin: Option<StepOrigin<'_>>,
) -> Result<Certification> {
    let f_yt = match f_yt {
        Some(v) => v,
        None => f.value(yt)?,
    };
    if f_yt > f_y0 {
        return Ok(Certification {
            f_yt,
            grad_yt: None,
            psi: None,
            failure: Some((y0.clone(), f_y0)),
            smoothness_factor: 1.0,
        });
    }
    if opts.extra_convexity_check {
        if let Some(o) = origin {
            if let Some(w) = practical_certify_extra(o.f_x_prev, o.grad_x_prev, o.x_prev, yt, f_yt) {
                return Ok(Certification {
                    f_yt,
                    grad_yt: None,
                    psi: None,
                    failure: Some((w, f_yt)),
                    smoothness_factor: 1.0,
                });
            }
        }
    }
    let g = f.gradient(yt)?;
    let g_sq = g.norm_sq();
    let mut factor = 1.0;
    let mut z = yt.add_scaled(-1.0 / *smoothness, &g);
    let mut f_z = f.value(&z)?;
    if opts.adaptive_smoothness {
        let mut doublings = 0;
        while f_z > f_yt - g_sq / (2.0 * *smoothness) {
            doublings += 1;
            if doublings > MAX_DOUBLINGS {
                return Err(OptError::StepSearchFailed {
                    what: "smoothness doubling",
                    attempts: doublings,
                });
            }
            *smoothness *= 2.0;
            factor *= 2.0;
            z = yt.add_scaled(-1.0 / *smoothness, &g);
            f_z = f.value(&z)?;
        }
        if factor > 1.0 {
            return Ok(Certification {
                f_yt,
                grad_yt: Some(g),
                psi: None,
                failure: None,
                smoothness_factor: factor,
            });
        }
    }
    let sigma = params.strong_convexity;
    let psi = f_y0 - f_z + 0.5 * sigma * z.dist_sq(y0);
    let kappa = *smoothness / sigma;
    let threshold = 2.0 * *smoothness * psi * (-(t as f64) / kappa.sqrt()).exp();
    let failure = if g_sq > threshold { Some((z, f_z)) } else { None };
    Ok(Certification {
        f_yt,
        grad_yt: Some(g),
        psi: Some(psi),
        failure,
        smoothness_factor: 1.0,
    })
}

/// Iterate histories with lazily filled value/gradient caches.
struct History<'a> {
    xs: &'a [Vector],
    ys: &'a [Vector],
    x_values: Vec<Option<f64>>,
    x_gradients: Vec<Option<Vector>>,
    y_values: Vec<Option<f64>>,
}

/// Scans `j = 0..t−1` and `u ∈ {y_j, w_t}` (in that order) and returns the
/// first pair `(u, x_j)` with
/// `f(u) < f(x_j) + ∇f(x_j)ᵀ(u − x_j) + (σ/2)‖u − x_j‖²`.
///
/// `xs` and `ys` must hold at least `t` entries each, where `t = xs.len()`
/// indexes the scan bound. Reaching the end of the scan is an error: for a
/// correctly configured run it cannot happen.
pub fn find_witness_pair(
    f: &mut dyn Oracle,
    xs: &[Vector],
    ys: &[Vector],
    w_t: &Vector,
    sigma: f64,
) -> Result<WitnessPair> {
    let t = xs.len().min(ys.len());
    let mut h = History {
        xs: &xs[..t],
        ys: &ys[..t],
        x_values: vec![None; t],
        x_gradients: vec![None; t],
        y_values: vec![None; t],
    };
    let f_w = f.value(w_t)?;
    scan_for_witness(f, &mut h, w_t, f_w, sigma)
}

fn scan_for_witness(
    f: &mut dyn Oracle,
    h: &mut History<'_>,
    w_t: &Vector,
    f_w: f64,
    sigma: f64,
) -> Result<WitnessPair> {
    for j in 0..h.xs.len() {
        let x_j = &h.xs[j];
        for source in [WitnessSource::Iterate, WitnessSource::Certificate] {
            let (u, f_u) = match source {
                WitnessSource::Iterate => {
                    let y = &h.ys[j];
                    let v = match h.y_values[j] {
                        Some(v) => v,
                        None => {
                            let v = f.value(y)?;
                            h.y_values[j] = Some(v);
                            v
                        }
                    };
                    (y, v)
                }
                WitnessSource::Certificate => (w_t, f_w),
            };
            let f_x = match h.x_values[j] {
                Some(v) => v,
                None => {
                    let v = f.value(x_j)?;
                    h.x_values[j] = Some(v);
                    v
                }
            };
            if h.x_gradients[j].is_none() {
                h.x_gradients[j] = Some(f.gradient(x_j)?);
            }
            let g = h.x_gradients[j].as_ref().expect("filled above");
            let diff = u.sub(x_j);
            let bound = f_x + g.dot_unchecked(&diff) + 0.5 * sigma * diff.norm_sq();
            if f_u < bound {
                return Ok(WitnessPair {
                    u: u.clone(),
                    v: x_j.clone(),
                    violation_margin: bound - f_u,
                    v_index: j,
                    u_source: source,
                    f_u,
                    f_v: f_x,
                });
            }
        }
    }
    Err(OptError::CertificateContradiction)
}

/// Runs monitored AGD from `y0`, recording a trace of its steps.
pub fn run_monitored_agd(
    f: &mut dyn Oracle,
    y0: &Vector,
    params: &AgdParams,
) -> Result<(AgdOutcome, RunTrace)> {
    let mut trace = RunTrace::enabled();
    let res = {
        let mut obs = TraceObserver {
            trace: &mut trace,
            outer_step: 0,
        };
        run_monitored_agd_with(f, y0, params, &AgdOptions::default(), &mut obs)
    };
    match res {
        Ok(outcome) => Ok((outcome, trace)),
        Err(OptError::MaxIterations { what, limit, .. }) => Err(OptError::MaxIterations {
            what,
            limit,
            trace: Box::new(trace),
        }),
        Err(e) => Err(e),
    }
}

/// Monitored AGD with practical-mode options and an observer.
///
/// Evaluation accounting with `check_interval = 1` and default options, per
/// iteration: one gradient at `x_{t−1}`, one value at `y_t`, and (unless
/// `f(y_t) > f(y_0)`) one gradient at `y_t` and one value at `z_t`. The
/// start costs one value evaluation. The witness scan evaluates `f(x_j)`
/// lazily and reuses every cached gradient.
pub fn run_monitored_agd_with(
    f: &mut dyn Oracle,
    y0: &Vector,
    params: &AgdParams,
    opts: &AgdOptions,
    observer: &mut dyn AgdObserver,
) -> Result<AgdOutcome> {
    params.validate()?;
    if y0.dim() != f.dim() {
        return Err(OptError::DimensionMismatch {
            expected: f.dim(),
            got: y0.dim(),
        });
    }
    let mut smoothness = params.smoothness;
    let sigma = params.strong_convexity;
    let omega = params.momentum();

    let f_y0 = f.value(y0)?;
    let mut xs = vec![y0.clone()];
    let mut ys = vec![y0.clone()];
    let mut x_values = vec![Some(f_y0)];
    let mut y_values = vec![Some(f_y0)];
    let mut x_gradients: Vec<Vector> = Vec::new();
    let mut psi: Vec<Option<f64>> = vec![None];
    observer.on_step(0, y0, Some(f_y0), None, f.counters());

    let mut t = 0usize;
    loop {
        t += 1;
        if t > params.max_iters {
            return Err(OptError::MaxIterations {
                what: "monitored AGD",
                limit: params.max_iters,
                trace: Box::default(),
            });
        }
        let x_prev = &xs[t - 1];
        let (f_x_prev, g) = if opts.adaptive_smoothness || opts.extra_convexity_check {
            match x_values[t - 1] {
                Some(v) => (Some(v), f.gradient(x_prev)?),
                None => {
                    let (v, g) = f.value_and_gradient(x_prev)?;
                    (Some(v), g)
                }
            }
        } else {
            (x_values[t - 1], f.gradient(x_prev)?)
        };
        if let Some(v) = f_x_prev {
            x_values[t - 1] = Some(v);
        }
        let mut y_t = x_prev.add_scaled(-1.0 / smoothness, &g);
        let mut f_yt = None;
        let mut factor = 1.0;
        if opts.adaptive_smoothness {
            let fx = f_x_prev.expect("evaluated above");
            let g_sq = g.norm_sq();
            let mut fy = f.value(&y_t)?;
            let mut doublings = 0;
            while fy > fx - g_sq / (2.0 * smoothness) {
                doublings += 1;
                if doublings > MAX_DOUBLINGS {
                    return Err(OptError::StepSearchFailed {
                        what: "smoothness doubling",
                        attempts: doublings,
                    });
                }
                smoothness *= 2.0;
                factor *= 2.0;
                y_t = x_prev.add_scaled(-1.0 / smoothness, &g);
                fy = f.value(&y_t)?;
            }
            f_yt = Some(fy);
        }
        let x_t = extrapolate(&y_t, &ys[t - 1], omega);
        x_gradients.push(g);
        xs.push(x_t);
        ys.push(y_t);
        x_values.push(None);
        y_values.push(f_yt);
        psi.push(None);

        if factor > 1.0 {
            observer.on_step(t, &ys[t], f_yt, None, f.counters());
            return Ok(AgdOutcome {
                xs,
                ys,
                y_values,
                x_values,
                x_gradients,
                last_gradient: None,
                psi,
                certificate: None,
                witness: None,
                status: AgdStatus::SmoothnessIncreased { factor },
                iters: t,
                params: AgdParams {
                    smoothness,
                    ..*params
                },
            });
        }

        if t % params.check_interval != 0 {
            observer.on_step(t, &ys[t], f_yt, None, f.counters());
            continue;
        }

        let origin = f_x_prev.map(|fx| StepOrigin {
            x_prev: &xs[t - 1],
            f_x_prev: fx,
            grad_x_prev: &x_gradients[t - 1],
        });
        let cert = certify_cached(
            f,
            y0,
            f_y0,
            &ys[t],
            f_yt,
            t,
            &mut smoothness,
            params,
            opts,
            origin,
        )?;
        y_values[t] = Some(cert.f_yt);
        psi[t] = cert.psi;
        observer.on_step(t, &ys[t], Some(cert.f_yt), cert.grad_yt.as_ref(), f.counters());

        if cert.smoothness_factor > 1.0 {
            return Ok(AgdOutcome {
                xs,
                ys,
                y_values,
                x_values,
                x_gradients,
                last_gradient: cert.grad_yt,
                psi,
                certificate: None,
                witness: None,
                status: AgdStatus::SmoothnessIncreased {
                    factor: cert.smoothness_factor,
                },
                iters: t,
                params: AgdParams {
                    smoothness,
                    ..*params
                },
            });
        }

        if let Some((w, f_w)) = cert.failure {
            observer.on_certify_fail(t, f.counters());
            let mut h = History {
                xs: &xs[..t],
                ys: &ys[..t],
                x_values: x_values[..t].to_vec(),
                x_gradients: x_gradients[..t].iter().cloned().map(Some).collect(),
                y_values: y_values[..t].to_vec(),
            };
            let witness = scan_for_witness(f, &mut h, &w, f_w, sigma)?;
            for (j, v) in h.x_values.iter().enumerate() {
                if v.is_some() {
                    x_values[j] = *v;
                }
            }
            for (j, v) in h.y_values.iter().enumerate() {
                if v.is_some() {
                    y_values[j] = *v;
                }
            }
            observer.on_witness(t, &witness, f.counters());
            return Ok(AgdOutcome {
                xs,
                ys,
                y_values,
                x_values,
                x_gradients,
                last_gradient: cert.grad_yt,
                psi,
                certificate: Some((w, f_w)),
                witness: Some(witness),
                status: AgdStatus::Witness,
                iters: t,
                params: *params,
            });
        }

        let g_norm = cert.grad_yt.as_ref().map(Vector::norm).expect("computed");
        if g_norm <= params.target_eps {
            return Ok(AgdOutcome {
                xs,
                ys,
                y_values,
                x_values,
                x_gradients,
                last_gradient: cert.grad_yt,
                psi,
                certificate: None,
                witness: None,
                status: AgdStatus::Stationary,
                iters: t,
                params: *params,
            });
        }
    }
}
