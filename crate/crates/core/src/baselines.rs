//! Reference methods: gradient descent, restarted AGD and PR+ nonlinear
//! conjugate gradient.
//!
//! All three stop on `‖∇f(x)‖ ≤ ε` evaluated on a fresh gradient and count a
//! step per gradient-based update. GD and RAGD use the semi-adaptive step
//! rule: `L` starts at 1 and doubles whenever `f(x − ∇f(x)/L)` misses
//! `f(x) − ‖∇f(x)‖²/(2L)`.

use serde::{Deserialize, Serialize};

use crate::error::{OptError, Result};
use crate::oracle::{EvalCounters, Oracle};
use crate::trace::{Event, RunTrace};
use crate::vector::Vector;

/// More doublings or halvings than this means the oracle is broken.
pub const MAX_STEP_SEARCH: usize = 200;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemiAdaptiveL {
    pub current_l: f64,
    pub doublings: u32,
}

impl Default for SemiAdaptiveL {
    fn default() -> Self {
        SemiAdaptiveL {
            current_l: 1.0,
            doublings: 0,
        }
    }
}

/// Doubles `state.current_l` until the sufficient-decrease test passes and
/// returns the accepted point with its value. One value evaluation per trial.
pub fn semi_adaptive_gradient_step(
    f: &mut dyn Oracle,
    x: &Vector,
    f_x: f64,
    grad: &Vector,
    state: &mut SemiAdaptiveL,
) -> Result<(Vector, f64)> {
    let g2 = grad.norm_sq();
    let mut tries = 0;
    loop {
        let l = state.current_l;
        let y = x.add_scaled(-1.0 / l, grad);
        let f_y = f.value(&y)?;
        if f_y <= f_x - g2 / (2.0 * l) {
            return Ok((y, f_y));
        }
        tries += 1;
        if tries > MAX_STEP_SEARCH {
            return Err(OptError::StepSearchFailed {
                what: "smoothness doubling",
                attempts: tries,
            });
        }
        state.current_l = 2.0 * l;
        state.doublings += 1;
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub eps: f64,
    pub max_steps: usize,
    pub record_trace: bool,
}

impl BaselineConfig {
    pub fn new(eps: f64, max_steps: usize) -> Self {
        BaselineConfig {
            eps,
            max_steps,
            record_trace: false,
        }
    }

    pub fn with_trace(mut self, on: bool) -> Self {
        self.record_trace = on;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(OptError::InvalidParameter(format!(
                "ε must be positive, got {}",
                self.eps
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct BaselineResult {
    pub x_final: Vector,
    pub f_final: f64,
    pub grad_norm_final: f64,
    pub converged: bool,
    pub steps: usize,
    /// Function-value restarts (RAGD).
    pub restarts: usize,
    /// Restarts caused by a smoothness doubling (RAGD).
    pub smoothness_restarts: usize,
    pub final_l: f64,
    pub doublings: u32,
    pub trace: RunTrace,
    pub counters: EvalCounters,
}

/// Momentum `t/(t+3)` used by RAGD after `t` steps since the last restart.
pub fn ragd_momentum(t: usize) -> f64 {
    t as f64 / (t as f64 + 3.0)
}

/// PR+ coefficient `max{g_tᵀ(g_t − g_{t−1})/‖g_{t−1}‖², 0}`.
pub fn pr_plus_beta(g: &Vector, g_prev: &Vector) -> f64 {
    let denom = g_prev.norm_sq();
    if denom == 0.0 {
        return 0.0;
    }
    (g.dot_unchecked(&g.sub(g_prev)) / denom).max(0.0)
}

struct Run {
    trace: RunTrace,
    start: EvalCounters,
}

impl Run {
    fn new(f: &dyn Oracle, cfg: &BaselineConfig) -> Self {
        Run {
            trace: RunTrace::new(cfg.record_trace),
            start: f.counters(),
        }
    }

    fn log(&mut self, f: &dyn Oracle, step: usize, fv: Option<f64>, gn: Option<f64>, e: Event) {
        let c = f.counters().since(self.start);
        self.trace.push(0, step as u64, fv, gn, e, c);
    }
}

pub fn run_gd(f: &mut dyn Oracle, x0: &Vector, cfg: &BaselineConfig) -> Result<BaselineResult> {
    cfg.validate()?;
    let mut run = Run::new(f, cfg);
    let mut l = SemiAdaptiveL::default();
    let mut x = x0.clone();
    let (mut fx, mut g) = f.value_and_gradient(&x)?;
    let mut steps = 0;
    run.log(f, 0, Some(fx), Some(g.norm()), Event::AgdStep);
    let converged = loop {
        if g.norm() <= cfg.eps {
            break true;
        }
        if steps >= cfg.max_steps {
            break false;
        }
        let (y, fy) = semi_adaptive_gradient_step(f, &x, fx, &g, &mut l)?;
        x = y;
        fx = fy;
        g = f.gradient(&x)?;
        steps += 1;
        run.log(f, steps, Some(fx), Some(g.norm()), Event::AgdStep);
    };
    run.log(f, steps, Some(fx), Some(g.norm()), Event::Terminate);
    Ok(BaselineResult {
        grad_norm_final: g.norm(),
        x_final: x,
        f_final: fx,
        converged,
        steps,
        restarts: 0,
        smoothness_restarts: 0,
        final_l: l.current_l,
        doublings: l.doublings,
        counters: f.counters().since(run.start),
        trace: run.trace,
    })
}

/// AGD with momentum `t/(t+3)`, restarted from `y_t` whenever
/// `f(y_t) > f(y_{t−1})` or the smoothness estimate doubles. A restart resets
/// `t` to 0.
pub fn run_ragd(f: &mut dyn Oracle, x0: &Vector, cfg: &BaselineConfig) -> Result<BaselineResult> {
    cfg.validate()?;
    let mut run = Run::new(f, cfg);
    let mut l = SemiAdaptiveL::default();
    let mut x = x0.clone();
    let mut f_x = None;
    let mut y_prev = x0.clone();
    let mut f_y_prev = f64::INFINITY;
    let mut t = 0;
    let mut steps = 0;
    let mut restarts = 0;
    let mut smoothness_restarts = 0;
    let (converged, fx_final, g_final) = loop {
        let (fx, g) = match f_x {
            Some(v) => (v, f.gradient(&x)?),
            None => f.value_and_gradient(&x)?,
        };
        if steps == 0 {
            f_y_prev = fx;
            run.log(f, 0, Some(fx), Some(g.norm()), Event::AgdStep);
        }
        if g.norm() <= cfg.eps {
            break (true, fx, g);
        }
        if steps >= cfg.max_steps {
            break (false, fx, g);
        }
        let before = l.doublings;
        let (y, fy) = semi_adaptive_gradient_step(f, &x, fx, &g, &mut l)?;
        steps += 1;
        run.log(f, steps, Some(fy), None, Event::AgdStep);
        let restart = if l.doublings > before {
            smoothness_restarts += 1;
            Some(Event::RestartSmoothness)
        } else if fy > f_y_prev {
            restarts += 1;
            Some(Event::Restart)
        } else {
            None
        };
        match restart {
            Some(e) => {
                run.log(f, steps, Some(fy), None, e);
                t = 0;
                x = y.clone();
                f_x = Some(fy);
            }
            None => {
                t += 1;
                x = y.lin_comb(1.0 + ragd_momentum(t), &y_prev, -ragd_momentum(t));
                f_x = None;
            }
        }
        y_prev = y;
        f_y_prev = fy;
    };
    run.log(f, steps, Some(fx_final), Some(g_final.norm()), Event::Terminate);
    Ok(BaselineResult {
        grad_norm_final: g_final.norm(),
        x_final: x,
        f_final: fx_final,
        converged,
        steps,
        restarts,
        smoothness_restarts,
        final_l: l.current_l,
        doublings: l.doublings,
        counters: f.counters().since(run.start),
        trace: run.trace,
    })
}

/// Polak–Ribière+ conjugate gradient with backtracking: the trial step starts
/// at twice the previous accepted step (1 on the first step) and halves until
/// `f(x + ηδ) ≤ f(x) + ηδᵀ∇f(x)/2`.
pub fn run_ncg(f: &mut dyn Oracle, x0: &Vector, cfg: &BaselineConfig) -> Result<BaselineResult> {
    cfg.validate()?;
    let mut run = Run::new(f, cfg);
    let mut x = x0.clone();
    let (mut fx, mut g) = f.value_and_gradient(&x)?;
    let mut delta = g.scaled(-1.0);
    let mut eta_prev = 0.5;
    let mut steps = 0;
    let mut resets = 0;
    run.log(f, 0, Some(fx), Some(g.norm()), Event::AgdStep);
    let converged = loop {
        if g.norm() <= cfg.eps {
            break true;
        }
        if steps >= cfg.max_steps {
            break false;
        }
        let mut slope = delta.dot_unchecked(&g);
        if slope >= 0.0 {
            delta = g.scaled(-1.0);
            slope = -g.norm_sq();
            resets += 1;
        }
        let mut eta = 2.0 * eta_prev;
        let mut halvings = 0;
        let (x_new, f_new) = loop {
            let cand = x.add_scaled(eta, &delta);
            let fc = f.value(&cand)?;
            if fc <= fx + eta * slope / 2.0 {
                break (cand, fc);
            }
            halvings += 1;
            if halvings > MAX_STEP_SEARCH {
                return Err(OptError::StepSearchFailed {
                    what: "conjugate gradient backtracking",
                    attempts: halvings,
                });
            }
            eta /= 2.0;
        };
        eta_prev = eta;
        let g_new = f.gradient(&x_new)?;
        let beta = pr_plus_beta(&g_new, &g);
        delta = delta.lin_comb(beta, &g_new, -1.0);
        x = x_new;
        fx = f_new;
        g = g_new;
        steps += 1;
        run.log(f, steps, Some(fx), Some(g.norm()), Event::AgdStep);
    };
    run.log(f, steps, Some(fx), Some(g.norm()), Event::Terminate);
    Ok(BaselineResult {
        grad_norm_final: g.norm(),
        x_final: x,
        f_final: fx,
        converged,
        steps,
        restarts: resets,
        smoothness_restarts: 0,
        final_l: f64::NAN,
        doublings: 0,
        counters: f.counters().since(run.start),
        trace: run.trace,
    })
}
