//! First-order oracle access with exact evaluation accounting.
//!
//! Users implement [`Objective`], a pure function of the point. Optimizers
//! never call an `Objective` directly; they go through an [`Oracle`], which
//! validates inputs and outputs and counts every value and gradient request.

use serde::{Deserialize, Serialize};

use crate::error::{OptError, Result};
use crate::vector::Vector;

/// Smoothness constants an objective may advertise.
///
/// `l1` bounds the gradient Lipschitz constant, `l2` the Hessian Lipschitz
/// constant and `l3` the third-derivative Lipschitz constant. `sigma` is a
/// global strong-convexity modulus when one exists.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KnownConstants {
    pub l1: Option<f64>,
    pub sigma: Option<f64>,
    pub l2: Option<f64>,
    pub l3: Option<f64>,
    pub f_lower_bound: Option<f64>,
}

/// A deterministic objective `f : R^d -> R` with its gradient.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> Result<f64>;

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;

    fn value_and_gradient(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((self.value(x)?, self.gradient(x)?))
    }

    fn constants(&self) -> KnownConstants {
        KnownConstants::default()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounters {
    pub n_value: u64,
    pub n_gradient: u64,
}

impl EvalCounters {
    pub fn since(&self, earlier: EvalCounters) -> EvalCounters {
        EvalCounters {
            n_value: self.n_value - earlier.n_value,
            n_gradient: self.n_gradient - earlier.n_gradient,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub value: Option<f64>,
    pub gradient: Option<Vector>,
}

/// Counted access to an objective. All optimizers are written against this.
pub trait Oracle {
    fn dim(&self) -> usize;

    /// Evaluates the requested quantities at `x`, charging one value and/or
    /// one gradient evaluation.
    fn eval(&mut self, x: &Vector, want_value: bool, want_gradient: bool) -> Result<Evaluation>;

    fn counters(&self) -> EvalCounters;

    fn constants(&self) -> KnownConstants;

    fn value(&mut self, x: &Vector) -> Result<f64> {
        let e = self.eval(x, true, false)?;
        Ok(e.value.expect("value requested"))
    }

    fn gradient(&mut self, x: &Vector) -> Result<Vector> {
        let e = self.eval(x, false, true)?;
        Ok(e.gradient.expect("gradient requested"))
    }

    fn value_and_gradient(&mut self, x: &Vector) -> Result<(f64, Vector)> {
        let e = self.eval(x, true, true)?;
        Ok((
            e.value.expect("value requested"),
            e.gradient.expect("gradient requested"),
        ))
    }
}

impl<O: Oracle + ?Sized> Oracle for &mut O {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn eval(&mut self, x: &Vector, want_value: bool, want_gradient: bool) -> Result<Evaluation> {
        (**self).eval(x, want_value, want_gradient)
    }

    fn counters(&self) -> EvalCounters {
        (**self).counters()
    }

    fn constants(&self) -> KnownConstants {
        (**self).constants()
    }
}

/// Wraps an [`Objective`] with input/output validation and counters.
pub struct CountingOracle<'a> {
    objective: &'a dyn Objective,
    counters: EvalCounters,
}

impl<'a> CountingOracle<'a> {
    pub fn new(objective: &'a dyn Objective) -> Self {
        CountingOracle {
            objective,
            counters: EvalCounters::default(),
        }
    }

    pub fn objective(&self) -> &'a dyn Objective {
        self.objective
    }
}

impl Oracle for CountingOracle<'_> {
    fn dim(&self) -> usize {
        self.objective.dim()
    }

    fn eval(&mut self, x: &Vector, want_value: bool, want_gradient: bool) -> Result<Evaluation> {
        let d = self.objective.dim();
        if x.dim() != d {
            return Err(OptError::DimensionMismatch {
                expected: d,
                got: x.dim(),
            });
        }
        if !x.is_finite() {
            return Err(OptError::NonFinite {
                what: "input",
                point: x.to_vec(),
            });
        }
        let (value, gradient) = match (want_value, want_gradient) {
            (false, false) => (None, None),
            (true, false) => {
                self.counters.n_value += 1;
                (Some(self.objective.value(x)?), None)
            }
            (false, true) => {
                self.counters.n_gradient += 1;
                (None, Some(self.objective.gradient(x)?))
            }
            (true, true) => {
                self.counters.n_value += 1;
                self.counters.n_gradient += 1;
                let (v, g) = self.objective.value_and_gradient(x)?;
                (Some(v), Some(g))
            }
        };
        if let Some(v) = value {
            if !v.is_finite() {
                return Err(OptError::NonFinite {
                    what: "function value",
                    point: x.to_vec(),
                });
            }
        }
        let gradient = match gradient {
            Some(g) => {
                if g.len() != d {
                    return Err(OptError::DimensionMismatch {
                        expected: d,
                        got: g.len(),
                    });
                }
                if !g.iter().all(|c| c.is_finite()) {
                    return Err(OptError::NonFinite {
                        what: "gradient",
                        point: x.to_vec(),
                    });
                }
                Some(Vector::from_vec_unchecked(g))
            }
            None => None,
        };
        Ok(Evaluation { value, gradient })
    }

    fn counters(&self) -> EvalCounters {
        self.counters
    }

    fn constants(&self) -> KnownConstants {
        self.objective.constants()
    }
}

pub fn oracle_eval(
    oracle: &mut dyn Oracle,
    x: &Vector,
    want_value: bool,
    want_gradient: bool,
) -> Result<(Option<f64>, Option<Vector>)> {
    let e = oracle.eval(x, want_value, want_gradient)?;
    Ok((e.value, e.gradient))
}
