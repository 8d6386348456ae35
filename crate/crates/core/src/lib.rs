//! First-order non-convex optimization built around accelerated gradient
//! descent that certifies its own progress.
//!
//! The pieces, bottom up:
//!
//! * [`vector`], [`oracle`], [`trace`]: dense vectors, counted objective
//!   access and event traces.
//! * [`agd_monitor`]: accelerated gradient descent that either reaches a
//!   small gradient or returns a pair of points proving the objective is not
//!   strongly convex.
//! * [`nc_exploit`]: steps that turn such a pair into function decrease, and
//!   best-iterate selection.
//! * [`driver`]: the outer proximal loop combining the two, in second-order,
//!   third-order and practical parameter regimes.
//! * [`baselines`]: gradient descent, restarted AGD and nonlinear conjugate
//!   gradient for comparison.
//! * [`problems`]: robust biweight regression, quadratics, a separable
//!   double well and small test functions with saddles.
//! * [`harness`]: seeded experiment batches, JSON-lines traces and CSV
//!   summaries.

// `!(x > 0.0)` is used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agd_monitor;
pub mod baselines;
pub mod driver;
pub mod error;
pub mod harness;
pub mod nc_exploit;
pub mod oracle;
pub mod problems;
pub mod rng;
pub mod trace;
pub mod vector;

pub use agd_monitor::{AgdOutcome, AgdParams, WitnessPair};
pub use driver::{GuardedConfig, GuardedResult, Mode};
pub use error::{OptError, Result};
pub use oracle::{CountingOracle, EvalCounters, KnownConstants, Objective, Oracle};
pub use trace::{Event, RunTrace, TraceRecord};
pub use vector::{dot, norm, Vector};
