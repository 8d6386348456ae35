//! Python bindings: problems, the guarded method, baselines, the monitored
//! AGD core, curvature steps and the experiment harness.
//!
//! Points are plain lists of floats. Results come back as dicts.

use std::path::Path;
use std::sync::Arc;

use ncagd::agd_monitor::{run_monitored_agd as agd, AgdParams};
use ncagd::baselines::{run_gd, run_ncg, run_ragd, BaselineConfig, BaselineResult};
use ncagd::driver::{run_guarded as guarded, GuardedConfig, Mode};
use ncagd::harness::{run_experiment as experiment, ExperimentSpec};
use ncagd::nc_exploit;
use ncagd::problems::{double_well, ripple, BiweightInstance, Quadratic, RidgeWell};
use ncagd::{CountingOracle, KnownConstants, Objective, OptError, Vector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: OptError) -> PyErr {
    match e {
        OptError::InvalidParameter(_)
        | OptError::DimensionMismatch { .. }
        | OptError::MissingConstant(_) => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn vector(x: Vec<f64>) -> PyResult<Vector> {
    Vector::new(x).map_err(err)
}

/// Objective backed by a Python callable returning `(value, gradient)`.
struct Callable {
    dim: usize,
    func: Py<PyAny>,
    constants: KnownConstants,
}

impl Objective for Callable {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> ncagd::Result<f64> {
        Ok(self.value_and_gradient(x)?.0)
    }

    fn gradient(&self, x: &[f64]) -> ncagd::Result<Vec<f64>> {
        Ok(self.value_and_gradient(x)?.1)
    }

    fn value_and_gradient(&self, x: &[f64]) -> ncagd::Result<(f64, Vec<f64>)> {
        Python::attach(|py| {
            let out = self
                .func
                .call1(py, (x.to_vec(),))
                .and_then(|o| o.extract::<(f64, Vec<f64>)>(py))
                .map_err(|e| OptError::External(e.to_string()))?;
            if out.1.len() != self.dim {
                return Err(OptError::DimensionMismatch {
                    expected: self.dim,
                    got: out.1.len(),
                });
            }
            Ok(out)
        })
    }

    fn constants(&self) -> KnownConstants {
        self.constants
    }
}

/// An objective with its known constants.
#[pyclass(name = "Problem", module = "ncagd_py", frozen)]
struct PyProblem {
    inner: Arc<dyn Objective>,
}

#[pymethods]
impl PyProblem {
    /// Robust regression instance generated from `seed`.
    #[staticmethod]
    #[pyo3(signature = (seed, d = 30, m = 60))]
    fn biweight(seed: u64, d: usize, m: usize) -> Self {
        Self {
            inner: Arc::new(BiweightInstance::generate(seed, d, m).0),
        }
    }

    /// Biweight instance from its JSON serialization.
    #[staticmethod]
    fn biweight_from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(BiweightInstance::from_json(text).map_err(err)?),
        })
    }

    /// `½ Σ λᵢ xᵢ²`.
    #[staticmethod]
    fn quadratic(eigenvalues: Vec<f64>) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(Quadratic::new(eigenvalues).map_err(err)?),
        })
    }

    #[staticmethod]
    fn double_well(dim: usize) -> Self {
        Self {
            inner: Arc::new(double_well(dim)),
        }
    }

    #[staticmethod]
    fn ripple(dim: usize) -> Self {
        Self {
            inner: Arc::new(ripple(dim)),
        }
    }

    #[staticmethod]
    fn ridge_well(direction: Vec<f64>, offset: f64, valley_curvature: f64) -> PyResult<Self> {
        Ok(Self {
            inner: Arc::new(RidgeWell::new(direction, offset, valley_curvature).map_err(err)?),
        })
    }

    /// Wraps `func(x) -> (value, gradient)`. Constants left as `None` are
    /// unknown, which restricts the callable to practical mode and baselines.
    #[staticmethod]
    #[pyo3(signature = (dim, func, l1 = None, l2 = None, l3 = None))]
    fn from_callable(
        dim: usize,
        func: Py<PyAny>,
        l1: Option<f64>,
        l2: Option<f64>,
        l3: Option<f64>,
    ) -> Self {
        let constants = KnownConstants {
            l1,
            l2,
            l3,
            ..KnownConstants::default()
        };
        Self {
            inner: Arc::new(Callable {
                dim,
                func,
                constants,
            }),
        }
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn value(&self, x: Vec<f64>) -> PyResult<f64> {
        self.inner.value(&x).map_err(err)
    }

    fn gradient(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.gradient(&x).map_err(err)
    }

    /// Known constants as a dict; missing ones are `None`.
    fn constants<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let c = self.inner.constants();
        let d = PyDict::new(py);
        d.set_item("l1", c.l1)?;
        d.set_item("l2", c.l2)?;
        d.set_item("l3", c.l3)?;
        d.set_item("sigma", c.sigma)?;
        d.set_item("f_lower_bound", c.f_lower_bound)?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!("Problem(dim={})", self.inner.dim())
    }
}

fn parse_mode(mode: &str) -> PyResult<Mode> {
    match mode {
        "second_order" => Ok(Mode::SecondOrder),
        "third_order" => Ok(Mode::ThirdOrder),
        "practical" => Ok(Mode::Practical),
        _ => Err(PyValueError::new_err(format!(
            "unknown mode {mode:?}; expected second_order, third_order or practical"
        ))),
    }
}

/// Runs the guarded method from `x0` until `‖∇f‖ ≤ eps`.
#[pyfunction]
#[pyo3(signature = (problem, x0, mode = "practical", eps = 1e-4, nc_exploit = true, c1 = 0.01, max_steps = None, assert_lemmas = false))]
#[allow(clippy::too_many_arguments)]
fn run_guarded<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    x0: Vec<f64>,
    mode: &str,
    eps: f64,
    nc_exploit: bool,
    c1: f64,
    max_steps: Option<usize>,
    assert_lemmas: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let mode = parse_mode(mode)?;
    let f = problem.inner.clone();
    let mut cfg = match mode {
        Mode::Practical => GuardedConfig::practical(eps, c1),
        _ => GuardedConfig::from_constants(mode, eps, &f.constants()),
    }
    .map_err(err)?
    .with_nc_exploit(nc_exploit)
    .with_lemma_checks(assert_lemmas);
    if let Some(n) = max_steps {
        cfg = cfg.with_max_total_steps(n);
    }
    let x0 = vector(x0)?;
    let r = py
        .detach(|| guarded(&mut CountingOracle::new(f.as_ref()), &x0, &cfg))
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("x", r.p_final.into_inner())?;
    d.set_item("f", r.f_final)?;
    d.set_item("grad_norm", r.grad_norm_final)?;
    d.set_item("converged", r.converged)?;
    d.set_item("steps", r.steps)?;
    d.set_item("outer_iters", r.outer_iters)?;
    d.set_item("n_gradient", r.counters.n_gradient)?;
    d.set_item("n_value", r.counters.n_value)?;
    d.set_item("witness_events", r.witness_events)?;
    d.set_item("nc_exploit_wins", r.nc_exploit_wins)?;
    d.set_item("per_iter_progress", r.per_iter_progress)?;
    d.set_item("lemma_violations", r.lemma_violations)?;
    Ok(d)
}

fn baseline<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    x0: Vec<f64>,
    eps: f64,
    max_steps: usize,
    run: fn(&mut dyn ncagd::Oracle, &Vector, &BaselineConfig) -> ncagd::Result<BaselineResult>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = BaselineConfig::new(eps, max_steps);
    let x0 = vector(x0)?;
    let f = problem.inner.clone();
    let r = py
        .detach(|| run(&mut CountingOracle::new(f.as_ref()), &x0, &cfg))
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("x", r.x_final.into_inner())?;
    d.set_item("f", r.f_final)?;
    d.set_item("grad_norm", r.grad_norm_final)?;
    d.set_item("converged", r.converged)?;
    d.set_item("steps", r.steps)?;
    d.set_item("restarts", r.restarts)?;
    d.set_item("n_gradient", r.counters.n_gradient)?;
    d.set_item("n_value", r.counters.n_value)?;
    Ok(d)
}

/// Gradient descent with a doubling smoothness estimate.
#[pyfunction]
#[pyo3(signature = (problem, x0, eps = 1e-4, max_steps = 1_000_000))]
fn gradient_descent<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    x0: Vec<f64>,
    eps: f64,
    max_steps: usize,
) -> PyResult<Bound<'py, PyDict>> {
    baseline(py, problem, x0, eps, max_steps, run_gd)
}

/// Accelerated gradient descent with restarts.
#[pyfunction]
#[pyo3(signature = (problem, x0, eps = 1e-4, max_steps = 1_000_000))]
fn restarted_agd<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    x0: Vec<f64>,
    eps: f64,
    max_steps: usize,
) -> PyResult<Bound<'py, PyDict>> {
    baseline(py, problem, x0, eps, max_steps, run_ragd)
}

/// Polak-Ribière+ nonlinear conjugate gradient.
#[pyfunction]
#[pyo3(signature = (problem, x0, eps = 1e-4, max_steps = 1_000_000))]
fn conjugate_gradient<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    x0: Vec<f64>,
    eps: f64,
    max_steps: usize,
) -> PyResult<Bound<'py, PyDict>> {
    baseline(py, problem, x0, eps, max_steps, run_ncg)
}

/// One monitored AGD run with smoothness `l`, strong convexity `sigma`.
/// `witness` is `(u, v)` when strong convexity was disproved.
#[pyfunction]
fn run_monitored_agd<'py>(
    py: Python<'py>,
    problem: &PyProblem,
    y0: Vec<f64>,
    l: f64,
    sigma: f64,
    eps: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let params = AgdParams::new(l, sigma, eps).map_err(err)?;
    let y0 = vector(y0)?;
    let f = problem.inner.clone();
    let (out, _) = py
        .detach(|| agd(&mut CountingOracle::new(f.as_ref()), &y0, &params))
        .map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("iters", out.iters)?;
    d.set_item("iteration_bound", out.iteration_bound())?;
    d.set_item("stationary", out.terminated_stationary())?;
    d.set_item("y", out.ys.last().map(|y| y.clone().into_inner()))?;
    d.set_item("witness", out.witness.map(|w| (w.u.into_inner(), w.v.into_inner())))?;
    Ok(d)
}

/// Curvature step from a pair `(u, v)`: returns `(z, f(z))`. With
/// `third_order` the asymmetric variant is used.
#[pyfunction]
#[pyo3(signature = (problem, u, v, eta, third_order = false))]
fn exploit_nc_pair(
    problem: &PyProblem,
    u: Vec<f64>,
    v: Vec<f64>,
    eta: f64,
    third_order: bool,
) -> PyResult<(Vec<f64>, f64)> {
    let (u, v) = (vector(u)?, vector(v)?);
    let mut o = CountingOracle::new(problem.inner.as_ref());
    let r = if third_order {
        nc_exploit::exploit_nc_pair_3(&mut o, &u, &v, eta)
    } else {
        nc_exploit::exploit_nc_pair(&mut o, &u, &v, eta)
    }
    .map_err(err)?;
    Ok((r.z.into_inner(), r.f_z))
}

/// Value at `theta` of the cubic through `h(0), h(−½), h(−1), h(−3)`.
#[pyfunction]
fn cubic_reconstruct(h: [f64; 4], theta: f64) -> f64 {
    nc_exploit::cubic_reconstruct(h, theta)
}

/// Runs a TOML experiment spec into `out_dir`; returns the exit code
/// (0 ok, 2 run errors, 3 assertion failures).
#[pyfunction]
#[pyo3(signature = (spec_toml, out_dir, parallelism = 0))]
fn run_experiment(py: Python<'_>, spec_toml: &str, out_dir: &str, parallelism: usize) -> PyResult<i32> {
    let spec = ExperimentSpec::from_toml(spec_toml).map_err(err)?;
    let rep = py
        .detach(|| experiment(&spec, Path::new(out_dir), parallelism))
        .map_err(err)?;
    Ok(rep.exit_code())
}

#[pymodule]
fn ncagd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_function(wrap_pyfunction!(run_guarded, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_descent, m)?)?;
    m.add_function(wrap_pyfunction!(restarted_agd, m)?)?;
    m.add_function(wrap_pyfunction!(conjugate_gradient, m)?)?;
    m.add_function(wrap_pyfunction!(run_monitored_agd, m)?)?;
    m.add_function(wrap_pyfunction!(exploit_nc_pair, m)?)?;
    m.add_function(wrap_pyfunction!(cubic_reconstruct, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
