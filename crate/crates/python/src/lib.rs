//! Python bindings. Results cross the boundary as plain dicts and lists
//! (via JSON), so they look the same as the CLI output.

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use dynpricing::equilibrium::solve_pbe_star;
use dynpricing::harness::{self, commands, OracleQuery};
use dynpricing::mechanism::{
    benchmark_two_period, commitment_optimum, evaluate_commitment, solve_relaxed,
};
use dynpricing::{kernel_from_ar1, Ar1Spec, Error};

create_exception!(dynpricing, ValidationError, PyValueError);
create_exception!(dynpricing, AssertionFailure, PyRuntimeError);
create_exception!(dynpricing, SolverError, PyRuntimeError);

fn py_err(e: Error) -> PyErr {
    match harness::exit_code(&e) {
        2 => AssertionFailure::new_err(e.to_string()),
        3 => ValidationError::new_err(e.to_string()),
        _ => SolverError::new_err(e.to_string()),
    }
}

fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// A distribution on a finite grid of types.
#[pyclass(name = "TypeGrid", module = "dynpricing", frozen)]
struct PyTypeGrid(dynpricing::TypeGrid);

#[pymethods]
impl PyTypeGrid {
    #[staticmethod]
    fn uniform(lo: f64, hi: f64, n: usize) -> PyResult<Self> {
        dynpricing::make_uniform(lo, hi, n).map(Self).map_err(py_err)
    }

    #[staticmethod]
    fn truncated_gaussian(mu: f64, sigma: f64, lo: f64, hi: f64, n: usize) -> PyResult<Self> {
        dynpricing::TypeGrid::truncated_gaussian(mu, sigma, lo, hi, n)
            .map(Self)
            .map_err(py_err)
    }

    #[staticmethod]
    fn discrete(points: Vec<f64>, weights: Vec<f64>) -> PyResult<Self> {
        dynpricing::TypeGrid::discrete(points, weights)
            .map(Self)
            .map_err(py_err)
    }

    #[getter]
    fn points(&self) -> Vec<f64> {
        self.0.points().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<f64> {
        self.0.weights().to_vec()
    }

    fn mean(&self) -> f64 {
        self.0.mean()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    /// Revenue-maximizing posted price, with its revenue and ties.
    fn monopoly_price(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &dynpricing::pricing::monopoly_price(&self.0))
    }

    fn __repr__(&self) -> String {
        format!(
            "TypeGrid(n={}, lo={}, hi={}, kind={:?})",
            self.0.len(),
            self.0.lo(),
            self.0.hi(),
            self.0.kind()
        )
    }
}

/// Two-period game where second-period values follow
/// `theta_2 = alpha theta_1 + noise`.
#[pyclass(name = "Game", module = "dynpricing", frozen)]
struct PyGame(dynpricing::TwoPeriodGame);

#[pymethods]
impl PyGame {
    #[staticmethod]
    #[pyo3(signature = (prior, alpha, noise, delta=1.0, n_theta2=None, n_price=None))]
    fn ar1(
        prior: &PyTypeGrid,
        alpha: f64,
        noise: &PyTypeGrid,
        delta: f64,
        n_theta2: Option<usize>,
        n_price: Option<usize>,
    ) -> PyResult<Self> {
        let n = prior.0.len();
        let spec = Ar1Spec {
            alpha,
            noise: noise.0.clone(),
        };
        let k = kernel_from_ar1(&spec, &prior.0, n_theta2.unwrap_or(n)).map_err(py_err)?;
        dynpricing::TwoPeriodGame::baseline(k, delta, n_price.unwrap_or(n))
            .map(Self)
            .map_err(py_err)
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.0.delta
    }

    #[getter]
    fn price_step(&self) -> f64 {
        self.0.price_step()
    }

    /// Revenue from posting each period's monopoly price.
    fn benchmark(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &benchmark_two_period(&self.0))
    }

    fn relaxed(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &solve_relaxed(&self.0).map_err(py_err)?)
    }

    fn commitment(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &commitment_optimum(&self.0))
    }

    fn evaluate_commitment(
        &self,
        py: Python<'_>,
        p1: f64,
        p_accept: f64,
        p_reject: f64,
    ) -> PyResult<Py<PyAny>> {
        to_py(py, &evaluate_commitment(&self.0, p1, p_accept, p_reject))
    }

    fn equilibrium(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &solve_pbe_star(&self.0).map_err(py_err)?)
    }
}

/// A validated scenario document.
#[pyclass(name = "Scenario", module = "dynpricing", frozen)]
struct PyScenario(harness::Scenario);

#[pymethods]
impl PyScenario {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        harness::parse_scenario(text).map(Self).map_err(py_err)
    }

    /// File path or the name of a bundled scenario.
    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        harness::load_scenario(path).map(Self).map_err(py_err)
    }

    fn with_grid(&self, n: usize) -> PyResult<Self> {
        self.0.clone().with_grid(n).map(Self).map_err(py_err)
    }

    #[getter]
    fn name(&self) -> String {
        self.0.label()
    }

    fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.0)
    }

    fn game(&self) -> PyResult<PyGame> {
        self.0.two_period_game().map(PyGame).map_err(py_err)
    }

    fn check(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &commands::check(&self.0).map_err(py_err)?)
    }

    fn monopoly(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &commands::monopoly(&self.0).map_err(py_err)?)
    }

    fn relax(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &commands::relax(&self.0).map_err(py_err)?)
    }

    fn commit(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &commands::commit(&self.0).map_err(py_err)?)
    }

    fn equilibrium(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &commands::equilibrium(&self.0).map_err(py_err)?)
    }

    #[pyo3(signature = (unrestricted=false))]
    fn enumerate(&self, py: Python<'_>, unrestricted: bool) -> PyResult<Py<PyAny>> {
        to_py(py, &commands::enumerate(&self.0, unrestricted).map_err(py_err)?)
    }

    #[pyo3(signature = (commit=true))]
    fn multi(&self, py: Python<'_>, commit: bool) -> PyResult<Py<PyAny>> {
        to_py(py, &commands::multi(&self.0, commit).map_err(py_err)?)
    }

    /// Sweep rows for a sweep document (JSON text or a bundled name).
    fn sweep(&self, py: Python<'_>, spec: &str) -> PyResult<Py<PyAny>> {
        let text = harness::bundled(spec).unwrap_or(spec);
        let spec = harness::parse_sweep(text).map_err(py_err)?;
        to_py(py, &harness::sweep(&self.0, &spec).map_err(py_err)?)
    }

    /// Brute-force answer, e.g. `"monopoly:2"` or `"threshold:1.5,1,2"`.
    fn oracle(&self, py: Python<'_>, query: &str) -> PyResult<Py<PyAny>> {
        let q: OracleQuery = query.parse().map_err(py_err)?;
        to_py(py, &harness::oracle_bruteforce(&self.0, &q).map_err(py_err)?)
    }
}

/// Re-runs a named example. Raises `AssertionFailure` when a check fails.
#[pyfunction]
#[pyo3(signature = (id, grid=None))]
fn reproduce(py: Python<'_>, id: &str, grid: Option<usize>) -> PyResult<Py<PyAny>> {
    let report = harness::reproduce(id, grid)
        .and_then(|r| r.into_result())
        .map_err(py_err)?;
    to_py(py, &report)
}

#[pyfunction]
fn bundled_names() -> Vec<&'static str> {
    harness::BUNDLED.iter().map(|(n, _)| *n).collect()
}

#[pymodule(name = "dynpricing")]
fn init_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyTypeGrid>()?;
    m.add_class::<PyGame>()?;
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(reproduce, m)?)?;
    m.add_function(wrap_pyfunction!(bundled_names, m)?)?;
    m.add("EXAMPLE_IDS", harness::EXAMPLE_IDS.to_vec())?;
    let py = m.py();
    m.add("ValidationError", py.get_type::<ValidationError>())?;
    m.add("AssertionFailure", py.get_type::<AssertionFailure>())?;
    m.add("SolverError", py.get_type::<SolverError>())?;
    Ok(())
}
