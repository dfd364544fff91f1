//! Python bindings: model parameters, phase points, single runs, the
//! threshold searches and the boundary audit.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyList;
use serde::Serialize;

use cohom1::asymptotics::catalog::catalog_audit;
use cohom1::cli::output::RunSummary;
use cohom1::run::{self as core_run, RunReport, RunSpec};
use cohom1::search::{self, SearchOptions};
use cohom1::{phase, regions, Error};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::InvalidParams(_) | Error::Bracket { .. } | Error::SeedTooShallow { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

/// Serializes through JSON into plain Python objects.
fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (s,))?.unbind())
}

#[pyclass(name = "ModelParams", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyModelParams {
    inner: cohom1::ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (m, k, epsilon = 0))]
    fn new(m: u32, k: u32, epsilon: u8) -> PyResult<Self> {
        cohom1::ModelParams::new(m, k, epsilon)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    #[getter]
    fn m(&self) -> u32 {
        self.inner.m()
    }

    #[getter]
    fn k(&self) -> u32 {
        self.inner.k()
    }

    #[getter]
    fn epsilon(&self) -> u8 {
        self.inner.epsilon()
    }

    /// Principal orbit dimension `4m + 3`.
    #[getter]
    fn n(&self) -> u32 {
        self.inner.n()
    }

    fn __repr__(&self) -> String {
        format!(
            "ModelParams(m={}, k={}, epsilon={})",
            self.inner.m(),
            self.inner.k(),
            self.inner.epsilon()
        )
    }
}

#[pyclass(name = "PhasePoint", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyPhasePoint {
    inner: cohom1::PhasePoint,
}

#[pymethods]
impl PyPhasePoint {
    /// Coordinates in the order X1, X2, X3, Z1, Z2, Z3, Z4, W.
    #[new]
    fn new(coords: [f64; 8]) -> Self {
        Self {
            inner: cohom1::PhasePoint::from_array(coords),
        }
    }

    fn to_list(&self) -> [f64; 8] {
        self.inner.to_array()
    }

    fn __getitem__(&self, i: usize) -> PyResult<f64> {
        self.inner
            .to_array()
            .get(i)
            .copied()
            .ok_or_else(|| pyo3::exceptions::PyIndexError::new_err(i))
    }

    fn __len__(&self) -> usize {
        8
    }

    fn __repr__(&self) -> String {
        let a: Vec<String> = self
            .inner
            .to_array()
            .iter()
            .map(|v| format!("{v:.6e}"))
            .collect();
        format!("PhasePoint([{}])", a.join(", "))
    }
}

#[pyfunction]
fn vector_field(p: PyPhasePoint, mp: PyModelParams) -> PyPhasePoint {
    PyPhasePoint {
        inner: phase::vector_field(&p.inner, &mp.inner),
    }
}

/// `G`, `H`, `Q` and the curvature terms as a dict.
#[pyfunction]
fn derived_scalars(py: Python<'_>, p: PyPhasePoint, mp: PyModelParams) -> PyResult<Py<PyAny>> {
    to_py(py, &phase::derived_scalars(&p.inner, &mp.inner))
}

#[pyfunction]
#[pyo3(signature = (p, mp, tol = 1e-9))]
fn region_of(py: Python<'_>, p: PyPhasePoint, mp: PyModelParams, tol: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &regions::region_of(&p.inner, &mp.inner, tol))
}

/// Catalog points with their residuals.
#[pyfunction]
fn critical_points(py: Python<'_>, mp: PyModelParams) -> PyResult<Py<PyAny>> {
    to_py(py, &catalog_audit(&mp.inner))
}

#[pyclass(name = "RunResult", frozen)]
struct PyRunResult {
    report: RunReport,
}

#[pymethods]
impl PyRunResult {
    #[getter]
    fn label(&self) -> &'static str {
        self.report.classification.label.name()
    }

    #[getter]
    fn outcome(&self) -> &'static str {
        self.report.classification.outcome.name()
    }

    #[getter]
    fn limit_point(&self) -> Option<&'static str> {
        self.report.classification.limit_point.map(|i| i.name())
    }

    #[getter]
    fn eta_exit(&self) -> Option<f64> {
        self.report.classification.eta_exit
    }

    #[getter]
    fn mu2(&self) -> f64 {
        self.report.classification.mu2
    }

    #[getter]
    fn nu2(&self) -> f64 {
        self.report.classification.nu2
    }

    /// Rows `[eta, X1, X2, X3, Z1, Z2, Z3, Z4, W]`.
    fn samples<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyList>> {
        let rows: Vec<Vec<f64>> = self
            .report
            .trajectory
            .samples
            .iter()
            .map(|s| std::iter::once(s.eta).chain(s.p.to_array()).collect())
            .collect();
        PyList::new(py, rows)
    }

    /// The same summary `cohom1 integrate` writes, as a dict.
    fn summary(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &RunSummary::from_report(&self.report))
    }

    fn __repr__(&self) -> String {
        format!(
            "RunResult(label={}, outcome={}, limit_point={})",
            self.label(),
            self.outcome(),
            self.limit_point().unwrap_or("None")
        )
    }
}

/// Integrates `xi(k, theta, s4, s5)` from the seed and classifies it.
#[pyfunction]
#[pyo3(signature = (mp, theta, s4 = 0.0, s5 = 0.0, eta_max = None))]
fn run(
    py: Python<'_>,
    mp: PyModelParams,
    theta: f64,
    s4: f64,
    s5: f64,
    eta_max: Option<f64>,
) -> PyResult<PyRunResult> {
    let mut spec = RunSpec::new(mp.inner, theta, s4, s5);
    if let Some(e) = eta_max {
        spec.cfg.eta_max = e;
    }
    let report = py.detach(|| core_run::run(&spec)).map_err(py_err)?;
    Ok(PyRunResult { report })
}

fn options(tol: f64, eta_max: f64, audit: bool) -> SearchOptions {
    SearchOptions {
        tol,
        eta_max,
        audit,
    }
}

#[pyfunction]
#[pyo3(signature = (mp, theta, lo = 0.0, hi = search::DEFAULT_S4_MAX, tol = search::DEFAULT_TOL, eta_max = 60.0, audit = true))]
#[allow(clippy::too_many_arguments)]
fn find_alpha(
    py: Python<'_>,
    mp: PyModelParams,
    theta: f64,
    lo: f64,
    hi: f64,
    tol: f64,
    eta_max: f64,
    audit: bool,
) -> PyResult<Py<PyAny>> {
    let opts = options(tol, eta_max, audit);
    let r = py
        .detach(|| search::find_alpha(&mp.inner, theta, (lo, hi), &opts))
        .map_err(py_err)?;
    to_py(py, &r)
}

#[pyfunction]
#[pyo3(signature = (mp, theta, s5_grid = None, lo = 0.0, hi = search::DEFAULT_S4_MAX, tol = search::DEFAULT_TOL, eta_max = 60.0))]
#[allow(clippy::too_many_arguments)]
fn find_beta(
    py: Python<'_>,
    mp: PyModelParams,
    theta: f64,
    s5_grid: Option<Vec<f64>>,
    lo: f64,
    hi: f64,
    tol: f64,
    eta_max: f64,
) -> PyResult<Py<PyAny>> {
    let grid = s5_grid.unwrap_or_else(search::default_s5_grid);
    let opts = options(tol, eta_max, false);
    let r = py
        .detach(|| search::find_beta(&mp.inner, theta, &grid, (lo, hi), &opts))
        .map_err(py_err)?;
    to_py(py, &r)
}

#[pyfunction]
#[pyo3(signature = (mp, tol = search::DEFAULT_THETA_TOL, eta_max = 60.0))]
fn find_theta_star(
    py: Python<'_>,
    mp: PyModelParams,
    tol: f64,
    eta_max: f64,
) -> PyResult<Py<PyAny>> {
    let opts = options(tol, eta_max, false);
    let r = py
        .detach(|| search::find_theta_star(&mp.inner, &opts))
        .map_err(py_err)?;
    to_py(py, &r)
}

#[pyfunction]
#[pyo3(signature = (mp, samples = 10_000, seed = cohom1::verify::DEFAULT_AUDIT_SEED))]
fn boundary_sign_audit(
    py: Python<'_>,
    mp: PyModelParams,
    samples: usize,
    seed: u64,
) -> PyResult<Py<PyAny>> {
    let r = py.detach(|| regions::boundary_sign_audit(&mp.inner, samples, seed));
    to_py(py, &r)
}

#[pymodule]
fn pycohom1(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyPhasePoint>()?;
    m.add_class::<PyRunResult>()?;
    m.add_function(wrap_pyfunction!(vector_field, m)?)?;
    m.add_function(wrap_pyfunction!(derived_scalars, m)?)?;
    m.add_function(wrap_pyfunction!(region_of, m)?)?;
    m.add_function(wrap_pyfunction!(critical_points, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(find_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(find_beta, m)?)?;
    m.add_function(wrap_pyfunction!(find_theta_star, m)?)?;
    m.add_function(wrap_pyfunction!(boundary_sign_audit, m)?)?;
    Ok(())
}
