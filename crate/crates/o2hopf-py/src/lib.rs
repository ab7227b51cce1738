//! Python bindings: reduced cubic system, channel problems, Evans function, run configurations.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;

use o2hopf::cli::{self, Command, RunConfig};
use o2hopf::model::energy::linearization_error;
use o2hopf::model::{ModelSystem, Problem};
use o2hopf::reduced_o2::{self, CubicCoefficients, ReducedPoint};
use o2hopf::reduction::{fit_coefficients, ReductionOptions, SyntheticParams, SyntheticSystem};
use o2hopf::spectral::eigen::eigenvalues_sorted;
use o2hopf::spectral::{assemble_lk, spectrum_in_region, Evans, EvansOptions, Region, WindingOptions};
use o2hopf::Error;

create_exception!(o2hopf_py, NumericalError, PyRuntimeError);

fn to_py(e: Error) -> PyErr {
    let msg = format!("{}: {}", e.kind(), e);
    match e.exit_code() {
        2 => PyValueError::new_err(msg),
        _ => NumericalError::new_err(msg),
    }
}

/// Serializable value as plain Python objects via the json module.
fn json_obj<T: serde::Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (s,))?.unbind())
}

fn model_by_name(name: &str) -> PyResult<ModelSystem> {
    match name {
        "m0" => Ok(RunConfig::m0().model),
        "m1" => Ok(RunConfig::m1().model),
        other => Err(PyValueError::new_err(format!("unknown model {other:?} (expected \"m0\" or \"m1\")"))),
    }
}

fn sign(sign_eps: i8) -> PyResult<i8> {
    match sign_eps {
        1 | -1 => Ok(sign_eps),
        s => Err(PyValueError::new_err(format!("sign_eps must be +1 or -1 (got {s})"))),
    }
}

#[pyclass(name = "CubicCoefficients", frozen)]
struct PyCubic {
    inner: CubicCoefficients,
}

#[pymethods]
impl PyCubic {
    #[new]
    fn new(kappa: f64, chi: f64, lambda_: Complex64, gamma: Complex64) -> PyResult<Self> {
        Ok(PyCubic { inner: CubicCoefficients::new(kappa, chi, lambda_, gamma).map_err(to_py)? })
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa
    }

    #[getter]
    fn chi(&self) -> f64 {
        self.inner.chi
    }

    #[getter]
    fn lambda_(&self) -> Complex64 {
        self.inner.lambda
    }

    #[getter]
    fn gamma(&self) -> Complex64 {
        self.inner.gamma
    }

    #[pyo3(signature = (tol = reduced_o2::DEFAULT_GENERICITY_TOL))]
    fn genericity(&self, py: Python<'_>, tol: f64) -> PyResult<Py<PyAny>> {
        json_obj(py, &reduced_o2::check_genericity_with_tol(&self.inner, tol))
    }

    /// Equilibrium branches of the truncated system for sgn(eps).
    fn equilibria(&self, py: Python<'_>, sign_eps: i8) -> PyResult<Py<PyAny>> {
        let b = reduced_o2::solve_cubic_equilibria(&self.inner, sign(sign_eps)?).map_err(to_py)?;
        json_obj(py, &b)
    }

    /// Numeric and closed-form Jacobian determinants on each nontrivial branch.
    fn jacobians(&self, py: Python<'_>, sign_eps: i8) -> PyResult<Py<PyAny>> {
        let s = sign(sign_eps)?;
        let branches = reduced_o2::solve_cubic_equilibria(&self.inner, s).map_err(to_py)?;
        let recs = branches
            .iter()
            .map(|b| reduced_o2::jacobian_at(&self.inner, b, s))
            .collect::<o2hopf::Result<Vec<_>>>()
            .map_err(to_py)?;
        json_obj(py, &recs)
    }

    /// (F1, F2) of the truncated rescaled system.
    fn evaluate(&self, a1: Complex64, a2: Complex64, mu_tilde: f64, sign_eps: i8) -> PyResult<(Complex64, Complex64)> {
        let p = ReducedPoint::new(a1, a2, mu_tilde, sign(sign_eps)?);
        Ok(reduced_o2::evaluate_truncated(&self.inner, &p))
    }

    fn __repr__(&self) -> String {
        let c = &self.inner;
        format!("CubicCoefficients(kappa={}, chi={}, lambda_={}, gamma={})", c.kappa, c.chi, c.lambda, c.gamma)
    }
}

/// Channel problem on the discrete standing profile.
#[pyclass(name = "Channel", frozen)]
struct PyChannel {
    pb: Problem,
}

#[pymethods]
impl PyChannel {
    #[new]
    #[pyo3(signature = (model = "m1", l = 12.0, n1 = 129, k_max = 4, dt = 0.05, eps = 0.0))]
    fn new(model: &str, l: f64, n1: usize, k_max: usize, dt: f64, eps: f64) -> PyResult<Self> {
        let grid = o2hopf::model::Grid::new(l, n1, k_max, dt).map_err(to_py)?;
        Ok(PyChannel { pb: Problem::new(model_by_name(model)?, eps, grid).map_err(to_py)? })
    }

    #[getter]
    fn model(&self) -> &'static str {
        self.pb.model.name()
    }

    #[getter]
    fn eps(&self) -> f64 {
        self.pb.eps
    }

    /// (x1 nodes, profile rows per node, residual).
    fn profile(&self) -> (Vec<f64>, Vec<Vec<f64>>, f64) {
        let p = &self.pb.profile;
        let rows = (0..p.x.len()).map(|j| p.at(j).to_vec()).collect();
        (p.x.clone(), rows, p.residual)
    }

    /// All eigenvalues of L_k, rightmost first.
    fn eigenvalues(&self, k: i64) -> PyResult<Vec<Complex64>> {
        eigenvalues_sorted(&assemble_lk(&self.pb, k)).map_err(to_py)
    }

    fn spectrum(&self, k: i64, re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> PyResult<Vec<Complex64>> {
        let sp = spectrum_in_region(&assemble_lk(&self.pb, k), &Region::new(re_min, re_max, im_min, im_max)).map_err(to_py)?;
        Ok(sp.into_iter().map(|e| e.lambda).collect())
    }

    /// Nonlinear minus linearized evolution of a seeded test field of H^s norm `amplitude`.
    #[pyo3(signature = (amplitude, t = 1.0, s = 1, seed = 7))]
    fn linearization_error(&self, py: Python<'_>, amplitude: f64, t: f64, s: usize, seed: u64) -> PyResult<Py<PyAny>> {
        let shape = cli::test_field(&self.pb, seed);
        let base = o2hopf::model::energy::hs_norm(&shape, &self.pb.grid, s).map_err(to_py)?;
        let r = py.detach(|| linearization_error(&self.pb, &shape.scaled(amplitude / base), t, s)).map_err(to_py)?;
        json_obj(py, &r)
    }
}

/// Normalized Evans function D(lambda, k) of a built-in model.
#[pyfunction]
#[pyo3(signature = (model, lambda_, k, eps = 0.0))]
fn evans(py: Python<'_>, model: &str, lambda_: Complex64, k: i64, eps: f64) -> PyResult<Complex64> {
    let ev = Evans::new(model_by_name(model)?, eps, EvansOptions::default());
    py.detach(|| ev.evaluate(lambda_, k)).map_err(to_py)
}

/// Zeros of D enclosed by a closed polyline, by the argument principle.
#[pyfunction]
#[pyo3(signature = (model, vertices, k, eps = 0.0))]
fn evans_root_count(py: Python<'_>, model: &str, vertices: Vec<Complex64>, k: i64, eps: f64) -> PyResult<i64> {
    let ev = Evans::new(model_by_name(model)?, eps, EvansOptions::default());
    py.detach(|| ev.root_count(&vertices, k, &WindingOptions::default())).map_err(to_py)
}

/// Coefficient fit of the synthetic system built with the prescribed (kappa, 2 pi, Lambda, Gamma).
#[pyfunction]
#[pyo3(signature = (kappa, lambda_, gamma, radius = 0.05, n_samples = 6))]
fn synthetic_fit(py: Python<'_>, kappa: f64, lambda_: Complex64, gamma: Complex64, radius: f64, n_samples: usize) -> PyResult<Py<PyAny>> {
    let params = SyntheticParams::prescribed(kappa, 2.0 * std::f64::consts::PI, lambda_, gamma).map_err(to_py)?;
    let sys = SyntheticSystem::new(params, 0.0);
    let fit = py.detach(|| fit_coefficients(&sys, radius, n_samples, &ReductionOptions::default())).map_err(to_py)?;
    json_obj(py, &fit)
}

#[pyclass(name = "RunConfig")]
struct PyRunConfig {
    inner: RunConfig,
}

#[pymethods]
impl PyRunConfig {
    #[new]
    #[pyo3(signature = (model = "m0"))]
    fn new(model: &str) -> PyResult<Self> {
        let inner = match model {
            "m0" => RunConfig::m0(),
            "m1" => RunConfig::m1(),
            other => return Err(PyValueError::new_err(format!("unknown model {other:?}"))),
        };
        Ok(PyRunConfig { inner })
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(PyRunConfig { inner: RunConfig::from_toml(text).map_err(to_py)? })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml().map_err(to_py)
    }

    #[getter]
    fn get_output_dir(&self) -> String {
        self.inner.output_dir.clone()
    }

    #[setter]
    fn set_output_dir(&mut self, dir: String) {
        self.inner.output_dir = dir;
    }

    #[getter]
    fn get_eps(&self) -> Vec<f64> {
        self.inner.eps.clone()
    }

    #[setter]
    fn set_eps(&mut self, eps: Vec<f64>) {
        self.inner.eps = eps;
    }

    #[getter]
    fn get_seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    /// Runs a pipeline command and returns its manifest.
    fn run(&self, py: Python<'_>, command: &str) -> PyResult<Py<PyAny>> {
        let cmd = parse_command(command)?;
        let cfg = self.inner.clone();
        let m = py.detach(|| cli::run(cmd, &cfg)).map_err(to_py)?;
        json_obj(py, &m)
    }
}

fn parse_command(name: &str) -> PyResult<Command> {
    name.parse::<Command>().map_err(to_py)
}

#[pymodule]
pub fn o2hopf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyCubic>()?;
    m.add_class::<PyChannel>()?;
    m.add_class::<PyRunConfig>()?;
    m.add_function(wrap_pyfunction!(evans, m)?)?;
    m.add_function(wrap_pyfunction!(evans_root_count, m)?)?;
    m.add_function(wrap_pyfunction!(synthetic_fit, m)?)?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    Ok(())
}
