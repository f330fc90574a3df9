//! Python bindings for adiawork-core.
//!
//! The module mirrors the Rust API surface at coarse granularity:
//! operators and states, model construction from a TOML config,
//! propagation, the decay/transition fits, and the experiment runners.

use adiawork_core::decoherence::{fit_gaussian_decay, fit_transition_rate};
use adiawork_core::experiment::{
    run_adiabatic_work, run_border, run_decay, run_full_suite, run_scaling, self_test,
    ExperimentConfig, RunOptions,
};
use adiawork_core::hilbert::{self, StateVector as CoreState};
use adiawork_core::model::TotalModel;
use adiawork_core::propagation::{coherence_norm, Propagator, RdmTrajectory, TimeGrid};
use adiawork_core::Error;
use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn pyerr(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::DimensionMismatch(_) => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn to_matrix(rows: Vec<Vec<Complex64>>) -> PyResult<hilbert::CMat> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square and non-empty"));
    }
    let flat: Vec<Complex64> = rows.into_iter().flatten().collect();
    ndarray::Array2::from_shape_vec((n, n), flat)
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

fn matrix_rows(m: &hilbert::CMat) -> Vec<Vec<Complex64>> {
    m.outer_iter().map(|r| r.to_vec()).collect()
}

/// Hermitian operator on a finite-dimensional Hilbert space.
#[pyclass(name = "HermitianOperator")]
#[derive(Clone)]
struct PyHermitian {
    inner: hilbert::HermitianOperator,
}

#[pymethods]
impl PyHermitian {
    #[new]
    fn new(entries: Vec<Vec<Complex64>>) -> PyResult<Self> {
        let inner = hilbert::HermitianOperator::new(to_matrix(entries)?).map_err(pyerr)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn from_diagonal(diag: Vec<f64>) -> Self {
        Self { inner: hilbert::HermitianOperator::from_diagonal(&diag) }
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn entries(&self) -> Vec<Vec<Complex64>> {
        matrix_rows(self.inner.entries())
    }

    fn expectation(&self, psi: &PyState) -> f64 {
        self.inner.expectation(&psi.inner)
    }

    /// Eigenvalues (ascending) and eigenvectors as matrix columns.
    fn eig(&self) -> PyResult<(Vec<f64>, Vec<Vec<Complex64>>)> {
        let (vals, vecs) =
            adiawork_core::linalg::eigh(self.inner.entries().clone()).map_err(pyerr)?;
        Ok((vals.to_vec(), matrix_rows(&vecs)))
    }

    fn __repr__(&self) -> String {
        format!("HermitianOperator(dim={})", self.inner.dim())
    }
}

/// Pure state, stored as complex amplitudes.
#[pyclass(name = "StateVector")]
#[derive(Clone)]
struct PyState {
    inner: CoreState,
}

#[pymethods]
impl PyState {
    #[new]
    fn new(amplitudes: Vec<Complex64>) -> PyResult<Self> {
        let inner = CoreState::new(ndarray::Array1::from(amplitudes)).map_err(pyerr)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn normalized(amplitudes: Vec<Complex64>) -> PyResult<Self> {
        let inner = CoreState::normalized(ndarray::Array1::from(amplitudes)).map_err(pyerr)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn basis_state(dim: usize, k: usize) -> Self {
        Self { inner: CoreState::basis_state(dim, k) }
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn norm(&self) -> f64 {
        self.inner.norm()
    }

    fn amplitudes(&self) -> Vec<Complex64> {
        self.inner.amplitudes().to_vec()
    }

    fn tensor(&self, other: &PyState) -> Self {
        Self { inner: self.inner.tensor(&other.inner) }
    }

    fn __repr__(&self) -> String {
        format!("StateVector(dim={})", self.inner.dim())
    }
}

/// Sampled reduced-density-matrix trajectory from a propagation run.
#[pyclass(name = "Trajectory")]
struct PyTrajectory {
    inner: RdmTrajectory,
}

#[pymethods]
impl PyTrajectory {
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    fn __len__(&self) -> usize {
        self.inner.times.len()
    }

    fn rdm(&self, k: usize) -> PyResult<Vec<Vec<Complex64>>> {
        let rdm = self
            .inner
            .rdms
            .get(k)
            .ok_or_else(|| PyValueError::new_err(format!("sample index {k} out of range")))?;
        Ok(matrix_rows(rdm.entries()))
    }

    /// Frobenius norm of the off-diagonal part of each sampled RDM.
    fn coherence_norms(&self) -> Vec<f64> {
        self.inner.rdms.iter().map(|r| coherence_norm(r.entries().view())).collect()
    }

    fn populations(&self, level: usize) -> PyResult<Vec<f64>> {
        if self.inner.rdms.first().map_or(true, |r| level >= r.dim()) {
            return Err(PyValueError::new_err(format!("level {level} out of range")));
        }
        Ok(self.inner.rdms.iter().map(|r| r.entries()[(level, level)].re).collect())
    }

    fn norm_drift(&self) -> f64 {
        self.inner.norm_drift
    }
}

/// Composite system + environment model built from a config.
#[pyclass(name = "Model")]
struct PyModel {
    inner: TotalModel,
}

#[pymethods]
impl PyModel {
    fn dim_s(&self) -> usize {
        self.inner.dim_s()
    }

    fn dim_e(&self) -> usize {
        self.inner.dim_e()
    }

    fn full_dim(&self) -> usize {
        self.inner.full_dim()
    }

    fn lambda_at(&self, t: f64) -> PyResult<f64> {
        self.inner.lambda(t).map_err(pyerr)
    }

    fn h_total(&self, t: f64) -> PyResult<PyHermitian> {
        Ok(PyHermitian { inner: self.inner.h_total(t).map_err(pyerr)? })
    }

    fn h_s_renormalized(&self, t: f64) -> PyResult<PyHermitian> {
        Ok(PyHermitian { inner: self.inner.h_s_renormalized(t).map_err(pyerr)? })
    }

    /// Random superposition over the microcanonical window.
    fn bath_window_state(&self, seed: u64) -> PyResult<PyState> {
        Ok(PyState { inner: self.inner.bath_window_state(seed).map_err(pyerr)? })
    }

    fn bath_midwindow_state(&self) -> PyResult<PyState> {
        Ok(PyState { inner: self.inner.bath_midwindow_state().map_err(pyerr)? })
    }

    /// Evolve a full-space state and sample its system RDM.
    #[pyo3(signature = (initial, t_start, t_end, n_steps, sample_stride = 1, dlambda_max = 1e-3))]
    fn evolve(
        &self,
        initial: &PyState,
        t_start: f64,
        t_end: f64,
        n_steps: usize,
        sample_stride: usize,
        dlambda_max: f64,
    ) -> PyResult<PyTrajectory> {
        let grid = TimeGrid::new(t_start, t_end, n_steps, sample_stride).map_err(pyerr)?;
        let mut prop = Propagator::new(&self.inner).with_dlambda_max(dlambda_max);
        let traj = prop.evolve(&initial.inner, &grid).map_err(pyerr)?;
        Ok(PyTrajectory { inner: traj })
    }
}

/// Experiment configuration, parsed from TOML.
#[pyclass(name = "Config")]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(Self { inner: ExperimentConfig::from_toml(text).map_err(pyerr)? })
    }

    #[staticmethod]
    fn from_file(path: &str) -> PyResult<Self> {
        Ok(Self { inner: ExperimentConfig::from_file(std::path::Path::new(path)).map_err(pyerr)? })
    }

    #[staticmethod]
    fn demo() -> Self {
        Self { inner: ExperimentConfig::demo() }
    }

    /// SHA-256 of the canonical serialized form.
    fn hash(&self) -> String {
        self.inner.hash()
    }

    fn build_model(&self, seed: u64) -> PyResult<PyModel> {
        Ok(PyModel { inner: self.inner.build_model(seed).map_err(pyerr)? })
    }
}

fn options(out_dir: &str, seed: Option<u64>, workers: usize, svg: Option<bool>) -> RunOptions {
    let mut opts = RunOptions::new(out_dir);
    opts.seed = seed;
    opts.workers = workers.max(1);
    opts.svg = svg;
    opts
}

fn paths(files: Vec<std::path::PathBuf>) -> Vec<String> {
    files.into_iter().map(|p| p.display().to_string()).collect()
}

macro_rules! runner_fn {
    ($py_name:ident, $core:ident, $doc:literal) => {
        #[doc = $doc]
        #[pyfunction]
        #[pyo3(signature = (config, out_dir, seed = None, workers = 1, svg = None))]
        fn $py_name(
            config: &PyConfig,
            out_dir: &str,
            seed: Option<u64>,
            workers: usize,
            svg: Option<bool>,
        ) -> PyResult<Vec<String>> {
            let opts = options(out_dir, seed, workers, svg);
            let (_report, artifacts) = $core(&config.inner, &opts).map_err(pyerr)?;
            Ok(paths(artifacts.files))
        }
    };
}

runner_fn!(decay, run_decay, "Single-pair decoherence decay run; returns written file paths.");
runner_fn!(border, run_border, "Perturbative-border table over all level pairs.");
runner_fn!(scaling, run_scaling, "Rate-vs-epsilon sweep with log-log regressions.");
runner_fn!(work, run_adiabatic_work, "Adiabatic work accounting and Jarzynski check.");

/// Run all four experiments into subdirectories of `out_dir`.
#[pyfunction]
#[pyo3(signature = (config, out_dir, seed = None, workers = 1, svg = None))]
fn full_suite(
    config: &PyConfig,
    out_dir: &str,
    seed: Option<u64>,
    workers: usize,
    svg: Option<bool>,
) -> PyResult<Vec<String>> {
    let opts = options(out_dir, seed, workers, svg);
    let artifacts = run_full_suite(&config.inner, &opts).map_err(pyerr)?;
    Ok(paths(artifacts.files))
}

/// Synthetic analysis replays; returns a list of (name, passed, detail).
#[pyfunction]
#[pyo3(name = "self_test")]
fn self_test_py() -> Vec<(String, bool, String)> {
    self_test().into_iter().map(|r| (r.name, r.passed, r.detail)).collect()
}

/// Through-origin Gaussian fit of |rho(t)| decay; returns (rate, quality).
#[pyfunction]
#[pyo3(name = "fit_gaussian_decay", signature = (times, magnitudes, floor = 0.2))]
fn fit_gaussian_decay_py(
    times: Vec<f64>,
    magnitudes: Vec<f64>,
    floor: f64,
) -> PyResult<(f64, f64)> {
    let fit = fit_gaussian_decay(&times, &magnitudes, floor).map_err(pyerr)?;
    Ok((fit.rate, fit.quality))
}

/// Early-window linear fit of 1 - p(t); returns (rate, is_upper_bound).
#[pyfunction]
#[pyo3(name = "fit_transition_rate", signature = (times, population, cap = 0.2, noise_floor = 1e-6))]
fn fit_transition_rate_py(
    times: Vec<f64>,
    population: Vec<f64>,
    cap: f64,
    noise_floor: f64,
) -> PyResult<(f64, bool)> {
    let fit = fit_transition_rate(&times, &population, cap, noise_floor).map_err(pyerr)?;
    Ok((fit.value(), fit.is_upper_bound()))
}

#[pymodule]
fn adiawork(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyHermitian>()?;
    m.add_class::<PyState>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyConfig>()?;
    m.add_function(wrap_pyfunction!(decay, m)?)?;
    m.add_function(wrap_pyfunction!(border, m)?)?;
    m.add_function(wrap_pyfunction!(scaling, m)?)?;
    m.add_function(wrap_pyfunction!(work, m)?)?;
    m.add_function(wrap_pyfunction!(full_suite, m)?)?;
    m.add_function(wrap_pyfunction!(self_test_py, m)?)?;
    m.add_function(wrap_pyfunction!(fit_gaussian_decay_py, m)?)?;
    m.add_function(wrap_pyfunction!(fit_transition_rate_py, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
