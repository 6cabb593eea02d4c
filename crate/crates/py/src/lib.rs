//! Python bindings: physics helpers, estimators and the campaign runner.

use std::path::PathBuf;

use dipolar::campaign::{self, CampaignReport, ExperimentConfig, OutputFormat};
use dipolar::inference::{self, FitResult, FringePoint};
use dipolar::instrument::{contrast_from_fidelity as alpha_of, DetectionOutcome};
use dipolar::physics;
use dipolar::sim::sequence::Sign;
use num_complex::Complex64;
use pyo3::exceptions::{PyKeyError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn err(e: dipolar::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn fit_dict<'py>(py: Python<'py>, f: &FitResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    for p in &f.parameters {
        d.set_item(&p.name, p.value)?;
        d.set_item(format!("{}_error", p.name), p.error)?;
    }
    d.set_item("rss", f.rss)?;
    d.set_item("dof", f.dof)?;
    d.set_item("warnings", f.warnings.clone())?;
    Ok(d)
}

/// Dipolar coupling ξ (rad/s) at separation `d` (m).
#[pyfunction]
fn coupling_strength(d: f64) -> PyResult<f64> {
    physics::coupling_strength(d).map_err(err)
}

/// ξ/2π (Hz).
#[pyfunction]
fn coupling_strength_hz(d: f64) -> PyResult<f64> {
    physics::coupling_strength_hz(d).map_err(err)
}

/// Ion separation (m) for an axial trap frequency (Hz).
#[pyfunction]
fn ion_separation(f_trap: f64) -> PyResult<f64> {
    physics::ion_separation(f_trap).map_err(err)
}

/// Electron Larmor frequency (Hz) at field `b` (T).
#[pyfunction]
fn larmor_splitting(b: f64) -> PyResult<f64> {
    physics::larmor_splitting(b).map_err(err)
}

/// Zeeman frequency difference (rad/s) across `d` in gradient `grad`.
#[pyfunction]
fn gradient_detuning(grad: f64, d: f64) -> PyResult<f64> {
    physics::gradient_detuning(grad, d).map_err(err)
}

/// 4×4 Hamiltonian H/ħ (rad/s) in the basis uu, ud, du, dd.
#[pyfunction]
fn hamiltonian(omega1: f64, omega2: f64, xi: f64) -> PyResult<Vec<Vec<Complex64>>> {
    let h = physics::build_hamiltonian(omega1, omega2, xi).map_err(err)?.matrix();
    Ok(h.iter().map(|row| row.to_vec()).collect())
}

#[pyfunction]
#[pyo3(signature = (t, xi, phi_parity, init_sign = 1.0))]
fn ideal_parity(t: f64, xi: f64, phi_parity: f64, init_sign: f64) -> f64 {
    physics::ideal_parity(t, xi, phi_parity, init_sign)
}

/// Parity contrast α = (2D − 1)² for per-spin detection fidelity D.
#[pyfunction]
fn contrast_from_fidelity(d: f64) -> f64 {
    alpha_of(d)
}

/// (⟨S⟩, σ) = P_UU + P_DD − V.
#[pyfunction]
fn swap_witness(p_sum: f64, p_sigma: f64, visibility: f64, v_sigma: f64) -> PyResult<(f64, f64)> {
    inference::swap_witness(p_sum, p_sigma, visibility, v_sigma).map_err(err)
}

/// Fits A·sin φ (or a free-phase sinusoid) to fringe points.
#[pyfunction]
#[pyo3(signature = (phi, parity, sigma, free_phase = false))]
fn fit_fringe<'py>(py: Python<'py>, phi: Vec<f64>, parity: Vec<f64>, sigma: Vec<f64>, free_phase: bool) -> PyResult<Bound<'py, PyDict>> {
    if phi.len() != parity.len() || phi.len() != sigma.len() {
        return Err(PyValueError::new_err("phi, parity and sigma must have equal length"));
    }
    let pts: Vec<FringePoint> =
        phi.iter().zip(&parity).zip(&sigma).map(|((&phi, &value), &sigma)| FringePoint { phi, value, sigma }).collect();
    let f = if free_phase { inference::fringe_free_phase(&pts) } else { inference::visibility_from_fringe(&pts) };
    fit_dict(py, &f.map_err(err)?)
}

/// Power law ξ = C·d^(−n).
#[pyfunction]
#[pyo3(signature = (d, xi, sigma = None))]
fn fit_power_law<'py>(py: Python<'py>, d: Vec<f64>, xi: Vec<f64>, sigma: Option<Vec<f64>>) -> PyResult<Bound<'py, PyDict>> {
    if d.len() != xi.len() {
        return Err(PyValueError::new_err("d and xi must have equal length"));
    }
    let pts: Vec<(f64, f64)> = d.into_iter().zip(xi).collect();
    fit_dict(py, &inference::fit_power_law(&pts, sigma.as_deref()).map_err(err)?)
}

/// A(T) = A₀·exp(−T/τ) from (T, A, σ) lists.
#[pyfunction]
fn fit_coherence_time<'py>(py: Python<'py>, t: Vec<f64>, amplitude: Vec<f64>, sigma: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    if t.len() != amplitude.len() || t.len() != sigma.len() {
        return Err(PyValueError::new_err("t, amplitude and sigma must have equal length"));
    }
    let pts: Vec<(f64, f64, f64)> = t.iter().zip(&amplitude).zip(&sigma).map(|((&a, &b), &c)| (a, b, c)).collect();
    fit_dict(py, &inference::fit_coherence_time(&pts).map_err(err)?)
}

/// Overlapping Allan deviation; returns (tau, adev, terms) tuples.
#[pyfunction]
fn allan_deviation(series: Vec<f64>, taus: Vec<usize>) -> PyResult<Vec<(usize, f64, usize)>> {
    let pts = inference::allan_deviation(&series, &taus).map_err(err)?;
    Ok(pts.iter().map(|p| (p.tau, p.adev, p.terms)).collect())
}

/// Experiment configuration loaded from TOML or a preset.
#[pyclass(name = "ExperimentConfig", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyConfig {
    #[staticmethod]
    #[pyo3(signature = (path, overrides = Vec::new()))]
    fn from_file(path: PathBuf, overrides: Vec<String>) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path).map_err(|e| PyValueError::new_err(format!("{}: {e}", path.display())))?;
        let inner = campaign::apply_overrides(&text, &overrides, path.parent()).map_err(err)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (text, overrides = Vec::new()))]
    fn from_toml(text: &str, overrides: Vec<String>) -> PyResult<Self> {
        Ok(Self { inner: campaign::apply_overrides(text, &overrides, None).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (name, overrides = Vec::new()))]
    fn preset(name: &str, overrides: Vec<String>) -> PyResult<Self> {
        Ok(Self { inner: campaign::preset_config(name, &overrides).map_err(err)? })
    }

    fn to_toml(&self) -> String {
        campaign::format_config(&self.inner)
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn shots(&self) -> u64 {
        self.inner.shots
    }

    #[getter]
    fn separation(&self) -> PyResult<f64> {
        self.inner.separation().map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("ExperimentConfig(seed={}, shots={}, t={})", self.inner.seed, self.inner.shots, self.inner.sequence.t)
    }
}

/// Result of a campaign: records, tables, estimates and band checks.
#[pyclass(name = "CampaignReport")]
struct PyReport {
    inner: CampaignReport,
}

#[pymethods]
impl PyReport {
    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn partial(&self) -> Option<String> {
        self.inner.partial.clone()
    }

    /// Numeric estimate at a dotted path, e.g. "fringe.amplitude".
    fn estimate(&self, path: &str) -> PyResult<f64> {
        self.inner.estimates.float(path).ok_or_else(|| PyKeyError::new_err(path.to_string()))
    }

    /// (name, value, lo, hi, pass) for every acceptance band.
    fn checks(&self) -> Vec<(String, f64, f64, f64, bool)> {
        self.inner.checks.iter().map(|c| (c.name.clone(), c.value, c.lo, c.hi, c.pass())).collect()
    }

    fn table_names(&self) -> Vec<String> {
        self.inner.tables.iter().map(|t| t.name.clone()).collect()
    }

    /// CSV text of a table.
    fn table(&self, name: &str) -> PyResult<String> {
        self.inner.table(name).map(|t| t.to_csv()).ok_or_else(|| PyKeyError::new_err(name.to_string()))
    }

    /// Per-record counts as (t, d, phi_parity, init, init_sign, n_uu, n_dd, n_one).
    fn records(&self) -> Vec<(f64, f64, f64, String, i8, u64, u64, u64)> {
        self.inner
            .records
            .iter()
            .map(|r| {
                let sign = if r.meta.init_sign == Sign::Plus { 1 } else { -1 };
                (r.meta.t, r.meta.d, r.meta.phi_parity, r.meta.init.clone(), sign, r.n_uu, r.n_dd, r.n_one)
            })
            .collect()
    }

    /// Sign-corrected per-shot parity (±1), if the run kept its shot series.
    fn parity_series(&self) -> Option<Vec<f64>> {
        self.inner.shots.as_ref().map(|s| s.iter().map(|(sign, o): &(Sign, DetectionOutcome)| sign.value() * o.parity_sign()).collect())
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// Writes all report files into `dir`; returns their paths.
    #[pyo3(signature = (dir, format = "kv"))]
    fn write(&self, dir: PathBuf, format: &str) -> PyResult<Vec<PathBuf>> {
        let f: OutputFormat = format.parse().map_err(err)?;
        campaign::emit_outputs(&self.inner, &dir, f).map_err(err)
    }
}

/// Runs a preset campaign, optionally with dotted `key=value` overrides.
#[pyfunction]
#[pyo3(signature = (name, overrides = Vec::new()))]
fn run_campaign(py: Python<'_>, name: &str, overrides: Vec<String>) -> PyResult<PyReport> {
    let cfg = campaign::preset_config(name, &overrides).map_err(err)?;
    let name = name.to_string();
    let inner = py.detach(move || campaign::run_campaign(&name, &cfg)).map_err(err)?;
    Ok(PyReport { inner })
}

/// Runs one configuration over its phase list.
#[pyfunction]
fn simulate(py: Python<'_>, config: PyConfig) -> PyResult<PyReport> {
    let inner = py.detach(move || campaign::simulate(&config.inner)).map_err(err)?;
    Ok(PyReport { inner })
}

#[pymodule]
fn dipolar_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(coupling_strength, m)?)?;
    m.add_function(wrap_pyfunction!(coupling_strength_hz, m)?)?;
    m.add_function(wrap_pyfunction!(ion_separation, m)?)?;
    m.add_function(wrap_pyfunction!(larmor_splitting, m)?)?;
    m.add_function(wrap_pyfunction!(gradient_detuning, m)?)?;
    m.add_function(wrap_pyfunction!(hamiltonian, m)?)?;
    m.add_function(wrap_pyfunction!(ideal_parity, m)?)?;
    m.add_function(wrap_pyfunction!(contrast_from_fidelity, m)?)?;
    m.add_function(wrap_pyfunction!(swap_witness, m)?)?;
    m.add_function(wrap_pyfunction!(fit_fringe, m)?)?;
    m.add_function(wrap_pyfunction!(fit_power_law, m)?)?;
    m.add_function(wrap_pyfunction!(fit_coherence_time, m)?)?;
    m.add_function(wrap_pyfunction!(allan_deviation, m)?)?;
    m.add_function(wrap_pyfunction!(run_campaign, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyReport>()?;
    m.add("PRESETS", campaign::PRESETS.to_vec())?;
    Ok(())
}
