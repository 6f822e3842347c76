//! Python bindings for the measurement, EPR/CHSH, cosmology and constants
//! modules. States cross the boundary as nested lists of complex numbers;
//! everything else is plain floats, ints and dicts.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use qmeter_core::measurement::ApparatusParams;
use qmeter_core::quantum::DensityMatrix;
use qmeter_core::{astro, cosmo, epr, measurement, quantum, CoreError};

fn err(e: CoreError) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix_to_py(m: &nalgebra::DMatrix<Complex64>) -> Vec<Vec<Complex64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

fn py_to_density(rows: Vec<Vec<Complex64>>) -> PyResult<DensityMatrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("density matrix must be square"));
    }
    let flat: Vec<Complex64> = rows.into_iter().flatten().collect();
    let m = nalgebra::DMatrix::from_row_slice(n, n, &flat);
    DensityMatrix::new(m).map_err(err)
}

/// One measurement apparatus; fields mirror the simulation parameters.
#[pyclass(skip_from_py_object)]
#[derive(Clone)]
struct Apparatus {
    inner: ApparatusParams,
}

#[pymethods]
impl Apparatus {
    #[new]
    #[pyo3(signature = (gamma=1.0, lambda_=6.0, mu=0.0, epsilon=0.01,
                        b_field=[0.0, 0.0, 1.0], omega=0.0, k_t=1.0,
                        b0=0.0, c0=0.0, g=1.0))]
    #[allow(clippy::too_many_arguments)]
    fn new(
        gamma: f64,
        lambda_: f64,
        mu: f64,
        epsilon: f64,
        b_field: [f64; 3],
        omega: f64,
        k_t: f64,
        b0: f64,
        c0: f64,
        g: f64,
    ) -> PyResult<Self> {
        let inner = ApparatusParams {
            gamma,
            lambda: lambda_,
            mu,
            epsilon,
            b_field,
            omega,
            k_t,
            b0,
            c0,
            g,
        };
        inner.validate().map_err(err)?;
        Ok(Self { inner })
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

/// Pure-spin density matrix at Bloch angles (polar, azimuth) as a 2x2 list.
#[pyfunction]
fn make_pure_spin(polar: f64, azimuth: f64) -> Vec<Vec<Complex64>> {
    matrix_to_py(quantum::make_pure_spin(polar, azimuth).matrix())
}

/// The singlet projector as a 4x4 list.
#[pyfunction]
fn make_singlet() -> Vec<Vec<Complex64>> {
    matrix_to_py(quantum::make_singlet().matrix())
}

/// 3x3 correlation matrix Tr(rho S_i x S_j) of a two-spin state.
#[pyfunction]
fn spin_correlation_matrix(rho: Vec<Vec<Complex64>>) -> PyResult<Vec<Vec<f64>>> {
    let dm = py_to_density(rho)?;
    let m = quantum::spin_correlation_matrix(&dm).map_err(err)?;
    Ok((0..3).map(|i| (0..3).map(|j| m[(i, j)]).collect()).collect())
}

/// Readout probability (1 + erf(delta / sqrt(2 eps_eff))) / 2.
#[pyfunction]
fn p_plus_erf(delta: f64, eps_eff: f64) -> PyResult<f64> {
    measurement::p_plus_erf(delta, eps_eff).map_err(err)
}

/// Leading-log measurement time t0 for the given apparatus and offset.
#[pyfunction]
fn measurement_time(apparatus: &Apparatus, delta: f64) -> PyResult<f64> {
    measurement::measurement_time(&apparatus.inner, delta).map_err(err)
}

/// Ensemble of single-apparatus measurements; returns summary statistics.
#[pyfunction]
#[pyo3(signature = (apparatus, polar=0.0, azimuth=0.0, t_end=10.0, dt=0.005, n=1000, seed=0))]
fn measure_ensemble(
    py: Python<'_>,
    apparatus: &Apparatus,
    polar: f64,
    azimuth: f64,
    t_end: f64,
    dt: f64,
    n: usize,
    seed: u64,
) -> PyResult<Py<PyDict>> {
    let rho0 = quantum::make_pure_spin(polar, azimuth);
    let stats =
        measurement::measure_ensemble(&rho0, &apparatus.inner, t_end, dt, n, seed).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("n", stats.n)?;
    d.set_item("n_plus", stats.n_plus)?;
    d.set_item("n_minus", stats.n_minus)?;
    d.set_item("n_undecided", stats.n_undecided)?;
    d.set_item("p_plus", stats.p_plus)?;
    d.set_item("p_plus_stderr", stats.p_plus_stderr)?;
    d.set_item("median_decision_time", stats.median_decision_time)?;
    d.set_item("mean_final_phi", stats.mean_final_phi)?;
    Ok(d.into())
}

fn epr_config(apparatus: &Apparatus, angle1: f64, angle2: f64, t_end: f64, dt: f64) -> epr::EprConfig {
    let mut cfg = epr::EprConfig::singlet_with_angles(&apparatus.inner, angle1, angle2);
    if t_end > 0.0 {
        cfg.t_end = t_end;
    }
    cfg.dt = dt;
    cfg
}

/// Monte Carlo singlet correlation at two detector angles (radians).
#[pyfunction]
#[pyo3(signature = (apparatus, angle1, angle2, n=1000, seed=0, t_end=0.0, dt=0.005))]
fn estimate_correlation(
    py: Python<'_>,
    apparatus: &Apparatus,
    angle1: f64,
    angle2: f64,
    n: usize,
    seed: u64,
    t_end: f64,
    dt: f64,
) -> PyResult<Py<PyDict>> {
    let cfg = epr_config(apparatus, angle1, angle2, t_end, dt);
    let est = epr::estimate_correlation(&cfg, n, seed).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("c", est.c)?;
    d.set_item("stderr", est.stderr)?;
    d.set_item("n_decided", est.n_decided)?;
    d.set_item("n_undecided", est.n_undecided)?;
    d.set_item("quality_warning", est.quality_warning)?;
    Ok(d.into())
}

/// Deterministic erf-model correlation for the same configuration.
#[pyfunction]
#[pyo3(signature = (apparatus, angle1, angle2))]
fn correlation_oracle(apparatus: &Apparatus, angle1: f64, angle2: f64) -> PyResult<f64> {
    let cfg = epr_config(apparatus, angle1, angle2, 0.0, 0.005);
    epr::correlation_quadrature_oracle(&cfg).map_err(err)
}

/// CHSH statistic at the standard (0, 90) x (45, 135) degree angles.
#[pyfunction]
#[pyo3(signature = (apparatus, n=1000, seed=0))]
fn chsh(py: Python<'_>, apparatus: &Apparatus, n: usize, seed: u64) -> PyResult<Py<PyDict>> {
    let configs = epr::chsh_configs(&apparatus.inner);
    let result = epr::chsh_statistic(&configs, n, seed).map_err(err)?;
    let oracle = epr::chsh_oracle(&configs).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("statistic", result.statistic)?;
    d.set_item("stderr", result.stderr)?;
    d.set_item("violation_3sigma", result.violation_3sigma)?;
    d.set_item("oracle_statistic", oracle)?;
    d.set_item(
        "correlations",
        result
            .correlations
            .iter()
            .map(|e| (e.c, e.stderr, e.n_decided, e.n_undecided))
            .collect::<Vec<_>>(),
    )?;
    Ok(d.into())
}

/// Conformal-time kernels (g_ret, g_stat) at a pair of times.
#[pyfunction]
fn evaluate_kernels(eta: f64, eta_prime: f64) -> (f64, f64) {
    cosmo::evaluate_kernels(eta, eta_prime)
}

/// Squeezed-mode solution v(eta) for wavenumber k.
#[pyfunction]
fn analytic_mode(k: f64, eta: f64, hubble: f64) -> Complex64 {
    cosmo::analytic_mode(k, eta, hubble)
}

/// The standard horizon-crossing spectrum (H / 2 pi)^2.
#[pyfunction]
fn standard_spectrum(hubble: f64) -> f64 {
    cosmo::standard_spectrum(hubble)
}

/// Reheating-era power spectrum over a log-spaced k grid.
#[pyfunction]
#[pyo3(signature = (k_grid, lambda_=1.0, phi0=1.0, delta_t=1.0, hubble=1.0, n=200, seed=0))]
fn power_spectrum(
    py: Python<'_>,
    k_grid: Vec<f64>,
    lambda_: f64,
    phi0: f64,
    delta_t: f64,
    hubble: f64,
    n: usize,
    seed: u64,
) -> PyResult<Py<PyDict>> {
    let ip = cosmo::InflationParams {
        hubble,
        eta_start: -20.0,
        eta_end: -0.05,
    };
    let rp = cosmo::ReheatingParams::new(lambda_, phi0, delta_t);
    let spec = cosmo::power_spectrum(&k_grid, &rp, &ip, n, seed).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("k", spec.k)?;
    d.set_item("power", spec.power)?;
    d.set_item("stderr", spec.stderr)?;
    d.set_item("reference", spec.reference)?;
    Ok(d.into())
}

/// The astrophysical sanity constants, SI units.
#[pyfunction]
fn astro_estimates(py: Python<'_>) -> PyResult<Py<PyDict>> {
    let a = astro::astro_estimates();
    let d = PyDict::new(py);
    d.set_item("planet_mass", a.planet_mass)?;
    d.set_item("planet_radius", a.planet_radius)?;
    d.set_item("star_mass", a.star_mass)?;
    d.set_item("star_radius", a.star_radius)?;
    d.set_item("fusion_temperature", a.fusion_temperature)?;
    Ok(d.into())
}

#[pymodule]
fn qmeter(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Apparatus>()?;
    m.add_function(wrap_pyfunction!(make_pure_spin, m)?)?;
    m.add_function(wrap_pyfunction!(make_singlet, m)?)?;
    m.add_function(wrap_pyfunction!(spin_correlation_matrix, m)?)?;
    m.add_function(wrap_pyfunction!(p_plus_erf, m)?)?;
    m.add_function(wrap_pyfunction!(measurement_time, m)?)?;
    m.add_function(wrap_pyfunction!(measure_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_correlation, m)?)?;
    m.add_function(wrap_pyfunction!(correlation_oracle, m)?)?;
    m.add_function(wrap_pyfunction!(chsh, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_kernels, m)?)?;
    m.add_function(wrap_pyfunction!(analytic_mode, m)?)?;
    m.add_function(wrap_pyfunction!(standard_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(power_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(astro_estimates, m)?)?;
    Ok(())
}
