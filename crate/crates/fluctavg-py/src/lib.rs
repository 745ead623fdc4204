//! Python bindings: exponent prediction, the symbolic expansion, the
//! identity suite and the verifier. Structured results are returned as JSON
//! strings.

use std::path::Path;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use fluctavg::cli::{run_identity_suite, Config};
use fluctavg::expansion::{run_expansion, ExpansionConfig};
use fluctavg::graphs::{applicable_predictions, parse_monomial, AveragingMode};
use fluctavg::resolvent::semicircle_m as m_of_z;
use fluctavg::verifier::run_experiment;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn config_from(toml_text: Option<&str>) -> PyResult<Config> {
    match toml_text {
        Some(text) => Config::from_toml(text, Path::new(".")).map_err(value_err),
        None => Ok(Config::default()),
    }
}

/// Semicircle Stieltjes transform at `z` with `Im z > 0`.
#[pyfunction]
fn semicircle_m(z: Complex64) -> PyResult<Complex64> {
    m_of_z(z).map_err(value_err)
}

/// `(mode, psi, phi)` for every averaging mode that applies to `spec`.
#[pyfunction]
fn predict(spec: &str) -> PyResult<Vec<(String, i64, i64)>> {
    let spec = parse_monomial(spec).map_err(value_err)?;
    Ok(applicable_predictions(&spec)
        .into_iter()
        .map(|(mode, p)| {
            let name = match mode {
                AveragingMode::QAverage => "q_average",
                AveragingMode::PProduct => "p_product",
                AveragingMode::Chain => "chain",
            };
            (name.to_string(), p.psi, p.phi)
        })
        .collect())
}

/// Expansion report for `E|X|^p` as JSON.
#[pyfunction]
#[pyo3(signature = (spec, p = 2, stop_k = None))]
fn expand(spec: &str, p: usize, stop_k: Option<usize>) -> PyResult<String> {
    let spec = parse_monomial(spec).map_err(value_err)?;
    let cfg = ExpansionConfig {
        p,
        stop_k,
        ..ExpansionConfig::default()
    };
    let report = run_expansion(&spec, &cfg).map_err(runtime_err)?;
    serde_json::to_string(&report).map_err(runtime_err)
}

/// Identity suite report as JSON; the config is TOML text or the defaults.
#[pyfunction]
#[pyo3(signature = (config = None))]
fn check_identities(py: Python<'_>, config: Option<&str>) -> PyResult<String> {
    let cfg = config_from(config)?;
    let report = py
        .detach(|| run_identity_suite(&cfg.identities, cfg.ensemble.profile, cfg.seed))
        .map_err(runtime_err)?;
    serde_json::to_string(&report).map_err(runtime_err)
}

/// Verifier result as JSON for the plan described by a TOML config.
#[pyfunction]
fn verify(py: Python<'_>, config: &str) -> PyResult<String> {
    let plan = config_from(Some(config))?.plan();
    let result = py.detach(|| run_experiment(&plan)).map_err(runtime_err)?;
    serde_json::to_string(&result).map_err(runtime_err)
}

#[pymodule]
fn fluctavg_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(semicircle_m, m)?)?;
    m.add_function(wrap_pyfunction!(predict, m)?)?;
    m.add_function(wrap_pyfunction!(expand, m)?)?;
    m.add_function(wrap_pyfunction!(check_identities, m)?)?;
    m.add_function(wrap_pyfunction!(verify, m)?)?;
    Ok(())
}
