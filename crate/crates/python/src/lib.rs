//! Python bindings. Ensembles, frames and reports cross the boundary as the
//! same JSON text the command-line tool reads and writes.

use num_complex::Complex64;
use prae_core::certify::{self, spark_report};
use prae_core::io;
use prae_core::linalg::CVector;
use prae_core::recovery::sweep_csv;
use prae_core::rng;
use prae_core::{
    gram_collision_witness, hankel_ensemble, measure as measure_map, minimal_complex_ensemble, random_ensemble,
    real_rank_one_exact, recover as recover_signal, sweep as run_sweep, validate as validate_ensemble, Ensemble,
    Error, FieldTag, Method, MeasurementVector, MonteCarloOptions, RandomKind, RecoverOptions, SweepConfig,
};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn err(e: Error) -> PyErr {
    match e {
        Error::Numerical(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn field(tag: &str) -> PyResult<FieldTag> {
    match tag {
        "R" | "r" => Ok(FieldTag::Real),
        "C" | "c" => Ok(FieldTag::Complex),
        _ => Err(PyValueError::new_err(format!("field must be \"R\" or \"C\", got {tag:?}"))),
    }
}

fn kind(name: &str) -> PyResult<RandomKind> {
    match name {
        "general" => Ok(RandomKind::General),
        "projection" => Ok(RandomKind::Projection),
        _ => Err(PyValueError::new_err(format!("kind must be \"general\" or \"projection\", got {name:?}"))),
    }
}

fn ensemble(text: &str) -> PyResult<Ensemble> {
    io::parse_ensemble(text).map_err(err)
}

fn to_json<T: serde::Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("values serialize")
}

/// Hankel ensemble in dimension `d`, as JSON.
#[pyfunction]
fn hankel(d: usize) -> PyResult<String> {
    Ok(io::ensemble_to_string(&hankel_ensemble(d).map_err(err)?))
}

/// The 2d - 1 real forms on C^d, as JSON.
#[pyfunction]
fn minimal_complex(d: usize) -> PyResult<String> {
    Ok(io::ensemble_to_string(&minimal_complex_ensemble(d).map_err(err)?))
}

#[pyfunction]
#[pyo3(signature = (field_tag, d, ranks, kind_name="general", seed=0))]
fn random(field_tag: &str, d: usize, ranks: Vec<usize>, kind_name: &str, seed: u64) -> PyResult<String> {
    let e = random_ensemble(field(field_tag)?, d, ranks.len(), &ranks, kind(kind_name)?, seed).map_err(err)?;
    Ok(io::ensemble_to_string(&e))
}

/// Rank-one ensemble from a frame file's JSON.
#[pyfunction]
fn from_frame(frame_json: &str) -> PyResult<String> {
    let f = io::parse_frame(frame_json).map_err(err)?;
    Ok(io::ensemble_to_string(&prae_core::rank_one_from_frame(&f).map_err(err)?))
}

#[pyfunction]
fn measure(ensemble_json: &str, signal: Vec<Complex64>) -> PyResult<Vec<f64>> {
    let e = ensemble(ensemble_json)?;
    Ok(measure_map(&e, &CVector::from_vec(signal)).map_err(err)?.0)
}

/// Gaussian signal drawn from the same stream as `prae measure --random`.
#[pyfunction]
#[pyo3(signature = (field_tag, d, seed=0))]
fn random_signal(field_tag: &str, d: usize, seed: u64) -> PyResult<Vec<Complex64>> {
    let x = rng::gaussian_vector(&mut rng::substream(seed, rng::domain::SIGNAL, 0), field(field_tag)?, d);
    Ok(x.iter().copied().collect())
}

/// Certification report as JSON.
#[pyfunction]
#[pyo3(signature = (ensemble_json, method="montecarlo", trials=200, restarts=8, seed=0))]
fn certify_ensemble(ensemble_json: &str, method: &str, trials: usize, restarts: usize, seed: u64) -> PyResult<String> {
    let m: Method = method.parse().map_err(err)?;
    let opts = MonteCarloOptions { trials, restarts, seed, ..Default::default() };
    Ok(certify::certify(&ensemble(ensemble_json)?, m, &opts).map_err(err)?.to_json_string())
}

/// Exact verdict for a frame: `exact-rank-one` (real frames) or `spark`.
#[pyfunction]
#[pyo3(signature = (frame_json, method="exact-rank-one"))]
fn certify_frame(frame_json: &str, method: &str) -> PyResult<String> {
    let f = io::parse_frame(frame_json).map_err(err)?;
    let report = match method.parse().map_err(err)? {
        Method::ExactRankOne => real_rank_one_exact(&f),
        Method::Spark => spark_report(&f),
        m => Err(Error::Unsupported(format!("{} is not an exact frame method", m.as_str()))),
    };
    Ok(report.map_err(err)?.to_json_string())
}

/// Collision witness for the frame [I, G] with `G` given column by column.
#[pyfunction]
#[pyo3(signature = (g_columns, seed=0))]
fn gram_collision(g_columns: Vec<Vec<Complex64>>, seed: u64) -> PyResult<String> {
    let d = g_columns.len() + 1;
    if g_columns.iter().any(|col| col.len() != d) {
        return Err(PyValueError::new_err(format!("each of the {} columns needs {d} entries", d - 1)));
    }
    let flat: Vec<Complex64> = g_columns.into_iter().flatten().collect();
    let g = prae_core::linalg::CMatrix::from_column_slice(d, d - 1, &flat);
    Ok(to_json(&gram_collision_witness(&g, seed).map_err(err)?))
}

/// Recovery result as JSON.
#[pyfunction]
#[pyo3(signature = (ensemble_json, measurements, restarts=20, seed=0, truth=None))]
fn recover(
    ensemble_json: &str,
    measurements: Vec<f64>,
    restarts: usize,
    seed: u64,
    truth: Option<Vec<Complex64>>,
) -> PyResult<String> {
    let e = ensemble(ensemble_json)?;
    let opts = RecoverOptions { restarts, seed, ..Default::default() };
    let truth = truth.map(CVector::from_vec);
    let res = recover_signal(&e, &MeasurementVector(measurements), &opts, truth.as_ref()).map_err(err)?;
    Ok(to_json(&res))
}

/// Success-rate table as CSV text.
#[pyfunction]
#[pyo3(signature = (field_tag, d, n_values, trials=20, kind_name="general", seed=0))]
fn sweep(field_tag: &str, d: usize, n_values: Vec<usize>, trials: usize, kind_name: &str, seed: u64) -> PyResult<String> {
    let cfg = SweepConfig::new(field(field_tag)?, d, n_values, kind(kind_name)?, trials, seed);
    Ok(sweep_csv(&run_sweep(&cfg).map_err(err)?))
}

/// Validation report as JSON; structural defects are reported, not raised.
#[pyfunction]
fn validate(ensemble_json: &str) -> PyResult<String> {
    let e = io::parse_ensemble_lenient(ensemble_json).map_err(err)?;
    Ok(to_json(&validate_ensemble(&e)))
}

#[pymodule]
fn prae(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(hankel, m)?)?;
    m.add_function(wrap_pyfunction!(minimal_complex, m)?)?;
    m.add_function(wrap_pyfunction!(random, m)?)?;
    m.add_function(wrap_pyfunction!(from_frame, m)?)?;
    m.add_function(wrap_pyfunction!(measure, m)?)?;
    m.add_function(wrap_pyfunction!(random_signal, m)?)?;
    m.add_function(wrap_pyfunction!(certify_ensemble, m)?)?;
    m.add_function(wrap_pyfunction!(certify_frame, m)?)?;
    m.add_function(wrap_pyfunction!(gram_collision, m)?)?;
    m.add_function(wrap_pyfunction!(recover, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    Ok(())
}
