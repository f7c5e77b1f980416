//! Python bindings: thin wrappers returning plain lists and dicts.

use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use pyo3::IntoPyObjectExt;
use sandlab::experiments::{iid_trials, HeightDistribution};
use sandlab::gamma::{compute_gamma, DEFAULT_THRESHOLD};
use sandlab::greens::{greens_torus as torus_table, z2_values};
use sandlab::sandpile::{group_structure, is_recurrent as recurrent, stabilize_with, Policy, Sandpile};
use sandlab::spectral::{dual_group_oracle, gap_search, DEFAULT_B, DEFAULT_R};
use sandlab::Error;
use serde::Serialize;
use serde_json::Value;

create_exception!(sandlab_py, NumericalGuardError, PyArithmeticError);

fn err(e: Error) -> PyErr {
    match e {
        e if e.is_numerical() => NumericalGuardError::new_err(e.to_string()),
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        Error::InvalidArgument(_) | Error::DomainMismatch(..) | Error::NotRecurrent => {
            PyValueError::new_err(e.to_string())
        }
        e => PyRuntimeError::new_err(e.to_string()),
    }
}

fn value_to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    match v {
        Value::Null => Ok(py.None().into_bound(py)),
        Value::Bool(b) => b.into_bound_py_any(py),
        Value::Number(n) => match (n.as_i64(), n.as_u64()) {
            (Some(i), _) => i.into_bound_py_any(py),
            (None, Some(u)) => u.into_bound_py_any(py),
            _ => n.as_f64().unwrap_or(f64::NAN).into_bound_py_any(py),
        },
        Value::String(s) => s.into_bound_py_any(py),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for x in items {
                list.append(value_to_py(py, x)?)?;
            }
            Ok(list.into_any())
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, x) in map {
                dict.set_item(k, value_to_py(py, x)?)?;
            }
            Ok(dict.into_any())
        }
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, x: &T) -> PyResult<Bound<'py, PyAny>> {
    let v = serde_json::to_value(x).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    value_to_py(py, &v)
}

fn pile(heights: Vec<Vec<u64>>) -> PyResult<Sandpile> {
    let m = heights.len();
    if m < 2 || heights.iter().any(|row| row.len() != m) {
        return Err(PyValueError::new_err("heights must be an m x m grid with m >= 2"));
    }
    Sandpile::from_heights(m, heights.concat()).map_err(err)
}

/// Green's function of the torus of side `m`, mean zero, as `g[i][j]`.
#[pyfunction]
fn greens_torus(py: Python<'_>, m: usize) -> PyResult<Vec<Vec<f64>>> {
    if m < 2 {
        return Err(PyValueError::new_err("torus side must be at least 2"));
    }
    let g = py.detach(|| torus_table(m));
    Ok((0..m as i64).map(|i| (0..m as i64).map(|j| g.get(i, j)).collect()).collect())
}

/// Values of the plane Green's function (normalised to zero at the origin).
#[pyfunction]
fn greens_z2(py: Python<'_>, points: Vec<(i64, i64)>) -> PyResult<Vec<f64>> {
    py.detach(|| z2_values(&points)).map(|z| z.values).map_err(err)
}

/// The gap constant and its reciprocal. The audit trail is dropped unless asked for.
#[pyfunction]
#[pyo3(signature = (precision = 1e-9, threshold = DEFAULT_THRESHOLD, audit = false))]
fn gamma<'py>(py: Python<'py>, precision: f64, threshold: f64, audit: bool) -> PyResult<Bound<'py, PyAny>> {
    let report = py.detach(|| compute_gamma(threshold, precision)).map_err(err)?;
    let out = to_py(py, &report)?;
    if !audit {
        out.cast::<PyDict>()?.del_item("audit")?;
    }
    Ok(out)
}

/// Spectral gap on the torus of side `m` by prevector search.
#[pyfunction]
#[pyo3(signature = (m, b = DEFAULT_B, r = DEFAULT_R))]
fn gap<'py>(py: Python<'py>, m: usize, b: usize, r: usize) -> PyResult<Bound<'py, PyAny>> {
    let s = py.detach(|| gap_search(m, b, r)).map_err(err)?;
    to_py(py, &s)
}

/// Exact gap and squared L^2 distances after each of `steps` on a torus with `m <= 3`.
#[pyfunction]
#[pyo3(signature = (m, steps = vec![0, 1, 2, 4, 8, 16, 32]))]
fn dual<'py>(py: Python<'py>, m: usize, steps: Vec<u64>) -> PyResult<Bound<'py, PyDict>> {
    let oracle = py.detach(|| dual_group_oracle(m)).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("order", oracle.order)?;
    out.set_item("gap", oracle.gap)?;
    let l2: Vec<f64> = steps.iter().map(|&n| oracle.l2_distance_sq(n)).collect();
    out.set_item("l2_sq", l2)?;
    Ok(out)
}

/// Order and invariant factors of the sandpile group; big integers come back as `int`.
#[pyfunction]
fn group<'py>(py: Python<'py>, m: usize) -> PyResult<Bound<'py, PyDict>> {
    let g = py.detach(|| group_structure(m)).map_err(err)?;
    let int = py.get_type::<pyo3::types::PyInt>();
    let out = PyDict::new(py);
    out.set_item("m", g.m)?;
    out.set_item("unit_factors", g.unit_factors)?;
    let factors = g
        .invariant_factors
        .iter()
        .map(|f| int.call1((f.to_str_radix(10),)))
        .collect::<PyResult<Vec<_>>>()?;
    out.set_item("invariant_factors", factors)?;
    out.set_item("order", int.call1((g.order.to_str_radix(10),))?)?;
    Ok(out)
}

/// Stabilize an `m x m` pile with the sink at `[0][0]` (which must be zero).
#[pyfunction]
#[pyo3(signature = (heights, policy = "fifo"))]
fn stabilize<'py>(py: Python<'py>, heights: Vec<Vec<u64>>, policy: &str) -> PyResult<Bound<'py, PyDict>> {
    let policy = match policy {
        "fifo" => Policy::Fifo,
        "lifo" => Policy::Lifo,
        p => return Err(PyValueError::new_err(format!("unknown policy {p:?}"))),
    };
    let s = pile(heights)?;
    let r = py.detach(|| stabilize_with(&s, policy));
    let m = r.state.m();
    let out = PyDict::new(py);
    let rows: Vec<Vec<u64>> = r.state.heights().chunks(m).map(<[u64]>::to_vec).collect();
    let odo: Vec<Vec<u64>> = r.odometer.counts.chunks(m).map(<[u64]>::to_vec).collect();
    out.set_item("heights", rows)?;
    out.set_item("odometer", odo)?;
    out.set_item("lost", r.lost)?;
    Ok(out)
}

#[pyfunction]
fn is_recurrent(heights: Vec<Vec<u64>>) -> PyResult<bool> {
    Ok(recurrent(&pile(heights)?))
}

/// Parallel toppling of i.i.d. piles on a window; `law` is a list of `(height, probability)`.
#[pyfunction]
#[pyo3(signature = (law, radius, trials = 20, seed = 1, max_steps = None))]
fn iid<'py>(
    py: Python<'py>,
    law: Vec<(u64, f64)>,
    radius: usize,
    trials: usize,
    seed: u64,
    max_steps: Option<usize>,
) -> PyResult<Bound<'py, PyAny>> {
    let dist = HeightDistribution::new(law).map_err(err)?;
    let summary = py
        .detach(|| iid_trials(&dist, radius, max_steps.unwrap_or(radius), trials, seed))
        .map_err(err)?;
    to_py(py, &summary)
}

#[pymodule]
fn sandlab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("NumericalGuardError", m.py().get_type::<NumericalGuardError>())?;
    m.add_function(wrap_pyfunction!(greens_torus, m)?)?;
    m.add_function(wrap_pyfunction!(greens_z2, m)?)?;
    m.add_function(wrap_pyfunction!(gamma, m)?)?;
    m.add_function(wrap_pyfunction!(gap, m)?)?;
    m.add_function(wrap_pyfunction!(dual, m)?)?;
    m.add_function(wrap_pyfunction!(group, m)?)?;
    m.add_function(wrap_pyfunction!(stabilize, m)?)?;
    m.add_function(wrap_pyfunction!(is_recurrent, m)?)?;
    m.add_function(wrap_pyfunction!(iid, m)?)?;
    Ok(())
}
