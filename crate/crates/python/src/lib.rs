//! Python bindings for `metricspace`.
//!
//! Matrices cross the boundary as nested lists (`list[list[float]]`), one per
//! quadrature point. Input errors raise `ValueError`; numerical failures raise
//! `RuntimeError`.

use std::sync::Arc;

use metricspace::distance::{self, DistanceOptions, ProbeMode, Verdict};
use metricspace::geodesics::{self, PathPolyline};
use metricspace::io::FieldFile;
use metricspace::{cli, curvature, metrics, DiscreteManifold, Error};
use nalgebra::DMatrix;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

type Matrices = Vec<Vec<Vec<f64>>>;

fn to_py(e: Error) -> PyErr {
    if e.is_input_error() {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn to_dmatrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("matrix must be square"));
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn from_dmatrix(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn manifold(dim: usize, weights: Option<Vec<f64>>, count: usize) -> PyResult<Arc<DiscreteManifold>> {
    let man = match weights {
        Some(w) => DiscreteManifold::with_weights(dim, &w),
        None => DiscreteManifold::uniform(dim, count),
    };
    man.map(Arc::new).map_err(to_py)
}

/// A metric: one SPD matrix per quadrature point.
#[pyclass(name = "MetricField", module = "metricspace_py", skip_from_py_object)]
#[derive(Clone)]
pub struct PyMetricField {
    inner: metrics::MetricField,
}

/// A tangent vector: one symmetric matrix per quadrature point.
#[pyclass(name = "TangentField", module = "metricspace_py", skip_from_py_object)]
#[derive(Clone)]
pub struct PyTangentField {
    inner: metrics::TangentField,
}

fn wrap(g: metrics::MetricField) -> PyMetricField {
    PyMetricField { inner: g }
}

#[pymethods]
impl PyMetricField {
    /// Builds a field from matrices; weights default to uniform `1/len`.
    #[new]
    #[pyo3(signature = (matrices, weights=None))]
    fn new(matrices: Matrices, weights: Option<Vec<f64>>) -> PyResult<Self> {
        let dim = matrices.first().map_or(0, |m| m.len());
        let weights = weights.or_else(|| Some(vec![1.0 / matrices.len().max(1) as f64; matrices.len()]));
        let man = manifold(dim, weights, matrices.len())?;
        let mats = matrices.iter().map(|m| to_dmatrix(m)).collect::<PyResult<Vec<_>>>()?;
        metrics::MetricField::from_matrices(man, mats).map(wrap).map_err(to_py)
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        FieldFile::parse(text).and_then(|f| f.metric_field()).map(wrap).map_err(to_py)
    }

    fn to_json(&self) -> String {
        FieldFile::from_metric(&self.inner).to_json()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn matrices(&self) -> Matrices {
        self.inner.mats().iter().map(|m| from_dmatrix(m.as_matrix())).collect()
    }

    fn weights(&self) -> Vec<f64> {
        self.inner.manifold().weights()
    }

    fn volume(&self) -> f64 {
        self.inner.volume()
    }

    /// `√det(g̃⁻¹g)` at each point.
    fn densities(&self) -> Vec<f64> {
        self.inner.densities()
    }

    fn scaled(&self, c: f64) -> PyResult<Self> {
        self.inner.scaled(c).map(wrap).map_err(to_py)
    }

    /// A tangent field on the same manifold.
    fn tangent(&self, matrices: Matrices) -> PyResult<PyTangentField> {
        let mats = matrices.iter().map(|m| to_dmatrix(m)).collect::<PyResult<Vec<_>>>()?;
        metrics::TangentField::from_matrices(self.inner.manifold_arc().clone(), mats)
            .map(|inner| PyTangentField { inner })
            .map_err(to_py)
    }

    /// The tangent field `g` itself.
    fn tautological(&self) -> PyTangentField {
        PyTangentField { inner: metrics::TangentField::tautological(&self.inner) }
    }

    fn max_deviation(&self, other: &PyMetricField) -> f64 {
        self.inner.max_deviation(&other.inner)
    }

    fn __repr__(&self) -> String {
        format!("MetricField(n={}, points={}, volume={:.6e})", self.inner.dim(), self.inner.len(), self.inner.volume())
    }
}

#[pymethods]
impl PyTangentField {
    fn matrices(&self) -> Matrices {
        self.inner.mats().iter().map(|m| from_dmatrix(m.as_matrix())).collect()
    }

    fn scale(&self, c: f64) -> Self {
        PyTangentField { inner: self.inner.scale(c) }
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("TangentField(n={}, points={})", self.inner.dim(), self.inner.len())
    }
}

/// Seeded random metric field with identity references and uniform weights.
#[pyfunction]
#[pyo3(signature = (n=2, points=8, seed=7, spread=cli::fixture::DEFAULT_SPREAD))]
fn generate_fixture(n: usize, points: usize, seed: u64, spread: f64) -> PyResult<PyMetricField> {
    cli::fixture::generate_fixture(n, points, seed, spread).map(wrap).map_err(to_py)
}

/// `g_p(h, k)` at `g`.
#[pyfunction]
fn inner(p: f64, g: &PyMetricField, h: &PyTangentField, k: &PyTangentField) -> PyResult<f64> {
    metrics::inner(p, &g.inner, &h.inner, &k.inner).map_err(to_py)
}

#[pyfunction]
fn norm(p: f64, g: &PyMetricField, h: &PyTangentField) -> PyResult<f64> {
    metrics::norm(p, &g.inner, &h.inner).map_err(to_py)
}

/// `g ↦ V^{-4/n} g`.
#[pyfunction]
fn duality_map(g: &PyMetricField) -> PyResult<PyMetricField> {
    metrics::duality_map(&g.inner).map(wrap).map_err(to_py)
}

#[pyfunction]
fn duality_differential(g: &PyMetricField, h: &PyTangentField) -> PyResult<PyTangentField> {
    metrics::duality_differential(&g.inner, &h.inner).map(|inner| PyTangentField { inner }).map_err(to_py)
}

/// Closed-form `g_1` geodesic from `(g, h)` sampled at `times`.
#[pyfunction]
fn geodesic_closed_form(g: &PyMetricField, h: &PyTangentField, times: Vec<f64>) -> PyResult<Vec<PyMetricField>> {
    let nf = geodesics::normal_form(&g.inner, &h.inner).map_err(to_py)?;
    times.iter().map(|&t| geodesics::geodesic_eval(&nf, &g.inner, t).map(wrap).map_err(to_py)).collect()
}

/// First time the closed-form `g_1` geodesic leaves the cone (`inf` if never).
#[pyfunction]
fn blowup_time(g: &PyMetricField, h: &PyTangentField) -> PyResult<f64> {
    geodesics::normal_form(&g.inner, &h.inner).map(|nf| geodesics::blowup_time(&nf)).map_err(to_py)
}

/// RK4 `g_p` geodesic; returns `(times, fields)`.
#[pyfunction]
#[pyo3(signature = (p, g, h, t_max, dt=1e-3))]
fn integrate_geodesic(
    p: f64,
    g: &PyMetricField,
    h: &PyTangentField,
    t_max: f64,
    dt: f64,
) -> PyResult<(Vec<f64>, Vec<PyMetricField>)> {
    let path = geodesics::integrate_geodesic(p, &g.inner, &h.inner, t_max, dt).map_err(to_py)?;
    let PathPolyline { times, fields, .. } = path;
    Ok((times, fields.into_iter().map(wrap).collect()))
}

/// Sectional curvature of the plane spanned by `h, k`.
#[pyfunction]
#[pyo3(signature = (p, g, h, k, eps=1e-4))]
fn sectional_curvature(p: f64, g: &PyMetricField, h: &PyTangentField, k: &PyTangentField, eps: f64) -> PyResult<f64> {
    curvature::sectional_curvature(p, &g.inner, &h.inner, &k.inner, eps).map_err(to_py)
}

/// Closed-form sectional curvature for a `g_p`-orthonormalized plane.
#[pyfunction]
fn sectional_curvature_formula(p: f64, g: &PyMetricField, h: &PyTangentField, k: &PyTangentField) -> PyResult<f64> {
    let plane = curvature::PlaneSpec::orthonormal(p, &g.inner, &h.inner, &k.inner).map_err(to_py)?;
    let sec_e = curvature::curvature_numeric(0.0, &g.inner, &plane.h, &plane.k, 1e-4).map_err(to_py)?;
    curvature::sec_formula(p, &plane, sec_e).map_err(to_py)
}

/// Lower and upper bounds on `d_p(g, h)` as a dict.
#[pyfunction]
#[pyo3(signature = (p, g, h, optimize=false))]
fn distance_bounds<'py>(
    py: Python<'py>,
    p: f64,
    g: &PyMetricField,
    h: &PyMetricField,
    optimize: bool,
) -> PyResult<Bound<'py, PyDict>> {
    let opts = DistanceOptions { optimize, ..Default::default() };
    let r = distance::distance_report(p, &g.inner, &h.inner, &opts).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("p", r.p)?;
    d.set_item("lower", r.lower)?;
    d.set_item("upper", r.upper)?;
    d.set_item("method", r.method)?;
    d.set_item("candidates", r.candidates)?;
    Ok(d)
}

#[pyfunction]
fn volume_lower_bound(p: f64, g: &PyMetricField, h: &PyMetricField) -> PyResult<f64> {
    distance::volume_lower_bound(p, &g.inner, &h.inner).map_err(to_py)
}

/// Probe `h_k = c_k g` with `c_k = 4^{∓k}`; returns `(verdict, rows)` where
/// each row is `(k, c, volume, lower, upper_tail, dual_upper_tail)`.
#[pyfunction]
#[pyo3(signature = (p, g, mode="collapse", k_max=20))]
#[allow(clippy::type_complexity)]
fn completion_probe(
    p: f64,
    g: &PyMetricField,
    mode: &str,
    k_max: usize,
) -> PyResult<(String, Vec<(usize, f64, f64, f64, f64, f64)>)> {
    let mode = match mode {
        "collapse" => ProbeMode::Collapse,
        "blowup" => ProbeMode::Blowup,
        other => return Err(PyValueError::new_err(format!("unknown probe mode `{other}`"))),
    };
    let r = distance::completion_probe(p, mode, &g.inner, k_max).map_err(to_py)?;
    let verdict = match r.verdict {
        Verdict::Cauchy => "cauchy",
        Verdict::NotCauchy => "not-cauchy",
        Verdict::Inconclusive => "inconclusive",
    };
    let rows = r.rows.iter().map(|r| (r.k, r.c, r.volume, r.lower, r.upper_tail, r.dual_upper_tail)).collect();
    Ok((verdict.to_string(), rows))
}

#[pymodule]
fn metricspace_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    register(m)
}

/// Adds every class and function to `m`.
pub fn register(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMetricField>()?;
    m.add_class::<PyTangentField>()?;
    m.add_function(wrap_pyfunction!(generate_fixture, m)?)?;
    m.add_function(wrap_pyfunction!(inner, m)?)?;
    m.add_function(wrap_pyfunction!(norm, m)?)?;
    m.add_function(wrap_pyfunction!(duality_map, m)?)?;
    m.add_function(wrap_pyfunction!(duality_differential, m)?)?;
    m.add_function(wrap_pyfunction!(geodesic_closed_form, m)?)?;
    m.add_function(wrap_pyfunction!(blowup_time, m)?)?;
    m.add_function(wrap_pyfunction!(integrate_geodesic, m)?)?;
    m.add_function(wrap_pyfunction!(sectional_curvature, m)?)?;
    m.add_function(wrap_pyfunction!(sectional_curvature_formula, m)?)?;
    m.add_function(wrap_pyfunction!(distance_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(volume_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(completion_probe, m)?)?;
    Ok(())
}
