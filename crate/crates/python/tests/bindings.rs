use pyo3::prelude::*;
use pyo3::types::PyDict;

type Row = (usize, f64, f64, f64, f64, f64);

fn module(py: Python<'_>) -> Bound<'_, PyModule> {
    let m = PyModule::new(py, "metricspace_py").unwrap();
    metricspace_py::register(&m).unwrap();
    m
}

#[test]
fn fixture_volume_matches_the_core_crate() {
    Python::attach(|py| {
        let m = module(py);
        let g = m.getattr("generate_fixture").unwrap().call1((2, 8, 7)).unwrap();
        let v: f64 = g.call_method0("volume").unwrap().extract().unwrap();
        let core =
            metricspace::cli::fixture::generate_fixture(2, 8, 7, metricspace::cli::fixture::DEFAULT_SPREAD).unwrap();
        assert_eq!(v, core.volume());
    });
}

#[test]
fn duality_inverts_volume_through_python() {
    Python::attach(|py| {
        let m = module(py);
        let locals = PyDict::new(py);
        locals.set_item("ms", &m).unwrap();
        py.run(
            c"g = ms.MetricField([[[2.0, 0.5], [0.5, 1.0]], [[1.0, 0.0], [0.0, 3.0]]])\nf = ms.duality_map(g)\nprod = g.volume() * f.volume()",
            None,
            Some(&locals),
        )
        .unwrap();
        let prod: f64 = locals.get_item("prod").unwrap().unwrap().extract().unwrap();
        assert!((prod - 1.0).abs() < 1e-13);
    });
}

#[test]
fn errors_map_to_python_exceptions() {
    Python::attach(|py| {
        let m = module(py);
        let locals = PyDict::new(py);
        locals.set_item("ms", &m).unwrap();
        let err = py.run(c"ms.MetricField([[[1.0, 2.0], [2.0, 1.0]]])", None, Some(&locals)).unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py));
        let err = py
            .run(c"ms.completion_probe(1.0, ms.generate_fixture(), mode='sideways')", None, Some(&locals))
            .unwrap_err();
        assert!(err.is_instance_of::<pyo3::exceptions::PyValueError>(py));
    });
}

#[test]
fn probe_verdict_for_normalized_collapse() {
    Python::attach(|py| {
        let m = module(py);
        let g = m.getattr("generate_fixture").unwrap().call0().unwrap();
        let (verdict, rows): (String, Vec<Row>) =
            m.getattr("completion_probe").unwrap().call1((1.0, g)).unwrap().extract().unwrap();
        assert_eq!(verdict, "not-cauchy");
        assert_eq!(rows.len(), 21);
    });
}
