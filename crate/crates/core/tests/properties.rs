use std::sync::Arc;

use nalgebra::DMatrix;
use proptest::prelude::*;

use metricspace::distance::{distance_report, volume_lower_bound, DistanceOptions};
use metricspace::fiber::{push_exponential, SpdMatrix, SymMatrix};
use metricspace::io::FieldFile;
use metricspace::metrics::{duality_map, inner, FamilyIndex};
use metricspace::{DiscreteManifold, MetricField, TangentField};

fn spd(n: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (prop::collection::vec(-1.0..1.0f64, n * n), 0.1..2.0f64).prop_map(move |(v, shift)| {
        let a = DMatrix::from_row_slice(n, n, &v);
        &a * a.transpose() + DMatrix::identity(n, n) * shift
    })
}

fn sym(n: usize) -> impl Strategy<Value = SymMatrix> {
    prop::collection::vec(-1.0..1.0f64, n * (n + 1) / 2).prop_map(move |v| SymMatrix::from_upper(n, &v).unwrap())
}

fn field(points: usize) -> impl Strategy<Value = MetricField> {
    (prop::collection::vec(spd(2), points), prop::collection::vec(0.1..1.0f64, points)).prop_map(|(mats, w)| {
        let man = Arc::new(DiscreteManifold::with_weights(2, &w).unwrap());
        MetricField::from_matrices(man, mats).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn field_file_round_trip(g in field(4)) {
        let text = FieldFile::from_metric(&g).to_json();
        let back = FieldFile::parse(&text).unwrap().metric_field().unwrap();
        prop_assert_eq!(back.max_deviation(&g), 0.0);
        prop_assert_eq!(back.manifold(), g.manifold());
    }

    #[test]
    fn duality_is_an_involution_inverting_volume(g in field(3)) {
        let f = duality_map(&g).unwrap();
        prop_assert!(duality_map(&f).unwrap().max_deviation(&g) < 1e-12 * g.mats().iter().map(|m| m.as_matrix().norm()).fold(0.0, f64::max));
        prop_assert!((f.volume() * g.volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn inner_products_scale_with_volume(g in field(3), hs in prop::collection::vec(sym(2), 3), p in -2.0..3.0f64) {
        let h = TangentField::new(g.manifold_arc().clone(), hs).unwrap();
        let e = inner(0.0, &g, &h, &h).unwrap();
        let q = inner(p, &g, &h, &h).unwrap();
        prop_assert!((q - e * g.volume().powf(-p)).abs() <= 1e-12 * e.abs().max(1e-300));
        prop_assert!(e >= 0.0);
    }

    #[test]
    fn push_exponential_composes(a in spd(3), s in sym(3), t1 in -1.0..1.0f64, t2 in -1.0..1.0f64) {
        let g = SpdMatrix::from_matrix(a).unwrap();
        let once = push_exponential(&g, &s, t1 + t2).unwrap();
        // The direction is carried along as g₁ g⁻¹ S.
        let g1 = push_exponential(&g, &s, t1).unwrap();
        let carried = SymMatrix::symmetrized(g1.as_matrix() * g.inverse() * s.as_matrix());
        let twice = push_exponential(&g1, &carried, t2).unwrap();
        let scale = once.as_matrix().norm();
        prop_assert!((once.as_matrix() - twice.as_matrix()).norm() <= 1e-10 * scale);
    }

    #[test]
    fn lower_bound_never_exceeds_upper(g in field(3), h in field(3), p in prop::sample::select(vec![-1.0, 0.0, 0.5, 1.0, 2.0])) {
        // Same manifold for both fields.
        let h = MetricField::new(g.manifold_arc().clone(), h.mats().to_vec()).unwrap();
        let opts = DistanceOptions { samples: 16, ..Default::default() };
        let r = distance_report(FamilyIndex::from(p), &g, &h, &opts).unwrap();
        prop_assert!(r.lower <= r.upper + 1e-8, "{} > {}", r.lower, r.upper);
        prop_assert_eq!(r.lower, volume_lower_bound(p, &g, &h).unwrap());
    }
}
