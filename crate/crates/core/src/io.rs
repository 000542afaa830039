//! The field file format: one JSON document per field.
//!
//! ```json
//! {
//!   "dim": 2,
//!   "kind": "metric",
//!   "points": [
//!     {"weight": 0.5, "reference_metric": [1, 0, 1], "matrix": [2, 0.1, 1]}
//!   ]
//! }
//! ```
//!
//! Matrices are row-major upper triangles (`n(n+1)/2` entries). A full
//! row-major `n²` list is also accepted and checked for symmetry.
//! `reference_metric` defaults to the identity, `kind` to `metric`.

use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fiber::{SpdMatrix, SymMatrix};
use crate::manifold::{DiscreteManifold, QuadPoint};
use crate::metrics::{MetricField, TangentField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Metric,
    Tangent,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointRecord {
    pub weight: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_metric: Option<Vec<f64>>,
    pub matrix: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldFile {
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<FieldKind>,
    pub points: Vec<PointRecord>,
}

fn parse_sym(n: usize, entries: &[f64], point: usize) -> Result<SymMatrix> {
    let tri = n * (n + 1) / 2;
    if entries.len() == tri {
        SymMatrix::from_upper(n, entries).map_err(|e| e.at_point(point))
    } else if entries.len() == n * n {
        SymMatrix::new(DMatrix::from_row_slice(n, n, entries)).map_err(|e| e.at_point(point))
    } else {
        Err(Error::Parse(format!(
            "point {point}: expected {tri} (upper triangle) or {} (full) entries, found {}",
            n * n,
            entries.len()
        )))
    }
}

impl FieldFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("field files serialize");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn manifold(&self) -> Result<DiscreteManifold> {
        let n = self.dim;
        if n == 0 {
            return Err(Error::Parse("dim must be positive".into()));
        }
        let points = self
            .points
            .iter()
            .enumerate()
            .map(|(i, rec)| {
                let reference_metric = match &rec.reference_metric {
                    Some(v) => SpdMatrix::new(parse_sym(n, v, i)?).map_err(|e| e.at_point(i))?,
                    None => SpdMatrix::identity(n),
                };
                Ok(QuadPoint { weight: rec.weight, reference_metric })
            })
            .collect::<Result<Vec<_>>>()?;
        DiscreteManifold::new(n, points)
    }

    fn matrices(&self) -> Result<Vec<SymMatrix>> {
        self.points.iter().enumerate().map(|(i, rec)| parse_sym(self.dim, &rec.matrix, i)).collect()
    }

    /// Reads the field as a metric; every matrix must be SPD.
    pub fn metric_field(&self) -> Result<MetricField> {
        if self.kind == Some(FieldKind::Tangent) {
            return Err(Error::Parse("file holds a tangent field, expected a metric".into()));
        }
        let man = Arc::new(self.manifold()?);
        let mats = self
            .matrices()?
            .into_iter()
            .enumerate()
            .map(|(i, m)| SpdMatrix::new(m).map_err(|e| e.at_point(i)))
            .collect::<Result<Vec<_>>>()?;
        MetricField::new(man, mats)
    }

    /// Reads the field as a tangent vector on the given manifold (or its own).
    pub fn tangent_field(&self, man: Option<Arc<DiscreteManifold>>) -> Result<TangentField> {
        let man = match man {
            Some(m) => m,
            None => Arc::new(self.manifold()?),
        };
        TangentField::new(man, self.matrices()?)
    }

    pub fn from_metric(g: &MetricField) -> Self {
        Self::build(g.manifold(), g.mats().iter().map(|m| m.sym().to_upper()), FieldKind::Metric)
    }

    pub fn from_tangent(h: &TangentField) -> Self {
        Self::build(h.manifold(), h.mats().iter().map(|m| m.to_upper()), FieldKind::Tangent)
    }

    fn build(man: &DiscreteManifold, mats: impl Iterator<Item = Vec<f64>>, kind: FieldKind) -> Self {
        let points = man
            .points()
            .iter()
            .zip(mats)
            .map(|(pt, matrix)| PointRecord {
                weight: pt.weight,
                reference_metric: Some(pt.reference_metric.sym().to_upper()),
                matrix,
            })
            .collect();
        FieldFile { dim: man.dim(), kind: Some(kind), points }
    }
}

pub fn read_metric(path: &Path) -> Result<MetricField> {
    FieldFile::read(path)?.metric_field()
}

pub fn write_metric(path: &Path, g: &MetricField) -> Result<()> {
    FieldFile::from_metric(g).write(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_values() {
        let man = Arc::new(DiscreteManifold::with_weights(2, &[0.25, 0.75]).unwrap());
        let g = MetricField::from_matrices(
            man,
            vec![
                DMatrix::from_row_slice(2, 2, &[2.0, 0.1, 0.1, 1.0]),
                DMatrix::from_row_slice(2, 2, &[0.3, 0.0, 0.0, 5.0]),
            ],
        )
        .unwrap();
        let text = FieldFile::from_metric(&g).to_json();
        let back = FieldFile::parse(&text).unwrap().metric_field().unwrap();
        assert_eq!(back.max_deviation(&g), 0.0);
        assert_eq!(back.manifold(), g.manifold());
    }

    #[test]
    fn rejects_non_spd_with_point_index() {
        let text = r#"{"dim": 2, "points": [
            {"weight": 1.0, "matrix": [1, 0, 1]},
            {"weight": 1.0, "matrix": [1, 3, 1]}
        ]}"#;
        let err = FieldFile::parse(text).unwrap().metric_field().unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { point: 1, .. }), "{err}");
        assert!(err.to_string().contains("point 1"));
    }

    #[test]
    fn rejects_asymmetric_full_matrix() {
        let text = r#"{"dim": 2, "points": [
            {"weight": 1.0, "matrix": [1, 0.5, 0.4, 1]}
        ]}"#;
        let err = FieldFile::parse(text).unwrap().metric_field().unwrap_err();
        assert!(matches!(err, Error::NotSymmetric { point: 0, .. }), "{err}");
    }

    #[test]
    fn rejects_wrong_entry_count() {
        let text = r#"{"dim": 3, "points": [{"weight": 1.0, "matrix": [1, 0, 1]}]}"#;
        assert!(matches!(FieldFile::parse(text).unwrap().metric_field(), Err(Error::Parse(_))));
    }
}
