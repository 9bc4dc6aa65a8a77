//! Labeled anatomical surface meshes, structure landmarks and the PCA
//! statistical shape model used to expand a small population of hearts.

mod io;
mod shape_model;

pub use io::{load_model, parse_mesh_text, parse_ply, write_mesh_text};
pub use shape_model::{fit_shape_model, DEFAULT_SAMPLE_RANGE, ShapeModel, ShapeModelError, Topology};

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Integer structure label. `0` is reserved for background in label maps.
pub type Label = u16;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("triangle {record}: vertex index {index} out of range (mesh has {vertex_count} vertices)")]
    DanglingIndex {
        record: usize,
        index: usize,
        vertex_count: usize,
    },
    #[error("triangle {record}: unknown structure label {label}")]
    UnknownLabel { record: usize, label: Label },
    #[error("anchor `{name}`: vertex index {index} out of range")]
    DanglingAnchor { name: String, index: usize },
    #[error("structure `{0}` has no triangles")]
    EmptyStructure(String),
    #[error("unknown structure or anchor `{0}`")]
    UnknownLandmark(String),
    #[error("label count mismatch: {triangles} triangles but {labels} labels")]
    LabelCount { triangles: usize, labels: usize },
}

/// A closed triangle surface made of several labeled anatomical structures.
///
/// Coordinates are millimetres. Anchors are named vertices (e.g. the LV apex)
/// that travel with the topology through the shape model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledMesh {
    pub model_id: String,
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[usize; 3]>,
    pub structure_of_triangle: Vec<Label>,
    pub structure_names: BTreeMap<Label, String>,
    #[serde(default)]
    pub anchors: BTreeMap<String, usize>,
    /// Whether the inputs were rigidly pre-aligned before export.
    #[serde(default)]
    pub pre_aligned: bool,
}

impl LabeledMesh {
    /// Builds a mesh and checks every structural invariant.
    pub fn new(
        model_id: impl Into<String>,
        vertices: Vec<Point3<f64>>,
        triangles: Vec<[usize; 3]>,
        structure_of_triangle: Vec<Label>,
        structure_names: BTreeMap<Label, String>,
    ) -> Result<Self, MeshError> {
        let mesh = Self {
            model_id: model_id.into(),
            vertices,
            triangles,
            structure_of_triangle,
            structure_names,
            anchors: BTreeMap::new(),
            pre_aligned: false,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<(), MeshError> {
        if self.triangles.len() != self.structure_of_triangle.len() {
            return Err(MeshError::LabelCount {
                triangles: self.triangles.len(),
                labels: self.structure_of_triangle.len(),
            });
        }
        let n = self.vertices.len();
        for (record, (tri, label)) in self
            .triangles
            .iter()
            .zip(&self.structure_of_triangle)
            .enumerate()
        {
            if let Some(&index) = tri.iter().find(|&&i| i >= n) {
                return Err(MeshError::DanglingIndex {
                    record,
                    index,
                    vertex_count: n,
                });
            }
            if !self.structure_names.contains_key(label) {
                return Err(MeshError::UnknownLabel {
                    record,
                    label: *label,
                });
            }
        }
        for (name, &index) in &self.anchors {
            if index >= n {
                return Err(MeshError::DanglingAnchor {
                    name: name.clone(),
                    index,
                });
            }
        }
        Ok(())
    }

    pub fn label_of(&self, name: &str) -> Option<Label> {
        self.structure_names
            .iter()
            .find(|(_, n)| n.as_str() == name)
            .map(|(l, _)| *l)
    }

    pub fn name_of(&self, label: Label) -> String {
        self.structure_names
            .get(&label)
            .cloned()
            .unwrap_or_else(|| format!("structure_{label}"))
    }

    pub fn triangle_count(&self, label: Label) -> usize {
        self.structure_of_triangle
            .iter()
            .filter(|&&l| l == label)
            .count()
    }

    /// Triangles of one structure as coordinate triples.
    pub fn structure_triangles(
        &self,
        label: Label,
    ) -> impl Iterator<Item = [Point3<f64>; 3]> + '_ {
        self.triangles
            .iter()
            .zip(&self.structure_of_triangle)
            .filter(move |(_, &l)| l == label)
            .map(|(t, _)| [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]])
    }

    pub fn translated(&self, offset: Vector3<f64>) -> Self {
        let mut out = self.clone();
        for v in &mut out.vertices {
            *v += offset;
        }
        out
    }

    /// Resolves a landmark name: anchors first, then structure centroids.
    pub fn resolve_landmark(&self, name: &str) -> Result<Point3<f64>, MeshError> {
        if let Some(&index) = self.anchors.get(name) {
            return self
                .vertices
                .get(index)
                .copied()
                .ok_or_else(|| MeshError::DanglingAnchor {
                    name: name.to_string(),
                    index,
                });
        }
        let label = self
            .label_of(name)
            .ok_or_else(|| MeshError::UnknownLandmark(name.to_string()))?;
        landmark_position(self, label)
    }
}

/// Area-weighted centroid of a structure's triangles.
pub fn landmark_position(mesh: &LabeledMesh, structure: Label) -> Result<Point3<f64>, MeshError> {
    let mut weighted = Vector3::zeros();
    let mut total_area = 0.0;
    let mut count = 0usize;
    for [a, b, c] in mesh.structure_triangles(structure) {
        let area = 0.5 * (b - a).cross(&(c - a)).norm();
        let centroid = (a.coords + b.coords + c.coords) / 3.0;
        weighted += centroid * area;
        total_area += area;
        count += 1;
    }
    if count == 0 || total_area <= 0.0 {
        return Err(MeshError::EmptyStructure(mesh.name_of(structure)));
    }
    Ok(Point3::from(weighted / total_area))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::unit_cube;
    use approx::assert_relative_eq;

    fn names(pairs: &[(Label, &str)]) -> BTreeMap<Label, String> {
        pairs.iter().map(|(l, n)| (*l, n.to_string())).collect()
    }

    #[test]
    fn single_triangle_centroid() {
        let mesh = LabeledMesh::new(
            "tri",
            vec![Point3::origin(), Point3::new(1.0, 0.0, 0.0), Point3::new(0.0, 1.0, 0.0)],
            vec![[0, 1, 2]],
            vec![1],
            names(&[(1, "a")]),
        )
        .unwrap();
        let p = landmark_position(&mesh, 1).unwrap();
        assert_relative_eq!(p, Point3::new(1.0 / 3.0, 1.0 / 3.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn cube_centroid_is_center() {
        let p = landmark_position(&unit_cube(3), 3).unwrap();
        assert_relative_eq!(p, Point3::new(0.5, 0.5, 0.5), epsilon = 1e-12);
    }

    #[test]
    fn area_weighting() {
        // Areas 1 and 3 (right triangles with legs sqrt2 and sqrt6).
        let s2 = 2f64.sqrt();
        let s6 = 6f64.sqrt();
        let v = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(s2, 0.0, 0.0),
            Point3::new(0.0, s2, 0.0),
            Point3::new(10.0, 0.0, 1.0),
            Point3::new(10.0 + s6, 0.0, 1.0),
            Point3::new(10.0, s6, 1.0),
        ];
        let c1 = Point3::new(s2 / 3.0, s2 / 3.0, 0.0);
        let c2 = Point3::new(10.0 + s6 / 3.0, s6 / 3.0, 1.0);
        let mesh =
            LabeledMesh::new("two", v, vec![[0, 1, 2], [3, 4, 5]], vec![1, 1], names(&[(1, "a")]))
                .unwrap();
        let expected = Point3::from((c1.coords + 3.0 * c2.coords) / 4.0);
        assert_relative_eq!(landmark_position(&mesh, 1).unwrap(), expected, epsilon = 1e-12);
    }

    #[test]
    fn empty_structure_is_named() {
        let mut mesh = unit_cube(1);
        mesh.structure_names.insert(2, "mitral_valve".into());
        let err = landmark_position(&mesh, 2).unwrap_err();
        assert!(err.to_string().contains("mitral_valve"));
    }

    #[test]
    fn dangling_index_rejected() {
        let err = LabeledMesh::new(
            "bad",
            vec![Point3::origin(); 3],
            vec![[0, 1, 3]],
            vec![1],
            names(&[(1, "a")]),
        )
        .unwrap_err();
        assert!(matches!(err, MeshError::DanglingIndex { index: 3, .. }));
    }

    #[test]
    fn landmark_translation_and_reordering() {
        let mesh = unit_cube(1);
        let t = Vector3::new(3.25, -7.5, 12.0);
        let base = landmark_position(&mesh, 1).unwrap();
        let moved = landmark_position(&mesh.translated(t), 1).unwrap();
        assert_relative_eq!(moved, base + t, epsilon = 1e-12);

        let mut shuffled = mesh.clone();
        shuffled.triangles.reverse();
        assert_relative_eq!(landmark_position(&shuffled, 1).unwrap(), base, epsilon = 1e-12);
    }
}
