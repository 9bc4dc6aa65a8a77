use super::{Label, LabeledMesh};
use crate::rng::stream_rng;
use nalgebra::{DMatrix, DVector, Point3};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

/// Eigenvalues below this fraction of the largest are treated as noise.
pub const EIGEN_DROP_TOLERANCE: f64 = 1e-9;

/// Bound (in standard deviations) of the uniform batch-sampling law.
pub const DEFAULT_SAMPLE_RANGE: f64 = 2.0;

#[derive(Debug, Error)]
pub enum ShapeModelError {
    #[error("need at least 2 meshes to fit a shape model, got {0}")]
    TooFewMeshes(usize),
    #[error("mesh `{model_id}` (index {index}) does not share the reference topology: {reason}")]
    TopologyMismatch {
        index: usize,
        model_id: String,
        reason: String,
    },
    #[error("{given} coefficients given but the model has {available} modes")]
    TooManyCoefficients { given: usize, available: usize },
}

/// Connectivity shared by every mesh of a corresponded population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub vertex_count: usize,
    pub triangles: Vec<[usize; 3]>,
    pub structure_of_triangle: Vec<Label>,
    pub structure_names: BTreeMap<Label, String>,
    pub anchors: BTreeMap<String, usize>,
}

impl Topology {
    fn of(mesh: &LabeledMesh) -> Self {
        Self {
            vertex_count: mesh.vertices.len(),
            triangles: mesh.triangles.clone(),
            structure_of_triangle: mesh.structure_of_triangle.clone(),
            structure_names: mesh.structure_names.clone(),
            anchors: mesh.anchors.clone(),
        }
    }

    fn mismatch(&self, mesh: &LabeledMesh) -> Option<String> {
        if mesh.vertices.len() != self.vertex_count {
            return Some(format!(
                "{} vertices, expected {}",
                mesh.vertices.len(),
                self.vertex_count
            ));
        }
        if mesh.triangles != self.triangles {
            return Some("triangle connectivity differs".into());
        }
        if mesh.structure_of_triangle != self.structure_of_triangle {
            return Some("triangle structure labels differ".into());
        }
        if mesh.anchors != self.anchors {
            return Some("anchor vertices differ".into());
        }
        None
    }
}

/// PCA model over flattened vertex coordinates `[x0, y0, z0, x1, ...]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ShapeModel {
    pub mean_shape: Vec<f64>,
    /// Unit-norm principal directions, sorted by decreasing variance.
    pub modes: Vec<Vec<f64>>,
    pub mode_stddevs: Vec<f64>,
    pub topology: Topology,
    pub n_training: usize,
    pub pre_aligned: bool,
}

/// Fits a PCA shape model to corresponded meshes.
///
/// The covariance is normalised by the number of meshes, so a mode
/// coefficient of ±1 stddev on a two-mesh model lands on a training shape.
/// The decomposition runs on the `n × n` Gram matrix, which keeps the cost
/// independent of vertex count.
pub fn fit_shape_model(meshes: &[LabeledMesh]) -> Result<ShapeModel, ShapeModelError> {
    if meshes.len() < 2 {
        return Err(ShapeModelError::TooFewMeshes(meshes.len()));
    }
    let topology = Topology::of(&meshes[0]);
    for (index, mesh) in meshes.iter().enumerate().skip(1) {
        if let Some(reason) = topology.mismatch(mesh) {
            return Err(ShapeModelError::TopologyMismatch {
                index,
                model_id: mesh.model_id.clone(),
                reason,
            });
        }
    }

    let n = meshes.len();
    let dim = topology.vertex_count * 3;
    let data = DMatrix::from_fn(dim, n, |r, c| meshes[c].vertices[r / 3][r % 3]);
    let mean = data.column_mean();
    let mut centered = data;
    for mut col in centered.column_iter_mut() {
        col -= &mean;
    }

    let gram = (centered.transpose() * &centered) / n as f64;
    let eigen = gram.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));
    let largest = eigen.eigenvalues[order[0]];

    let mut modes: Vec<Vec<f64>> = Vec::new();
    let mut stddevs = Vec::new();
    if largest > 0.0 {
        for &k in order.iter().take(n - 1) {
            let lambda = eigen.eigenvalues[k];
            if lambda < EIGEN_DROP_TOLERANCE * largest {
                break;
            }
            let mut mode: DVector<f64> = &centered * eigen.eigenvectors.column(k);
            // Re-orthogonalise against earlier modes to absorb rounding.
            for prev in &modes {
                let prev = DVector::from_column_slice(prev);
                let proj = prev.dot(&mode);
                mode -= prev * proj;
            }
            let norm = mode.norm();
            if norm == 0.0 {
                continue;
            }
            mode /= norm;
            // Deterministic sign: the largest-magnitude component is positive.
            let imax = mode.iamax();
            if mode[imax] < 0.0 {
                mode.neg_mut();
            }
            modes.push(mode.as_slice().to_vec());
            stddevs.push(lambda.sqrt());
        }
    }

    Ok(ShapeModel {
        mean_shape: mean.as_slice().to_vec(),
        modes,
        mode_stddevs: stddevs,
        topology,
        n_training: n,
        pre_aligned: meshes.iter().all(|m| m.pre_aligned),
    })
}

impl ShapeModel {
    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    /// `mean + Σ c_i · σ_i · mode_i`, with coefficients in units of stddev.
    pub fn sample_shape(
        &self,
        coefficients: &[f64],
        model_id: impl Into<String>,
    ) -> Result<LabeledMesh, ShapeModelError> {
        if coefficients.len() > self.modes.len() {
            return Err(ShapeModelError::TooManyCoefficients {
                given: coefficients.len(),
                available: self.modes.len(),
            });
        }
        let mut flat = self.mean_shape.clone();
        for ((c, sd), mode) in coefficients.iter().zip(&self.mode_stddevs).zip(&self.modes) {
            let scale = c * sd;
            if scale == 0.0 {
                continue;
            }
            for (x, m) in flat.iter_mut().zip(mode) {
                *x += scale * m;
            }
        }
        Ok(self.mesh_from_flat(&flat, model_id.into()))
    }

    /// Coefficients (in stddev units) of a mesh's projection onto the modes.
    pub fn project(&self, mesh: &LabeledMesh) -> Result<Vec<f64>, ShapeModelError> {
        if let Some(reason) = self.topology.mismatch(mesh) {
            return Err(ShapeModelError::TopologyMismatch {
                index: 0,
                model_id: mesh.model_id.clone(),
                reason,
            });
        }
        Ok(self
            .modes
            .iter()
            .zip(&self.mode_stddevs)
            .map(|(mode, sd)| {
                let dot: f64 = mesh
                    .vertices
                    .iter()
                    .flat_map(|v| [v.x, v.y, v.z])
                    .zip(&self.mean_shape)
                    .zip(mode)
                    .map(|((x, m), d)| (x - m) * d)
                    .sum();
                dot / sd
            })
            .collect())
    }

    /// Draws `count` meshes with coefficients independently uniform in
    /// `[-range, +range]`. Sample `i` uses its own RNG stream, so the result
    /// does not depend on evaluation order.
    pub fn sample_population(&self, count: usize, seed: u64, range: f64) -> Vec<LabeledMesh> {
        (0..count)
            .map(|i| {
                let mut rng = stream_rng(seed, i as u64);
                let coeffs: Vec<f64> = (0..self.mode_count())
                    .map(|_| rng.random_range(-range..=range))
                    .collect();
                self.sample_shape(&coeffs, format!("ssm_{i:03}"))
                    .expect("coefficient count matches mode count")
            })
            .collect()
    }

    fn mesh_from_flat(&self, flat: &[f64], model_id: String) -> LabeledMesh {
        LabeledMesh {
            model_id,
            vertices: flat
                .chunks_exact(3)
                .map(|c| Point3::new(c[0], c[1], c[2]))
                .collect(),
            triangles: self.topology.triangles.clone(),
            structure_of_triangle: self.topology.structure_of_triangle.clone(),
            structure_names: self.topology.structure_names.clone(),
            anchors: self.topology.anchors.clone(),
            pre_aligned: self.pre_aligned,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::unit_cube;
    use nalgebra::Vector3;

    fn flat(mesh: &LabeledMesh) -> Vec<f64> {
        mesh.vertices.iter().flat_map(|v| [v.x, v.y, v.z]).collect()
    }

    fn deformed(scale: f64, shift: f64) -> LabeledMesh {
        let mut m = unit_cube(1);
        for v in &mut m.vertices {
            v.x *= scale;
            v.z += shift * v.y;
        }
        m
    }

    #[test]
    fn identical_meshes_have_no_modes() {
        let m = unit_cube(1);
        let model = fit_shape_model(&[m.clone(), m.clone()]).unwrap();
        assert_eq!(model.mode_count(), 0);
        assert_eq!(model.mean_shape, flat(&m));
    }

    #[test]
    fn two_mesh_closed_form() {
        let a = deformed(1.0, 0.0);
        let b = deformed(1.5, 0.3);
        let model = fit_shape_model(&[a.clone(), b.clone()]).unwrap();
        assert_eq!(model.mode_count(), 1);
        let (fa, fb) = (flat(&a), flat(&b));
        for ((m, x), y) in model.mean_shape.iter().zip(&fa).zip(&fb) {
            assert!((m - 0.5 * (x + y)).abs() < 1e-12);
        }
        let diff: Vec<f64> = fa.iter().zip(&fb).map(|(x, y)| x - y).collect();
        let norm = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
        let cos: f64 = diff.iter().zip(&model.modes[0]).map(|(d, m)| d * m).sum::<f64>() / norm;
        assert!((cos.abs() - 1.0).abs() < 1e-12);
        assert!((model.mode_stddevs[0] - norm / 2.0).abs() < 1e-12);

        for c in [1.0, -1.0] {
            let s = flat(&model.sample_shape(&[c], "s").unwrap());
            let err_a = s.iter().zip(&fa).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            let err_b = s.iter().zip(&fb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
            assert!(err_a.min(err_b) < 1e-12);
        }
    }

    #[test]
    fn zero_coefficients_give_mean() {
        let model = fit_shape_model(&[deformed(1.0, 0.0), deformed(2.0, 0.1), deformed(0.5, -0.4)]).unwrap();
        assert_eq!(flat(&model.sample_shape(&[], "m").unwrap()), model.mean_shape);
        assert_eq!(flat(&model.sample_shape(&[0.0, 0.0], "m").unwrap()), model.mean_shape);
    }

    #[test]
    fn too_many_coefficients() {
        let model = fit_shape_model(&[deformed(1.0, 0.0), deformed(2.0, 0.0)]).unwrap();
        assert!(matches!(
            model.sample_shape(&[0.0, 1.0], "x"),
            Err(ShapeModelError::TooManyCoefficients { given: 2, available: 1 })
        ));
    }

    #[test]
    fn topology_mismatch_names_mesh() {
        let a = unit_cube(1);
        let mut b = unit_cube(1);
        b.model_id = "odd_one".into();
        b.triangles.swap(0, 1);
        let err = fit_shape_model(&[a, b]).unwrap_err();
        assert!(err.to_string().contains("odd_one"));
        assert!(matches!(fit_shape_model(&[unit_cube(1)]), Err(ShapeModelError::TooFewMeshes(1))));
    }

    #[test]
    fn translation_only_population_is_one_mode() {
        let meshes: Vec<_> = [0.0, 1.0, 3.0]
            .iter()
            .map(|&t| unit_cube(1).translated(Vector3::new(t, 2.0 * t, 0.0)))
            .collect();
        let model = fit_shape_model(&meshes).unwrap();
        assert_eq!(model.mode_count(), 1);
    }

    #[test]
    fn population_is_seeded_and_distinct() {
        let model = fit_shape_model(&[deformed(1.0, 0.0), deformed(1.4, 0.2), deformed(0.8, -0.3)]).unwrap();
        let a = model.sample_population(99, 11, DEFAULT_SAMPLE_RANGE);
        let b = model.sample_population(99, 11, DEFAULT_SAMPLE_RANGE);
        assert_eq!(a, b);
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                assert_ne!(a[i].vertices, a[j].vertices);
            }
        }
        for m in &a {
            let c = model.project(m).unwrap();
            assert!(c.iter().all(|x| x.abs() <= 2.0 + 1e-9));
        }
    }
}
