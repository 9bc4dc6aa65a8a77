//! TEE view extraction: landmark-defined slice planes, random perturbation
//! about two perpendicular anatomical axes, and rasterized cross-sections.

mod catalog;
mod raster;
mod slice;

pub use catalog::{builtin_view, builtin_views, BUILTIN_VIEW_NAMES};
pub use raster::{LabelMap, RasterSpec};
pub use slice::{slice_mesh, SliceReport, StructureSlice};

use crate::anatomy::{Label, LabeledMesh, MeshError};
use nalgebra::{Point3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use thiserror::Error;

/// Minimum landmark triangle area (mm²) for a well-defined plane.
pub const MIN_PLANE_AREA: f64 = 1e-6;

/// Allowed deviation from perpendicular between the two rotation axes.
pub const AXIS_PERPENDICULAR_TOLERANCE_DEG: f64 = 15.0;

#[derive(Debug, Error)]
pub enum ViewError {
    #[error("degenerate plane: landmarks are collinear or coincident (area {area:.3e} mm²)")]
    DegeneratePlane { area: f64 },
    #[error("rotation axis must be a unit vector (norm {0})")]
    AxisNotUnit(f64),
    #[error("view `{view}`: {message}")]
    InvalidDefinition { view: String, message: String },
    #[error("view `{view}`: rotation axes are {angle_deg:.1}° apart, need 90 ± {AXIS_PERPENDICULAR_TOLERANCE_DEG}°")]
    AxesNotPerpendicular { view: String, angle_deg: f64 },
    #[error("raster dimensions must be positive")]
    EmptyRaster,
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("view `{name}`: {source}")]
    Parse {
        name: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("unknown view `{0}`")]
    UnknownView(String),
}

/// An oriented slice plane with an in-plane orthonormal basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlicePlane {
    pub origin: Point3<f64>,
    pub normal: Vector3<f64>,
    pub u: Vector3<f64>,
    pub v: Vector3<f64>,
}

impl SlicePlane {
    /// Builds a plane from an origin, normal and a direction that is
    /// projected into the plane to become `u`.
    pub fn new(origin: Point3<f64>, normal: Vector3<f64>, u_hint: Vector3<f64>) -> Self {
        let normal = normal.normalize();
        let u = (u_hint - normal * normal.dot(&u_hint)).normalize();
        let v = normal.cross(&u);
        Self { origin, normal, u, v }
    }

    pub fn signed_distance(&self, p: &Point3<f64>) -> f64 {
        (p - self.origin).dot(&self.normal)
    }

    pub fn to_plane_coords(&self, p: &Point3<f64>) -> [f64; 2] {
        let d = p - self.origin;
        [d.dot(&self.u), d.dot(&self.v)]
    }

    /// Largest deviation of (normal, u, v) from an orthonormal right-handed frame.
    pub fn orthonormality_error(&self) -> f64 {
        let norms = [self.normal.norm(), self.u.norm(), self.v.norm()]
            .map(|n| (n - 1.0).abs());
        let dots = [
            self.normal.dot(&self.u),
            self.normal.dot(&self.v),
            self.u.dot(&self.v),
        ]
        .map(f64::abs);
        let handed = (self.normal.cross(&self.u) - self.v).norm();
        norms.into_iter().chain(dots).fold(handed, f64::max)
    }
}

/// Plane through three landmarks, origin at their centroid and `u` along
/// `p2 - p1`.
pub fn plane_from_landmarks(
    p1: Point3<f64>,
    p2: Point3<f64>,
    p3: Point3<f64>,
) -> Result<SlicePlane, ViewError> {
    let e1 = p2 - p1;
    let cross = e1.cross(&(p3 - p1));
    let area = 0.5 * cross.norm();
    if !(area > MIN_PLANE_AREA) {
        return Err(ViewError::DegeneratePlane { area });
    }
    let origin = Point3::from((p1.coords + p2.coords + p3.coords) / 3.0);
    Ok(SlicePlane::new(origin, cross, e1))
}

/// Rotates a plane about the line through `axis_point` along `axis_dir`.
pub fn perturb_plane(
    plane: &SlicePlane,
    axis_point: Point3<f64>,
    axis_dir: Vector3<f64>,
    angle_deg: f64,
) -> Result<SlicePlane, ViewError> {
    let norm = axis_dir.norm();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(ViewError::AxisNotUnit(norm));
    }
    if angle_deg == 0.0 {
        return Ok(*plane);
    }
    let rot = Rotation3::from_axis_angle(&Unit::new_unchecked(axis_dir), angle_deg.to_radians());
    let origin = axis_point + rot * (plane.origin - axis_point);
    let normal = rot * plane.normal;
    let u = rot * plane.u;
    Ok(SlicePlane {
        origin,
        normal,
        u,
        v: normal.cross(&u),
    })
}

/// A standard view: which landmarks fix the plane, which axes it may be
/// tilted about, and what must be visible for the slice to count.
///
/// Landmarks are referenced by name: a mesh anchor vertex or a structure
/// whose area-weighted centroid is used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViewDefinition {
    pub view_name: String,
    pub plane_landmarks: [String; 3],
    /// Each axis is the line from the first landmark through the second.
    pub axis_landmarks: [[String; 2]; 2],
    /// Later entries win where structures overlap.
    pub required_structures: Vec<String>,
    pub min_visible_area_mm2: f64,
    /// Maximum |angle| in degrees for each axis.
    pub rotation_range_deg: [f64; 2],
}

impl ViewDefinition {
    pub fn from_json(name: &str, text: &str) -> Result<Self, ViewError> {
        let view: Self = serde_json::from_str(text).map_err(|source| ViewError::Parse {
            name: name.to_string(),
            source,
        })?;
        view.validate()?;
        Ok(view)
    }

    pub fn validate(&self) -> Result<(), ViewError> {
        let invalid = |message: &str| ViewError::InvalidDefinition {
            view: self.view_name.clone(),
            message: message.to_string(),
        };
        let distinct: BTreeSet<_> = self.plane_landmarks.iter().collect();
        if distinct.len() != 3 {
            return Err(invalid("plane landmarks must be three distinct structures"));
        }
        if self.axis_landmarks.iter().any(|[a, b]| a == b) {
            return Err(invalid("an axis needs two distinct landmarks"));
        }
        if self
            .rotation_range_deg
            .iter()
            .any(|r| !r.is_finite() || *r < 0.0)
        {
            return Err(invalid("rotation ranges must be finite and non-negative"));
        }
        if !(self.min_visible_area_mm2 >= 0.0) {
            return Err(invalid("min_visible_area_mm2 must be non-negative"));
        }
        Ok(())
    }

    /// Checks that the two rotation axes are perpendicular within tolerance
    /// on a reference mesh (normally the population mean).
    pub fn check_axes(&self, reference: &LabeledMesh) -> Result<f64, ViewError> {
        let [a, b] = self.raw_axes(reference)?;
        let angle = a.1.angle(&b.1).to_degrees();
        if (angle - 90.0).abs() > AXIS_PERPENDICULAR_TOLERANCE_DEG {
            return Err(ViewError::AxesNotPerpendicular {
                view: self.view_name.clone(),
                angle_deg: angle,
            });
        }
        Ok(angle)
    }

    fn raw_axes(&self, mesh: &LabeledMesh) -> Result<[(Point3<f64>, Vector3<f64>); 2], ViewError> {
        let mut out = [(Point3::origin(), Vector3::zeros()); 2];
        for (slot, [from, to]) in out.iter_mut().zip(&self.axis_landmarks) {
            let p = mesh.resolve_landmark(from)?;
            let q = mesh.resolve_landmark(to)?;
            let d = q - p;
            if d.norm() == 0.0 {
                return Err(ViewError::InvalidDefinition {
                    view: self.view_name.clone(),
                    message: format!("axis landmarks `{from}` and `{to}` coincide"),
                });
            }
            *slot = (p, d.normalize());
        }
        Ok(out)
    }

    /// Unperturbed plane on `mesh`.
    pub fn base_plane(&self, mesh: &LabeledMesh) -> Result<SlicePlane, ViewError> {
        let [p1, p2, p3] = [0, 1, 2].map(|i| mesh.resolve_landmark(&self.plane_landmarks[i]));
        plane_from_landmarks(p1?, p2?, p3?)
    }

    /// Plane tilted by `angles_deg[0]` about the first axis, then
    /// `angles_deg[1]` about the second. The second axis direction is made
    /// exactly perpendicular to the first.
    pub fn plane(&self, mesh: &LabeledMesh, angles_deg: [f64; 2]) -> Result<SlicePlane, ViewError> {
        let base = self.base_plane(mesh)?;
        let [(p1, d1), (p2, d2)] = self.raw_axes(mesh)?;
        let d2 = d2 - d1 * d1.dot(&d2);
        if d2.norm() < 1e-9 {
            return Err(ViewError::AxesNotPerpendicular {
                view: self.view_name.clone(),
                angle_deg: 0.0,
            });
        }
        let d2 = d2.normalize();
        let tilted = perturb_plane(&base, p1, d1, angles_deg[0])?;
        perturb_plane(&tilted, p2, d2, angles_deg[1])
    }

    /// Paint order for slicing: required structures, resolved to labels.
    pub fn priority(&self, mesh: &LabeledMesh) -> Vec<Label> {
        self.required_structures
            .iter()
            .filter_map(|n| mesh.label_of(n))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureVisibility {
    pub structure: String,
    pub area_mm2: f64,
    pub required_mm2: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub view_name: String,
    pub structures: Vec<StructureVisibility>,
    pub pass: bool,
}

impl ValidationReport {
    pub fn first_failure(&self) -> Option<&StructureVisibility> {
        self.structures.iter().find(|s| !s.pass)
    }
}

/// Checks that every required structure covers at least the configured area.
pub fn validate_view(map: &LabelMap, view: &ViewDefinition) -> ValidationReport {
    let structures: Vec<_> = view
        .required_structures
        .iter()
        .map(|name| {
            let area = map
                .label_of(name)
                .map(|l| map.area_mm2(l))
                .unwrap_or(0.0);
            StructureVisibility {
                structure: name.clone(),
                area_mm2: area,
                required_mm2: view.min_visible_area_mm2,
                pass: area >= view.min_visible_area_mm2,
            }
        })
        .collect();
    let pass = structures.iter().all(|s| s.pass);
    ValidationReport {
        view_name: view.view_name.clone(),
        structures,
        pass,
    }
}
