//! Mesh/plane intersection and contour chaining.

use super::{LabelMap, RasterSpec, SlicePlane, ViewError};
use crate::anatomy::{Label, LabeledMesh};
use nalgebra::Point3;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};

/// Segment endpoints closer than this (mm) are the same contour vertex.
pub const CHAIN_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StructureSlice {
    pub label: Label,
    pub name: String,
    pub segments: usize,
    pub closed_loops: usize,
    pub open_chains: usize,
    /// Pixel area after overlap resolution.
    pub area_mm2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceReport {
    pub model_id: String,
    pub plane: SlicePlane,
    pub structures: Vec<StructureSlice>,
    pub warnings: Vec<String>,
}

/// Intersects every structure with the plane, chains the segments into
/// closed contours and rasterizes them with the even-odd rule.
///
/// Structures are painted in ascending label order, then the `priority`
/// labels in list order, so later priority entries win on overlap.
pub fn slice_mesh(
    mesh: &LabeledMesh,
    plane: &SlicePlane,
    raster: &RasterSpec,
    priority: &[Label],
) -> Result<(LabelMap, SliceReport), ViewError> {
    if raster.width == 0 || raster.height == 0 || !(raster.spacing_mm > 0.0) {
        return Err(ViewError::EmptyRaster);
    }
    let mut map = LabelMap::background(raster, mesh.structure_names.clone());
    let mut report = SliceReport {
        model_id: mesh.model_id.clone(),
        plane: *plane,
        structures: Vec::new(),
        warnings: Vec::new(),
    };

    let prioritized: BTreeSet<Label> = priority.iter().copied().collect();
    let order: Vec<Label> = mesh
        .structure_names
        .keys()
        .copied()
        .filter(|l| !prioritized.contains(l))
        .chain(priority.iter().copied())
        .collect();

    let distances: Vec<f64> = mesh.vertices.iter().map(|p| plane.signed_distance(p)).collect();
    for label in order {
        let segments = structure_segments(mesh, &distances, plane, label);
        if segments.is_empty() {
            continue;
        }
        let chains = chain_segments(&segments);
        let name = mesh.name_of(label);
        if chains.open > 0 {
            report.warnings.push(format!(
                "{name}: {} open contour(s) discarded",
                chains.open
            ));
        }
        map.fill_even_odd(&chains.loops, label);
        report.structures.push(StructureSlice {
            label,
            name,
            segments: segments.len(),
            closed_loops: chains.loops.len(),
            open_chains: chains.open,
            area_mm2: 0.0,
        });
    }
    for s in &mut report.structures {
        s.area_mm2 = map.area_mm2(s.label);
    }
    report.structures.sort_by_key(|s| s.label);
    Ok((map, report))
}

/// Crossing point on edge (a, b). Endpoints are ordered canonically so the
/// two triangles sharing an edge produce bit-identical points.
fn edge_crossing(pa: &Point3<f64>, da: f64, pb: &Point3<f64>, db: f64) -> Point3<f64> {
    let ((p, dp), (q, dq)) = if (pa.x, pa.y, pa.z) <= (pb.x, pb.y, pb.z) {
        ((pa, da), (pb, db))
    } else {
        ((pb, db), (pa, da))
    };
    if dp == 0.0 {
        return *p;
    }
    if dq == 0.0 {
        return *q;
    }
    let t = dp / (dp - dq);
    p + (q - p) * t
}

fn structure_segments(
    mesh: &LabeledMesh,
    distances: &[f64],
    plane: &SlicePlane,
    label: Label,
) -> Vec<[[f64; 2]; 2]> {
    let mut out = Vec::new();
    for (tri, _) in mesh
        .triangles
        .iter()
        .zip(&mesh.structure_of_triangle)
        .filter(|(_, &l)| l == label)
    {
        let d = tri.map(|i| distances[i]);
        // Points exactly on the plane count as above it.
        let above = d.map(|x| x >= 0.0);
        if above[0] == above[1] && above[1] == above[2] {
            continue;
        }
        let mut ends = [[0.0; 2]; 2];
        let mut k = 0;
        for (i, j) in [(0, 1), (1, 2), (2, 0)] {
            if above[i] != above[j] {
                let p = edge_crossing(&mesh.vertices[tri[i]], d[i], &mesh.vertices[tri[j]], d[j]);
                ends[k] = plane.to_plane_coords(&p);
                k += 1;
            }
        }
        debug_assert_eq!(k, 2);
        let len = ((ends[0][0] - ends[1][0]).powi(2) + (ends[0][1] - ends[1][1]).powi(2)).sqrt();
        if len > CHAIN_TOLERANCE {
            out.push(ends);
        }
    }
    out
}

struct Chains {
    loops: Vec<Vec<[f64; 2]>>,
    open: usize,
}

/// Welds segment endpoints within [`CHAIN_TOLERANCE`] and walks closed loops.
fn chain_segments(segments: &[[[f64; 2]; 2]]) -> Chains {
    let mut nodes: Vec<[f64; 2]> = Vec::new();
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    let cell = |p: [f64; 2]| {
        (
            (p[0] / CHAIN_TOLERANCE).floor() as i64,
            (p[1] / CHAIN_TOLERANCE).floor() as i64,
        )
    };
    let mut node_of = |p: [f64; 2]| -> usize {
        let (cx, cy) = cell(p);
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(ids) = grid.get(&(cx + dx, cy + dy)) {
                    for &id in ids {
                        let q = nodes[id];
                        if (p[0] - q[0]).hypot(p[1] - q[1]) <= CHAIN_TOLERANCE {
                            return id;
                        }
                    }
                }
            }
        }
        nodes.push(p);
        grid.entry((cx, cy)).or_default().push(nodes.len() - 1);
        nodes.len() - 1
    };

    let edges: Vec<[usize; 2]> = segments.iter().map(|[a, b]| [node_of(*a), node_of(*b)]).collect();
    let mut incident: HashMap<usize, Vec<usize>> = HashMap::new();
    for (e, [a, b]) in edges.iter().enumerate() {
        incident.entry(*a).or_default().push(e);
        incident.entry(*b).or_default().push(e);
    }

    let mut used = vec![false; edges.len()];
    let mut loops = Vec::new();
    let mut open = 0;
    for start_edge in 0..edges.len() {
        if used[start_edge] {
            continue;
        }
        used[start_edge] = true;
        let [start, mut current] = edges[start_edge];
        let mut path = vec![start, current];
        let closed = loop {
            if current == start {
                break true;
            }
            let next = incident[&current].iter().copied().find(|&e| !used[e]);
            match next {
                Some(e) => {
                    used[e] = true;
                    let [a, b] = edges[e];
                    current = if a == current { b } else { a };
                    path.push(current);
                }
                None => break false,
            }
        };
        if closed {
            if path.len() >= 4 {
                path.pop();
                loops.push(path.into_iter().map(|n| nodes[n]).collect());
            }
            continue;
        }
        // Consume the other half of the open chain so it is counted once.
        let mut current = start;
        while let Some(e) = incident[&current].iter().copied().find(|&e| !used[e]) {
            used[e] = true;
            let [a, b] = edges[e];
            current = if a == current { b } else { a };
        }
        open += 1;
    }
    Chains { loops, open }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::{sphere_mesh, unit_cube, Tessellation};
    use nalgebra::Vector3;
    use std::f64::consts::PI;

    const FINE: Tessellation = Tessellation { rings: 64, segments: 128 };

    fn xy_plane(z: f64) -> SlicePlane {
        SlicePlane::new(Point3::new(0.0, 0.0, z), Vector3::z(), Vector3::x())
    }

    #[test]
    fn plane_missing_sphere_is_background() {
        let sphere = sphere_mesh(Point3::origin(), 5.0, FINE, 1);
        let raster = RasterSpec { width: 64, height: 64, spacing_mm: 0.25 };
        let (map, report) = slice_mesh(&sphere, &xy_plane(10.0), &raster, &[]).unwrap();
        assert!(map.labels.iter().all(|&l| l == 0));
        assert!(report.structures.is_empty());
    }

    #[test]
    fn sphere_equator_area() {
        let sphere = sphere_mesh(Point3::origin(), 5.0, FINE, 1);
        let raster = RasterSpec { width: 128, height: 128, spacing_mm: 0.1 };
        let (map, report) = slice_mesh(&sphere, &xy_plane(0.0), &raster, &[]).unwrap();
        let area = map.area_mm2(1);
        let exact = PI * 25.0;
        assert!((area - exact).abs() / exact < 0.02, "area {area}");
        assert_eq!(report.structures[0].closed_loops, 1);
        assert!(report.warnings.is_empty());
    }

    #[test]
    fn cube_mid_slice_is_unit_square() {
        let cube = unit_cube(4);
        let plane = SlicePlane::new(Point3::new(0.5, 0.5, 0.5), Vector3::z(), Vector3::x());
        let raster = RasterSpec { width: 200, height: 200, spacing_mm: 0.01 };
        let (map, _) = slice_mesh(&cube, &plane, &raster, &[]).unwrap();
        assert!((map.area_mm2(4) - 1.0).abs() < 0.02);
    }

    #[test]
    fn open_surface_warns() {
        let mut sphere = sphere_mesh(Point3::origin(), 5.0, Tessellation { rings: 8, segments: 16 }, 1);
        // Punch a hole that the equatorial slice crosses.
        let idx = sphere
            .triangles
            .iter()
            .position(|t| {
                let zs = t.map(|i| sphere.vertices[i].z);
                zs.iter().any(|&z| z > 0.01) && zs.iter().any(|&z| z < 0.01)
            })
            .unwrap();
        sphere.triangles.remove(idx);
        sphere.structure_of_triangle.remove(idx);
        let raster = RasterSpec { width: 64, height: 64, spacing_mm: 0.25 };
        let (map, report) = slice_mesh(&sphere, &xy_plane(0.01), &raster, &[]).unwrap();
        assert_eq!(report.structures[0].open_chains, 1);
        assert_eq!(report.warnings.len(), 1);
        assert_eq!(map.count(1), 0);
    }

    #[test]
    fn priority_decides_overlap() {
        let mut a = sphere_mesh(Point3::origin(), 4.0, Tessellation { rings: 16, segments: 32 }, 1);
        let b = sphere_mesh(Point3::new(2.0, 0.0, 0.0), 4.0, Tessellation { rings: 16, segments: 32 }, 2);
        let offset = a.vertices.len();
        a.vertices.extend(b.vertices);
        a.triangles.extend(b.triangles.iter().map(|t| t.map(|i| i + offset)));
        a.structure_of_triangle.extend(b.structure_of_triangle);
        a.structure_names.insert(2, "other".into());
        let raster = RasterSpec { width: 80, height: 80, spacing_mm: 0.2 };
        let centre_label = |prio: &[Label]| {
            let (map, _) = slice_mesh(&a, &xy_plane(0.0), &raster, prio).unwrap();
            // Pixel nearest (1, 0) lies in both discs.
            map.get(45, 40)
        };
        assert_eq!(centre_label(&[1, 2]), 2);
        assert_eq!(centre_label(&[2, 1]), 1);
    }

    #[test]
    fn vertices_on_plane_still_close() {
        // Diagonal plane x = y passes through four cube vertices; the section
        // is a sqrt(2) x 1 rectangle.
        let cube = unit_cube(1);
        let plane = SlicePlane::new(Point3::new(0.5, 0.5, 0.5), Vector3::new(1.0, -1.0, 0.0), Vector3::z());
        let raster = RasterSpec { width: 300, height: 300, spacing_mm: 0.01 };
        let (map, report) = slice_mesh(&cube, &plane, &raster, &[]).unwrap();
        assert!(report.warnings.is_empty());
        assert!((map.area_mm2(1) - 2f64.sqrt()).abs() < 0.03, "{}", map.area_mm2(1));
    }
}
