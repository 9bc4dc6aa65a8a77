//! Synthetic phantom hearts built from tessellated ellipsoids.
//!
//! The phantom stands in for CT-derived models: every structure is a closed
//! ellipsoid surface, all phantoms share one topology (so they are
//! corresponded by construction), and a population is produced by jittering
//! centres and radii with a seeded RNG.

use crate::anatomy::{Label, LabeledMesh};
use crate::rng::stream_rng;
use nalgebra::{Point3, Rotation3, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, PI};

/// Latitude/longitude tessellation of an ellipsoid.
#[derive(Debug, Clone, Copy)]
pub struct Tessellation {
    pub rings: usize,
    pub segments: usize,
}

impl Tessellation {
    pub const fn vertex_count(&self) -> usize {
        2 + (self.rings - 1) * self.segments
    }

    pub const fn triangle_count(&self) -> usize {
        2 * self.segments * (self.rings - 1)
    }

    /// Vertex index (relative to the ellipsoid) of ring `k` (1..rings), segment `j`.
    pub const fn ring_vertex(&self, k: usize, j: usize) -> usize {
        1 + (k - 1) * self.segments + j % self.segments
    }

    pub const fn north_pole(&self) -> usize {
        0
    }

    pub const fn south_pole(&self) -> usize {
        self.vertex_count() - 1
    }
}

/// Appends an ellipsoid surface to the vertex/triangle buffers.
///
/// The polar axis is `rotation * z`; radii are along the rotated local axes.
/// Returns the index of the first appended vertex.
pub fn push_ellipsoid(
    vertices: &mut Vec<Point3<f64>>,
    triangles: &mut Vec<[usize; 3]>,
    center: Point3<f64>,
    radii: Vector3<f64>,
    rotation: &Rotation3<f64>,
    tess: Tessellation,
) -> usize {
    let base = vertices.len();
    let local = |theta: f64, phi: f64| {
        Vector3::new(
            radii.x * theta.sin() * phi.cos(),
            radii.y * theta.sin() * phi.sin(),
            radii.z * theta.cos(),
        )
    };
    vertices.push(center + rotation * Vector3::new(0.0, 0.0, radii.z));
    for k in 1..tess.rings {
        let theta = PI * k as f64 / tess.rings as f64;
        for j in 0..tess.segments {
            let phi = 2.0 * PI * j as f64 / tess.segments as f64;
            vertices.push(center + rotation * local(theta, phi));
        }
    }
    vertices.push(center + rotation * Vector3::new(0.0, 0.0, -radii.z));

    let ring = |k: usize, j: usize| base + tess.ring_vertex(k, j);
    let south = base + tess.south_pole();
    for j in 0..tess.segments {
        triangles.push([base, ring(1, j), ring(1, j + 1)]);
    }
    for k in 1..tess.rings - 1 {
        for j in 0..tess.segments {
            triangles.push([ring(k, j), ring(k + 1, j), ring(k + 1, j + 1)]);
            triangles.push([ring(k, j), ring(k + 1, j + 1), ring(k, j + 1)]);
        }
    }
    for j in 0..tess.segments {
        triangles.push([ring(tess.rings - 1, j), south, ring(tess.rings - 1, j + 1)]);
    }
    base
}

/// Single-structure ellipsoid mesh with its polar axis along world z.
pub fn ellipsoid_mesh(
    center: Point3<f64>,
    radii: Vector3<f64>,
    tess: Tessellation,
    label: Label,
    name: &str,
) -> LabeledMesh {
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    push_ellipsoid(&mut vertices, &mut triangles, center, radii, &Rotation3::identity(), tess);
    let n = triangles.len();
    LabeledMesh::new(
        name,
        vertices,
        triangles,
        vec![label; n],
        BTreeMap::from([(label, name.to_string())]),
    )
    .expect("ellipsoid mesh is valid by construction")
}

pub fn sphere_mesh(center: Point3<f64>, radius: f64, tess: Tessellation, label: Label) -> LabeledMesh {
    ellipsoid_mesh(center, Vector3::repeat(radius), tess, label, "sphere")
}

/// Axis-aligned unit cube `[0,1]^3`, 12 triangles, one label.
pub fn unit_cube(label: Label) -> LabeledMesh {
    let vertices = (0..8)
        .map(|i| Point3::new((i & 1) as f64, ((i >> 1) & 1) as f64, ((i >> 2) & 1) as f64))
        .collect();
    let triangles = vec![
        [0, 2, 1], [1, 2, 3],
        [4, 5, 6], [5, 7, 6],
        [0, 1, 4], [1, 5, 4],
        [2, 6, 3], [3, 6, 7],
        [0, 4, 2], [2, 4, 6],
        [1, 3, 5], [3, 7, 5],
    ];
    LabeledMesh::new(
        "unit_cube",
        vertices,
        triangles,
        vec![label; 12],
        BTreeMap::from([(label, "box".to_string())]),
    )
    .expect("cube is valid")
}

// ---------------------------------------------------------------------------
// Phantom heart

pub const LV_MYOCARDIUM: Label = 1;
pub const LV_BLOOD: Label = 2;
pub const RV_BLOOD: Label = 3;
pub const LA_BLOOD: Label = 4;
pub const RA_BLOOD: Label = 5;
pub const MITRAL_VALVE: Label = 6;
pub const TRICUSPID_VALVE: Label = 7;
pub const AORTIC_VALVE: Label = 8;
pub const PULMONARY_VALVE: Label = 9;
pub const AORTA: Label = 10;
pub const PULMONARY_ARTERY: Label = 11;
pub const SVC: Label = 12;
pub const IVC: Label = 13;
pub const LEFT_PULMONARY_VEINS: Label = 14;
pub const RIGHT_PULMONARY_VEINS: Label = 15;
pub const DESCENDING_AORTA: Label = 16;
pub const LEFT_ATRIAL_APPENDAGE: Label = 17;

struct StructureTemplate {
    label: Label,
    name: &'static str,
    center: [f64; 3],
    radii: [f64; 3],
}

// Coordinates in mm. +y runs from the LV apex towards the base and great
// vessels, +x towards the patient's left, +z anterior.
const TEMPLATE: &[StructureTemplate] = &[
    StructureTemplate { label: LV_MYOCARDIUM, name: "lv_myocardium", center: [22.0, -18.0, 0.0], radii: [24.0, 40.0, 24.0] },
    StructureTemplate { label: LV_BLOOD, name: "lv_blood", center: [22.0, -15.0, 0.0], radii: [15.0, 32.0, 15.0] },
    StructureTemplate { label: RV_BLOOD, name: "rv_blood", center: [-17.0, -10.0, 4.0], radii: [14.0, 30.0, 18.0] },
    StructureTemplate { label: LA_BLOOD, name: "la_blood", center: [22.0, 36.0, -4.0], radii: [18.0, 14.0, 18.0] },
    StructureTemplate { label: RA_BLOOD, name: "ra_blood", center: [-19.0, 36.0, 0.0], radii: [16.0, 14.0, 16.0] },
    StructureTemplate { label: MITRAL_VALVE, name: "mitral_valve", center: [22.0, 20.0, -1.0], radii: [14.0, 2.5, 14.0] },
    StructureTemplate { label: TRICUSPID_VALVE, name: "tricuspid_valve", center: [-18.0, 21.0, 1.0], radii: [13.0, 2.5, 13.0] },
    StructureTemplate { label: AORTIC_VALVE, name: "aortic_valve", center: [4.0, 22.0, 14.0], radii: [9.0, 2.0, 9.0] },
    StructureTemplate { label: PULMONARY_VALVE, name: "pulmonary_valve", center: [-8.0, 26.0, 30.0], radii: [9.0, 2.0, 9.0] },
    StructureTemplate { label: AORTA, name: "aorta", center: [4.0, 46.0, 16.0], radii: [12.0, 22.0, 12.0] },
    StructureTemplate { label: PULMONARY_ARTERY, name: "pulmonary_artery", center: [-8.0, 47.0, 32.0], radii: [11.0, 20.0, 11.0] },
    StructureTemplate { label: SVC, name: "svc", center: [-21.0, 64.0, -2.0], radii: [8.0, 18.0, 8.0] },
    StructureTemplate { label: IVC, name: "ivc", center: [-22.0, 14.0, -22.0], radii: [9.0, 20.0, 9.0] },
    StructureTemplate { label: LEFT_PULMONARY_VEINS, name: "left_pulmonary_veins", center: [44.0, 38.0, -14.0], radii: [16.0, 6.0, 6.0] },
    StructureTemplate { label: RIGHT_PULMONARY_VEINS, name: "right_pulmonary_veins", center: [2.0, 38.0, -20.0], radii: [14.0, 6.0, 6.0] },
    StructureTemplate { label: DESCENDING_AORTA, name: "descending_aorta", center: [14.0, 10.0, -40.0], radii: [10.0, 50.0, 10.0] },
    StructureTemplate { label: LEFT_ATRIAL_APPENDAGE, name: "left_atrial_appendage", center: [40.0, 40.0, 12.0], radii: [8.0, 6.0, 7.0] },
];

/// Tessellation used for every phantom structure.
pub const PHANTOM_TESSELLATION: Tessellation = Tessellation { rings: 16, segments: 32 };

/// Anchors: (name, structure label, ring, segment). Ring 0 is the north pole.
/// Structures are built with their polar axis along world -y, so the north
/// pole is the apical end and local x/y map to world x/z.
const ANCHORS: &[(&str, Label, usize, usize)] = &[
    ("lv_apex", LV_MYOCARDIUM, 0, 0),
    ("lv_apical_a", LV_BLOOD, 5, 0),
    ("lv_apical_b", LV_BLOOD, 5, 11),
    ("lv_apical_c", LV_BLOOD, 5, 21),
    ("lv_mid_a", LV_BLOOD, 8, 0),
    ("lv_mid_b", LV_BLOOD, 8, 11),
    ("lv_mid_c", LV_BLOOD, 8, 21),
    ("lv_base_a", LV_BLOOD, 11, 0),
    ("lv_base_b", LV_BLOOD, 11, 11),
    ("lv_base_c", LV_BLOOD, 11, 21),
    ("mv_anterior", MITRAL_VALVE, 8, 8),
    ("mv_posterior", MITRAL_VALVE, 8, 24),
    ("av_ring_a", AORTIC_VALVE, 8, 0),
    ("av_ring_b", AORTIC_VALVE, 8, 11),
    ("av_ring_c", AORTIC_VALVE, 8, 21),
    ("ao_mid_a", AORTA, 8, 0),
    ("ao_mid_b", AORTA, 8, 11),
    ("ao_mid_c", AORTA, 8, 21),
    ("desc_ao_a", DESCENDING_AORTA, 8, 0),
    ("desc_ao_b", DESCENDING_AORTA, 8, 11),
    ("desc_ao_c", DESCENDING_AORTA, 8, 21),
    ("desc_ao_top", DESCENDING_AORTA, 16, 0),
    ("desc_ao_bottom", DESCENDING_AORTA, 0, 0),
];

/// Per-phantom record written alongside the fixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomRecord {
    pub model_id: String,
    pub vertex_count: usize,
    pub triangles_per_structure: BTreeMap<String, usize>,
}

/// Shape jitter applied per phantom of a population.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PhantomVariation {
    /// Global scale drawn from `[1 - s, 1 + s]`.
    pub global_scale: f64,
    /// Per-structure centre jitter (mm), uniform per axis.
    pub center_jitter: f64,
    /// Per-structure radius scale drawn from `[1 - r, 1 + r]`.
    pub radius_scale: f64,
}

impl Default for PhantomVariation {
    fn default() -> Self {
        Self {
            global_scale: 0.08,
            center_jitter: 1.5,
            radius_scale: 0.06,
        }
    }
}

/// Builds the mean (unjittered) phantom heart.
pub fn phantom_heart(model_id: &str) -> (LabeledMesh, PhantomRecord) {
    build_phantom(model_id, |_, c, r| (c, r))
}

/// Builds `count` jittered phantoms; phantom `i` uses RNG stream `i`.
pub fn phantom_population(
    count: usize,
    seed: u64,
    variation: PhantomVariation,
) -> Vec<(LabeledMesh, PhantomRecord)> {
    (0..count)
        .map(|i| {
            let mut rng = stream_rng(seed, i as u64);
            let scale = 1.0 + rng.random_range(-variation.global_scale..=variation.global_scale);
            let jitters: Vec<(Vector3<f64>, f64)> = TEMPLATE
                .iter()
                .map(|_| {
                    let j = variation.center_jitter;
                    let c = Vector3::new(
                        rng.random_range(-j..=j),
                        rng.random_range(-j..=j),
                        rng.random_range(-j..=j),
                    );
                    let r = 1.0 + rng.random_range(-variation.radius_scale..=variation.radius_scale);
                    (c, r)
                })
                .collect();
            build_phantom(&format!("phantom_{i:03}"), |k, c, r| {
                let (dc, dr) = jitters[k];
                (Point3::from(c.coords * scale + dc), r * scale * dr)
            })
        })
        .collect()
}

fn build_phantom(
    model_id: &str,
    adjust: impl Fn(usize, Point3<f64>, Vector3<f64>) -> (Point3<f64>, Vector3<f64>),
) -> (LabeledMesh, PhantomRecord) {
    let tess = PHANTOM_TESSELLATION;
    // Maps local z (the polar axis) to world -y and local y to world z.
    let rotation = Rotation3::from_axis_angle(&Vector3::x_axis(), FRAC_PI_2);
    let mut vertices = Vec::new();
    let mut triangles = Vec::new();
    let mut labels = Vec::new();
    let mut names = BTreeMap::new();
    let mut bases = BTreeMap::new();
    for (k, s) in TEMPLATE.iter().enumerate() {
        let (center, world_radii) = adjust(k, Point3::from(s.center), Vector3::from(s.radii));
        let local_radii = Vector3::new(world_radii.x, world_radii.z, world_radii.y);
        let before = triangles.len();
        let base = push_ellipsoid(&mut vertices, &mut triangles, center, local_radii, &rotation, tess);
        labels.extend(std::iter::repeat_n(s.label, triangles.len() - before));
        names.insert(s.label, s.name.to_string());
        bases.insert(s.label, base);
    }
    let anchors = ANCHORS
        .iter()
        .map(|&(name, label, ring, seg)| {
            let local = match ring {
                0 => tess.north_pole(),
                r if r == tess.rings => tess.south_pole(),
                r => tess.ring_vertex(r, seg),
            };
            (name.to_string(), bases[&label] + local)
        })
        .collect();
    let mesh = LabeledMesh {
        model_id: model_id.to_string(),
        vertices,
        triangles,
        structure_of_triangle: labels,
        structure_names: names,
        anchors,
        pre_aligned: true,
    };
    mesh.validate().expect("phantom is valid by construction");
    let record = PhantomRecord {
        model_id: model_id.to_string(),
        vertex_count: mesh.vertices.len(),
        triangles_per_structure: TEMPLATE
            .iter()
            .map(|s| (s.name.to_string(), tess.triangle_count()))
            .collect(),
    };
    (mesh, record)
}
