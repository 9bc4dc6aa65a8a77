//! Pseudo-image synthesis: intensity rendering of a label map followed by
//! blur, noise, acoustic shadows and the ultrasound cone mask.

mod pipeline;
mod transforms;

pub use pipeline::{generate_batch, generate_pseudo, PipelineSettings, PseudoOutput};
pub use transforms::{
    add_noise, add_shadow, apply_cone, apply_shadows, gaussian_blur, gaussian_kernel,
    render_intensities, sample_shadows, ShadowSpec, SHADOW_FALLOFF_FRACTION,
};

use crate::anatomy::Label;
use crate::view::{LabelMap, ViewError};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PseudoError {
    #[error("no palette entry for structure {label} (`{name}`)")]
    MissingPalette { label: Label, name: String },
    #[error("invalid cone: {0}")]
    InvalidCone(String),
    #[error("invalid transform parameters: {0}")]
    InvalidParams(String),
    #[error("view `{view}` unobtainable on `{model_id}` after {attempts} attempts: `{structure}` covers {area_mm2:.1} mm² < {required_mm2:.1} mm²")]
    ViewUnobtainable {
        view: String,
        model_id: String,
        attempts: usize,
        structure: String,
        area_mm2: f64,
        required_mm2: f64,
    },
    #[error(transparent)]
    View(#[from] ViewError),
}

/// Annular sector of valid ultrasound pixels, in pixel coordinates
/// (x to the right, y down; pixel `(i, j)` has its centre at `(i, j)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeSpec {
    pub apex: [f64; 2],
    pub half_angle_deg: f64,
    pub r_min: f64,
    pub r_max: f64,
    /// Direction of the cone axis; 90° points down the image.
    pub orientation_deg: f64,
}

impl ConeSpec {
    /// Sector hanging from the top centre of a `width × height` image.
    pub fn default_for(width: usize, height: usize) -> Self {
        Self {
            apex: [(width as f64 - 1.0) / 2.0, 0.0],
            half_angle_deg: 40.0,
            r_min: height as f64 * 0.03,
            r_max: height as f64 * 0.96,
            orientation_deg: 90.0,
        }
    }

    pub fn validate(&self) -> Result<(), PseudoError> {
        if !(self.half_angle_deg > 0.0 && self.half_angle_deg < 90.0) {
            return Err(PseudoError::InvalidCone(format!(
                "half angle {} must lie in (0, 90)",
                self.half_angle_deg
            )));
        }
        if !(self.r_min >= 0.0 && self.r_min < self.r_max) {
            return Err(PseudoError::InvalidCone(format!(
                "radii must satisfy 0 <= r_min < r_max (got {} and {})",
                self.r_min, self.r_max
            )));
        }
        if !(self.apex.iter().all(|c| c.is_finite()) && self.orientation_deg.is_finite()) {
            return Err(PseudoError::InvalidCone("non-finite apex or orientation".into()));
        }
        Ok(())
    }

    /// Unit axis direction, with exact components at multiples of 90°.
    pub fn axis(&self) -> [f64; 2] {
        unit_from_degrees(self.orientation_deg)
    }

    /// `(radius, signed angular offset from the axis in degrees)` of a point.
    pub fn polar(&self, x: f64, y: f64) -> (f64, f64) {
        let dx = x - self.apex[0];
        let dy = y - self.apex[1];
        let r = dx.hypot(dy);
        (r, angle_from(self.axis(), dx, dy))
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (r, offset) = self.polar(x, y);
        if r < self.r_min || r > self.r_max {
            return false;
        }
        r == 0.0 || offset.abs() <= self.half_angle_deg
    }

    /// Per-pixel inside/outside mask.
    pub fn mask(&self, width: usize, height: usize) -> Vec<bool> {
        (0..height)
            .flat_map(|y| (0..width).map(move |x| (x, y)))
            .map(|(x, y)| self.contains(x as f64, y as f64))
            .collect()
    }
}

pub(crate) fn unit_from_degrees(deg: f64) -> [f64; 2] {
    let snap = |v: f64| if v.abs() < 1e-15 { 0.0 } else { v };
    let rad = deg.to_radians();
    [snap(rad.cos()), snap(rad.sin())]
}

/// Signed angle (degrees) from `axis` to `(dx, dy)`.
pub(crate) fn angle_from(axis: [f64; 2], dx: f64, dy: f64) -> f64 {
    let dot = axis[0] * dx + axis[1] * dy;
    let cross = axis[0] * dy - axis[1] * dx;
    cross.atan2(dot).to_degrees()
}

/// Closed interval `[lo, hi]`, serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl From<[f64; 2]> for Range {
    fn from([lo, hi]: [f64; 2]) -> Self {
        Self { lo, hi }
    }
}

impl From<Range> for [f64; 2] {
    fn from(r: Range) -> Self {
        [r.lo, r.hi]
    }
}

impl Range {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn sample(&self, rng: &mut impl rand::Rng) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.random_range(self.lo..=self.hi)
        }
    }

    fn check(&self, name: &str, min: f64, max: f64) -> Result<(), PseudoError> {
        if !(self.lo.is_finite() && self.hi.is_finite() && self.lo <= self.hi) {
            return Err(PseudoError::InvalidParams(format!("{name}: need lo <= hi")));
        }
        if self.lo < min || self.hi > max {
            return Err(PseudoError::InvalidParams(format!(
                "{name}: must lie within [{min}, {max}]"
            )));
        }
        Ok(())
    }
}

/// Ranges the per-image transform parameters are drawn from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TransformParams {
    pub blur_sigma: Range,
    pub noise_std: Range,
    pub speckle_strength: Range,
    pub shadow_count: [u32; 2],
    pub shadow_attenuation: Range,
    pub shadow_half_angle_deg: Range,
}

impl Default for TransformParams {
    fn default() -> Self {
        Self {
            blur_sigma: Range::new(1.0, 3.0),
            noise_std: Range::new(0.01, 0.05),
            speckle_strength: Range::new(0.05, 0.3),
            shadow_count: [0, 2],
            shadow_attenuation: Range::new(0.2, 0.7),
            shadow_half_angle_deg: Range::new(2.0, 8.0),
        }
    }
}

impl TransformParams {
    pub fn validate(&self) -> Result<(), PseudoError> {
        self.blur_sigma.check("blur_sigma", 0.0, f64::INFINITY)?;
        self.noise_std.check("noise_std", 0.0, f64::INFINITY)?;
        self.speckle_strength.check("speckle_strength", 0.0, f64::INFINITY)?;
        self.shadow_attenuation.check("shadow_attenuation", 0.0, 1.0)?;
        self.shadow_half_angle_deg.check("shadow_half_angle_deg", 0.0, 90.0)?;
        if self.shadow_count[0] > self.shadow_count[1] {
            return Err(PseudoError::InvalidParams("shadow_count: need lo <= hi".into()));
        }
        Ok(())
    }
}

/// Structure-name → base intensity table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PaletteSpec {
    #[serde(default)]
    pub background: f64,
    pub intensities: BTreeMap<String, f64>,
}

pub const TISSUE_INTENSITY: f64 = 0.6;
pub const BLOOD_INTENSITY: f64 = 0.05;

impl PaletteSpec {
    /// Myocardium and valves bright, blood pools and vessel lumens dark.
    pub fn phantom_default() -> Self {
        Self::phantom_with(TISSUE_INTENSITY, BLOOD_INTENSITY)
    }

    pub fn phantom_with(tissue: f64, blood: f64) -> Self {
        let tissue_names = [
            "lv_myocardium",
            "mitral_valve",
            "tricuspid_valve",
            "aortic_valve",
            "pulmonary_valve",
        ];
        let blood_names = [
            "lv_blood",
            "rv_blood",
            "la_blood",
            "ra_blood",
            "aorta",
            "pulmonary_artery",
            "svc",
            "ivc",
            "left_pulmonary_veins",
            "right_pulmonary_veins",
            "descending_aorta",
            "left_atrial_appendage",
        ];
        let intensities = tissue_names
            .iter()
            .map(|n| (n.to_string(), tissue))
            .chain(blood_names.iter().map(|n| (n.to_string(), blood)))
            .collect();
        Self {
            background: 0.0,
            intensities,
        }
    }

    pub fn validate(&self) -> Result<(), PseudoError> {
        let ok = |v: f64| (0.0..=1.0).contains(&v);
        if !ok(self.background) || !self.intensities.values().all(|&v| ok(v)) {
            return Err(PseudoError::InvalidParams("palette values must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Resolves names against a label map's structure table. Structures
    /// without an entry are left out; rendering reports them if present.
    pub fn resolve(&self, map: &LabelMap) -> Palette {
        Palette {
            background: self.background,
            by_label: map
                .structure_names
                .iter()
                .filter_map(|(l, n)| self.intensities.get(n).map(|&v| (*l, v)))
                .collect(),
        }
    }
}

/// Label → intensity lookup used by [`render_intensities`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Palette {
    pub background: f64,
    pub by_label: BTreeMap<Label, f64>,
}

/// Every randomly drawn value of one pseudo-image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampledTransforms {
    pub rotation_deg: [f64; 2],
    pub attempts: usize,
    pub blur_sigma: f64,
    pub noise_std: f64,
    pub speckle_strength: f64,
    pub shadows: Vec<ShadowSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model_id: String,
    pub view_name: String,
    pub seed: u64,
    pub stream: u64,
    pub sampled: SampledTransforms,
    pub ranges: TransformParams,
    pub palette: PaletteSpec,
    pub cone: ConeSpec,
}

/// Grayscale image with intensities in `[0, 1]`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoImage {
    pub width: usize,
    pub height: usize,
    pub intensities: Vec<f64>,
    pub cone: ConeSpec,
    pub provenance: Option<Provenance>,
}

impl PseudoImage {
    pub fn new(width: usize, height: usize, intensities: Vec<f64>, cone: ConeSpec) -> Self {
        assert_eq!(intensities.len(), width * height, "pixel buffer size");
        Self {
            width,
            height,
            intensities,
            cone,
            provenance: None,
        }
    }

    pub fn constant(width: usize, height: usize, value: f64, cone: ConeSpec) -> Self {
        Self::new(width, height, vec![value; width * height], cone)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.intensities[y * self.width + x]
    }

    pub fn mean(&self) -> f64 {
        self.intensities.iter().sum::<f64>() / self.intensities.len() as f64
    }
}
