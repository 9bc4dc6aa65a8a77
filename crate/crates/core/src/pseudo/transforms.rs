use super::{angle_from, unit_from_degrees, ConeSpec, Palette, PseudoError, PseudoImage, Range, TransformParams};
use crate::view::LabelMap;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

/// Maps every label to its palette intensity.
pub fn render_intensities(map: &LabelMap, palette: &Palette, cone: ConeSpec) -> Result<PseudoImage, PseudoError> {
    let mut out = Vec::with_capacity(map.labels.len());
    for &l in &map.labels {
        let v = if l == 0 {
            palette.background
        } else {
            match palette.by_label.get(&l) {
                Some(&v) => v,
                None => {
                    return Err(PseudoError::MissingPalette {
                        label: l,
                        name: map.structure_names.get(&l).cloned().unwrap_or_default(),
                    })
                }
            }
        };
        out.push(v);
    }
    Ok(PseudoImage::new(map.width, map.height, out, cone))
}

/// Zeroes every pixel outside `cone`.
pub fn apply_cone(img: &mut PseudoImage, cone: ConeSpec) {
    let mask = cone.mask(img.width, img.height);
    for (v, inside) in img.intensities.iter_mut().zip(mask) {
        if !inside {
            *v = 0.0;
        }
    }
    img.cone = cone;
}

/// Normalised 1-D Gaussian of radius `ceil(4σ)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    if sigma <= 0.0 {
        return vec![1.0];
    }
    let r = (4.0 * sigma).ceil() as i64;
    let mut k: Vec<f64> = (-r..=r)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= sum);
    k
}

/// Half-sample symmetric boundary: `d c b a | a b c d | d c b a`.
#[inline]
pub(crate) fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let m = i.rem_euclid(2 * n);
    (if m >= n { 2 * n - 1 - m } else { m }) as usize
}

/// Separable Gaussian blur with reflecting borders. `sigma == 0` is a no-op.
pub fn gaussian_blur(img: &mut PseudoImage, sigma: f64) {
    if sigma <= 0.0 {
        return;
    }
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let (w, h) = (img.width, img.height);
    let src = &img.intensities;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &src[y * w..(y + 1) * w];
        for x in 0..w {
            tmp[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(j, kw)| kw * row[reflect(x as i64 + j as i64 - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(j, kw)| kw * tmp[reflect(y as i64 + j as i64 - r, h) * w + x])
                .sum();
        }
    }
    img.intensities = out;
}

/// Multiplicative speckle plus additive Gaussian noise, clamped to `[0, 1]`.
/// Draws exactly two normals per pixel in row-major order.
pub fn add_noise(img: &mut PseudoImage, noise_std: f64, speckle_strength: f64, rng: &mut impl Rng) {
    let speckle = Normal::new(0.0, speckle_strength.max(0.0)).expect("finite std");
    let noise = Normal::new(0.0, noise_std.max(0.0)).expect("finite std");
    for v in &mut img.intensities {
        let s = speckle.sample(rng);
        let g = noise.sample(rng);
        *v = (*v * (1.0 + s) + g).clamp(0.0, 1.0);
    }
}

/// Fraction of the wedge width given to the cosine taper on each edge.
pub const SHADOW_FALLOFF_FRACTION: f64 = 0.2;

/// Angular wedge from the cone apex whose pixels are darkened.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShadowSpec {
    /// Absolute image angle of the wedge centre, same convention as the
    /// cone orientation.
    pub center_deg: f64,
    pub half_width_deg: f64,
    /// Multiplier applied in the wedge core, in `[0, 1]`.
    pub attenuation: f64,
}

impl ShadowSpec {
    /// Multiplier for a pixel at angular distance `delta` (degrees) from
    /// the wedge centre line.
    pub fn factor(&self, delta: f64) -> f64 {
        let hw = self.half_width_deg;
        let delta = delta.abs();
        if delta >= hw {
            return 1.0;
        }
        let taper = SHADOW_FALLOFF_FRACTION * 2.0 * hw;
        let core = hw - taper;
        if delta <= core {
            return self.attenuation;
        }
        let t = (delta - core) / taper;
        self.attenuation + (1.0 - self.attenuation) * 0.5 * (1.0 - (std::f64::consts::PI * t).cos())
    }
}

/// Darkens the pixels inside one wedge; the apex pixel itself is left alone.
pub fn add_shadow(img: &mut PseudoImage, shadow: &ShadowSpec) {
    let axis = unit_from_degrees(shadow.center_deg);
    let [ax, ay] = img.cone.apex;
    let w = img.width;
    for (i, v) in img.intensities.iter_mut().enumerate() {
        let dx = (i % w) as f64 - ax;
        let dy = (i / w) as f64 - ay;
        if dx == 0.0 && dy == 0.0 {
            continue;
        }
        *v *= shadow.factor(angle_from(axis, dx, dy));
    }
}

pub fn apply_shadows(img: &mut PseudoImage, shadows: &[ShadowSpec]) {
    for s in shadows {
        add_shadow(img, s);
    }
}

/// Draws the wedge count and each wedge's position, width and strength.
pub fn sample_shadows(params: &TransformParams, cone: &ConeSpec, rng: &mut impl Rng) -> Vec<ShadowSpec> {
    let [lo, hi] = params.shadow_count;
    let n = if lo == hi { lo } else { rng.random_range(lo..=hi) };
    let centre = Range::new(
        cone.orientation_deg - cone.half_angle_deg,
        cone.orientation_deg + cone.half_angle_deg,
    );
    (0..n)
        .map(|_| ShadowSpec {
            center_deg: centre.sample(rng),
            half_width_deg: params.shadow_half_angle_deg.sample(rng),
            attenuation: params.shadow_attenuation.sample(rng),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use std::collections::BTreeMap;

    fn cone(w: usize, h: usize) -> ConeSpec {
        ConeSpec::default_for(w, h)
    }

    #[test]
    fn kernel_sums_to_one() {
        for sigma in [0.3, 1.0, 2.5, 7.0] {
            let k = gaussian_kernel(sigma);
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(k.len(), 2 * (4.0 * sigma).ceil() as usize + 1);
        }
    }

    #[test]
    fn reflect_boundary() {
        let idx: Vec<usize> = (-4..8).map(|i| reflect(i, 4)).collect();
        assert_eq!(idx, vec![3, 2, 1, 0, 0, 1, 2, 3, 3, 2, 1, 0]);
        assert_eq!(reflect(-1, 1), 0);
    }

    #[test]
    fn zero_sigma_is_identity() {
        let mut img = PseudoImage::new(3, 2, vec![0.1, 0.5, 0.9, 0.0, 1.0, 0.3], cone(3, 2));
        let before = img.clone();
        gaussian_blur(&mut img, 0.0);
        assert_eq!(img, before);
    }

    #[test]
    fn unknown_label_names_structure() {
        let mut names = BTreeMap::new();
        names.insert(4, "la_blood".to_string());
        let map = LabelMap {
            width: 2,
            height: 1,
            pixel_spacing: 1.0,
            origin_2d: [0.0, 0.0],
            labels: vec![0, 4],
            structure_names: names,
        };
        let palette = Palette { background: 0.0, by_label: BTreeMap::new() };
        let err = render_intensities(&map, &palette, cone(2, 1)).unwrap_err();
        assert!(err.to_string().contains("la_blood"));
    }

    #[test]
    fn shadow_profile() {
        let s = ShadowSpec { center_deg: 90.0, half_width_deg: 5.0, attenuation: 0.3 };
        assert_eq!(s.factor(0.0), 0.3);
        assert_eq!(s.factor(3.0), 0.3);
        assert_eq!(s.factor(5.0), 1.0);
        assert_eq!(s.factor(-7.0), 1.0);
        let mid = s.factor(4.0);
        assert!((mid - 0.65).abs() < 1e-12, "{mid}");
        let mut prev = 0.0;
        for i in 0..=100 {
            let f = s.factor(i as f64 * 0.06);
            assert!(f >= prev - 1e-15);
            prev = f;
        }
    }

    #[test]
    fn shadow_leaves_outside_wedge_unchanged() {
        let c = cone(64, 64);
        let mut img = PseudoImage::constant(64, 64, 0.8, c);
        let s = ShadowSpec { center_deg: 90.0, half_width_deg: 6.0, attenuation: 0.25 };
        add_shadow(&mut img, &s);
        // Straight below the apex: wedge core.
        assert!((img.get(31, 40) - 0.2).abs() < 1e-12);
        assert!((img.get(0, 60) - 0.8).abs() < 1e-15);
        assert!(img.intensities.iter().all(|&v| v <= 0.8 + 1e-15 && v >= 0.8 * 0.25 - 1e-15));
    }

    #[test]
    fn noise_stays_in_range_and_is_seeded() {
        let c = cone(32, 32);
        let mut a = PseudoImage::constant(32, 32, 0.5, c);
        let mut b = a.clone();
        add_noise(&mut a, 0.3, 0.5, &mut stream_rng(9, 0));
        add_noise(&mut b, 0.3, 0.5, &mut stream_rng(9, 0));
        assert_eq!(a, b);
        assert!(a.intensities.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn noise_std_matches() {
        // Mid-grey plus small additive noise only: sample std converges.
        let c = cone(256, 256);
        let mut img = PseudoImage::constant(256, 256, 0.5, c);
        add_noise(&mut img, 0.05, 0.0, &mut stream_rng(1, 0));
        let n = img.intensities.len() as f64;
        let mean = img.mean();
        let var = img.intensities.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var.sqrt() - 0.05).abs() < 0.05 * 0.02, "{}", var.sqrt());
    }

    #[test]
    fn shadow_sampling_respects_ranges() {
        let params = TransformParams::default();
        let c = cone(64, 64);
        let mut rng = stream_rng(4, 0);
        for _ in 0..200 {
            let s = sample_shadows(&params, &c, &mut rng);
            assert!(s.len() <= 2);
            for w in s {
                assert!((50.0..=130.0).contains(&w.center_deg));
                assert!(params.shadow_attenuation.contains(w.attenuation));
                assert!(params.shadow_half_angle_deg.contains(w.half_width_deg));
            }
        }
    }
}
