//! Handcrafted 56-value descriptor of an ultrasound-like image. A stand-in
//! for learned embeddings so distances can be computed without a network;
//! its scores are not comparable to Inception-based values.
//!
//! Layout (only pixels inside the cone contribute):
//!
//! | range   | content                                                       |
//! |---------|---------------------------------------------------------------|
//! | 0..32   | intensity histogram, 32 equal bins on [0, 1], sums to 1       |
//! | 32..40  | mean intensity in 8 equal radial bands from `r_min` to `r_max`|
//! | 40..48  | mean intensity in 8 equal angular sectors, left to right      |
//! | 48..52  | gradient magnitude: mean, std, median, 90th percentile        |
//! | 52..56  | 8-level co-occurrence contrast, homogeneity at (1,0) then (0,1)|
//!
//! Empty bands or sectors report 0.

use super::MetricsError;
use crate::pseudo::{ConeSpec, PseudoImage};

pub const FEATURE_DIM: usize = 56;
pub const HIST_BINS: usize = 32;
pub const RADIAL_BINS: usize = 8;
pub const ANGULAR_BINS: usize = 8;
pub const GLCM_LEVELS: usize = 8;

pub fn image_features(img: &PseudoImage) -> Result<Vec<f64>, MetricsError> {
    builtin_features(img.width, img.height, &img.intensities, &img.cone)
}

pub fn builtin_features(width: usize, height: usize, data: &[f64], cone: &ConeSpec) -> Result<Vec<f64>, MetricsError> {
    assert_eq!(data.len(), width * height, "pixel buffer size");
    let inside = cone.mask(width, height);
    let n_inside = inside.iter().filter(|&&b| b).count();
    if n_inside == 0 {
        return Err(MetricsError::EmptyCone);
    }
    let mut out = Vec::with_capacity(FEATURE_DIM);

    let mut hist = [0.0; HIST_BINS];
    for (v, _) in data.iter().zip(&inside).filter(|(_, &m)| m) {
        let b = ((v.clamp(0.0, 1.0) * HIST_BINS as f64) as usize).min(HIST_BINS - 1);
        hist[b] += 1.0;
    }
    out.extend(hist.iter().map(|c| c / n_inside as f64));

    let mut radial = [(0.0, 0usize); RADIAL_BINS];
    let mut angular = [(0.0, 0usize); ANGULAR_BINS];
    let band = (cone.r_max - cone.r_min) / RADIAL_BINS as f64;
    let half = ANGULAR_BINS / 2;
    for (i, (&v, _)) in data.iter().zip(&inside).enumerate().filter(|(_, (_, &m))| m) {
        let (r, offset) = cone.polar((i % width) as f64, (i / width) as f64);
        let rb = (((r - cone.r_min) / band) as usize).min(RADIAL_BINS - 1);
        radial[rb].0 += v;
        radial[rb].1 += 1;
        // Sector index from |offset| keeps mirror images exactly mirrored;
        // pixels on the axis count towards both central sectors.
        let k = ((offset.abs() / cone.half_angle_deg * half as f64) as usize).min(half - 1);
        let sectors: &[usize] = if offset > 0.0 {
            &[half + k]
        } else if offset < 0.0 {
            &[half - 1 - k]
        } else {
            &[half - 1, half]
        };
        for &s in sectors {
            angular[s].0 += v;
            angular[s].1 += 1;
        }
    }
    let bin_mean = |(sum, n): &(f64, usize)| if *n == 0 { 0.0 } else { sum / *n as f64 };
    out.extend(radial.iter().map(bin_mean));
    out.extend(angular.iter().map(bin_mean));

    let at = |x: usize, y: usize| y * width + x;
    let mut grads = Vec::new();
    for y in 1..height.saturating_sub(1) {
        for x in 1..width.saturating_sub(1) {
            let nb = [at(x - 1, y), at(x + 1, y), at(x, y - 1), at(x, y + 1)];
            if !inside[at(x, y)] || !nb.iter().all(|&j| inside[j]) {
                continue;
            }
            let gx = (data[nb[1]] - data[nb[0]]) * 0.5;
            let gy = (data[nb[3]] - data[nb[2]]) * 0.5;
            grads.push(gx.hypot(gy));
        }
    }
    out.extend(gradient_stats(&mut grads));

    for (dx, dy) in [(1usize, 0usize), (0, 1)] {
        out.extend(glcm_stats(width, height, data, &inside, dx, dy));
    }
    debug_assert_eq!(out.len(), FEATURE_DIM);
    Ok(out)
}

fn gradient_stats(g: &mut [f64]) -> [f64; 4] {
    if g.is_empty() {
        return [0.0; 4];
    }
    g.sort_by(f64::total_cmp);
    let n = g.len() as f64;
    let mean = g.iter().sum::<f64>() / n;
    let std = (g.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
    // Nearest-rank percentile.
    let pct = |p: f64| g[((p * n).ceil() as usize).clamp(1, g.len()) - 1];
    [mean, std, pct(0.5), pct(0.9)]
}

fn glcm_stats(width: usize, height: usize, data: &[f64], inside: &[bool], dx: usize, dy: usize) -> [f64; 2] {
    let level = |v: f64| ((v.clamp(0.0, 1.0) * GLCM_LEVELS as f64) as usize).min(GLCM_LEVELS - 1);
    let mut m = [[0.0; GLCM_LEVELS]; GLCM_LEVELS];
    let mut total = 0.0;
    for y in 0..height - dy {
        for x in 0..width - dx {
            let (a, b) = (y * width + x, (y + dy) * width + x + dx);
            if inside[a] && inside[b] {
                let (i, j) = (level(data[a]), level(data[b]));
                m[i][j] += 1.0;
                m[j][i] += 1.0;
                total += 2.0;
            }
        }
    }
    if total == 0.0 {
        return [0.0, 1.0];
    }
    let (mut contrast, mut homogeneity) = (0.0, 0.0);
    for (i, row) in m.iter().enumerate() {
        for (j, c) in row.iter().enumerate() {
            let p = c / total;
            let d = i.abs_diff(j) as f64;
            contrast += p * d * d;
            homogeneity += p / (1.0 + d);
        }
    }
    [contrast, homogeneity]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand::Rng;

    #[test]
    fn constant_image() {
        let cone = ConeSpec::default_for(64, 64);
        let f = builtin_features(64, 64, &vec![0.5; 64 * 64], &cone).unwrap();
        assert_eq!(f.len(), FEATURE_DIM);
        assert_eq!(f[16], 1.0);
        assert_eq!(f[..HIST_BINS].iter().filter(|&&v| v > 0.0).count(), 1);
        assert_eq!(&f[48..52], &[0.0; 4]);
        assert_eq!(f[52], 0.0);
        assert_eq!(f[53], 1.0);
    }

    #[test]
    fn mirror_symmetry() {
        let (w, h) = (65, 60);
        let cone = ConeSpec::default_for(w, h);
        let mut rng = stream_rng(2, 0);
        let img: Vec<f64> = (0..w * h).map(|_| rng.random::<f64>()).collect();
        let mirrored: Vec<f64> = (0..w * h).map(|i| img[(i / w) * w + (w - 1 - i % w)]).collect();
        let a = builtin_features(w, h, &img, &cone).unwrap();
        let b = builtin_features(w, h, &mirrored, &cone).unwrap();
        for i in 0..40 {
            assert!((a[i] - b[i]).abs() < 1e-12, "bin {i}");
        }
        for k in 0..ANGULAR_BINS {
            assert!((a[40 + k] - b[47 - k]).abs() < 1e-12, "sector {k}");
        }
        for i in 48..56 {
            assert!((a[i] - b[i]).abs() < 1e-12, "feature {i}");
        }
    }

    #[test]
    fn empty_cone() {
        let mut cone = ConeSpec::default_for(8, 8);
        cone.apex = [100.0, 100.0];
        cone.r_max = 1.0;
        assert!(matches!(builtin_features(8, 8, &[0.0; 64], &cone), Err(MetricsError::EmptyCone)));
    }
}
