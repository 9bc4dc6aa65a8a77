use crate::anatomy::Label;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Raster geometry for a slice: pixel grid centred on the plane origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RasterSpec {
    pub width: usize,
    pub height: usize,
    /// mm per pixel.
    pub spacing_mm: f64,
}

impl RasterSpec {
    /// Plane coordinates of the centre of pixel (0, 0).
    pub fn origin_2d(&self) -> [f64; 2] {
        [
            -(self.width as f64 - 1.0) * 0.5 * self.spacing_mm,
            -(self.height as f64 - 1.0) * 0.5 * self.spacing_mm,
        ]
    }
}

/// 2D grid of structure labels. Columns run along the plane's `u` axis,
/// rows along `v`. `0` is background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelMap {
    pub width: usize,
    pub height: usize,
    pub pixel_spacing: f64,
    pub origin_2d: [f64; 2],
    pub labels: Vec<Label>,
    /// Structure table of the source mesh.
    pub structure_names: BTreeMap<Label, String>,
}

impl LabelMap {
    pub fn background(spec: &RasterSpec, structure_names: BTreeMap<Label, String>) -> Self {
        Self {
            width: spec.width,
            height: spec.height,
            pixel_spacing: spec.spacing_mm,
            origin_2d: spec.origin_2d(),
            labels: vec![0; spec.width * spec.height],
            structure_names,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Label {
        self.labels[y * self.width + x]
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn area_mm2(&self, label: Label) -> f64 {
        self.count(label) as f64 * self.pixel_spacing * self.pixel_spacing
    }

    pub fn label_of(&self, name: &str) -> Option<Label> {
        self.structure_names
            .iter()
            .find(|(_, n)| n.as_str() == name)
            .map(|(l, _)| *l)
    }

    /// Distinct nonzero labels present, ascending.
    pub fn present_labels(&self) -> Vec<Label> {
        let mut seen: Vec<Label> = self.labels.iter().copied().filter(|&l| l != 0).collect();
        seen.sort_unstable();
        seen.dedup();
        seen
    }

    /// Paints `label` into every pixel whose centre lies inside the closed
    /// polygons under the even-odd rule. Polygons are in plane coordinates.
    pub fn fill_even_odd(&mut self, polygons: &[Vec<[f64; 2]>], label: Label) {
        let [ox, oy] = self.origin_2d;
        let s = self.pixel_spacing;
        let mut crossings = Vec::new();
        for row in 0..self.height {
            let y = oy + row as f64 * s;
            crossings.clear();
            for poly in polygons {
                let n = poly.len();
                for i in 0..n {
                    let p = poly[i];
                    let q = poly[(i + 1) % n];
                    // Half-open rule: a vertex exactly on the scanline counts once.
                    if (p[1] <= y) != (q[1] <= y) {
                        crossings.push(p[0] + (y - p[1]) * (q[0] - p[0]) / (q[1] - p[1]));
                    }
                }
            }
            crossings.sort_by(f64::total_cmp);
            for pair in crossings.chunks_exact(2) {
                // Pixel centres x_i = ox + i*s with pair[0] <= x_i < pair[1].
                let first = ((pair[0] - ox) / s).ceil().max(0.0);
                let end = ((pair[1] - ox) / s).ceil().min(self.width as f64);
                if end <= first {
                    continue;
                }
                let start = row * self.width;
                self.labels[start + first as usize..start + end as usize].fill(label);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(w: usize, h: usize, s: f64) -> LabelMap {
        LabelMap::background(&RasterSpec { width: w, height: h, spacing_mm: s }, BTreeMap::new())
    }

    #[test]
    fn square_fill_counts_centres() {
        let mut m = map(10, 10, 1.0);
        // Centres at -4.5..4.5; the square [-2, 2) covers 4 of them per axis.
        m.fill_even_odd(&[vec![[-2.0, -2.0], [2.0, -2.0], [2.0, 2.0], [-2.0, 2.0]]], 3);
        assert_eq!(m.count(3), 16);
    }

    #[test]
    fn even_odd_hole() {
        let mut m = map(20, 20, 1.0);
        let outer = vec![[-8.0, -8.0], [8.0, -8.0], [8.0, 8.0], [-8.0, 8.0]];
        let inner = vec![[-4.0, -4.0], [4.0, -4.0], [4.0, 4.0], [-4.0, 4.0]];
        m.fill_even_odd(&[outer, inner], 1);
        assert_eq!(m.count(1), 16 * 16 - 8 * 8);
        assert_eq!(m.get(10, 10), 0);
    }

    #[test]
    fn polygon_outside_raster_is_clipped() {
        let mut m = map(4, 4, 1.0);
        m.fill_even_odd(&[vec![[-100.0, -100.0], [100.0, -100.0], [100.0, 100.0], [-100.0, 100.0]]], 2);
        assert_eq!(m.count(2), 16);
    }
}
