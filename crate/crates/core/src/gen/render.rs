//! Rasterization of feature vectors into gray-scale images.
//!
//! Each pixel is covered-tested at four sub-sample points
//! (offsets 0.25 and 0.75 on both axes); the pixel value blends the fill
//! and the background by the covered count, in integer arithmetic.

use serde::{Deserialize, Serialize};

use super::features::{FeatureVector, Shape, GRID_CELLS};

/// Row-major 8-bit gray image, 0 = black, 255 = white.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl Image {
    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        Self {
            width,
            height,
            pixels: vec![value; width * height],
        }
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    pub width: usize,
    pub height: usize,
    pub background: u8,
    /// Fill gray value per shade index.
    pub shade_table: [u8; 6],
    /// Enclosing-circle diameter in pixels per size index.
    pub size_table: [f64; 6],
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            background: 255,
            shade_table: [0, 42, 84, 126, 168, 210],
            size_table: [6.0, 8.0, 10.0, 12.0, 14.0, 16.0],
        }
    }
}

impl RenderConfig {
    /// Center of grid cell `cell` (row-major 3x3).
    pub fn cell_center(&self, cell: u8) -> (f64, f64) {
        let (row, col) = ((cell / 3) as f64, (cell % 3) as f64);
        let cw = self.width as f64 / 3.0;
        let ch = self.height as f64 / 3.0;
        ((col + 0.5) * cw, (row + 0.5) * ch)
    }
}

/// Draws `features` on a fresh canvas.
pub fn render(features: &FeatureVector, cfg: &RenderConfig) -> Image {
    debug_assert!(features.is_valid());
    let gray = cfg.shade_table[features.shade_idx as usize];
    let diameter = cfg.size_table[features.size_idx as usize];
    draw_objects(features.shape, features.occupied(), gray, diameter, cfg)
}

/// Draws identical objects with an explicit gray value and diameter.
pub fn draw_objects(shape: Shape, cells: &[u8], gray: u8, diameter: f64, cfg: &RenderConfig) -> Image {
    let mut img = Image::filled(cfg.width, cfg.height, cfg.background);
    for &cell in cells {
        debug_assert!((cell as usize) < GRID_CELLS);
        let (cx, cy) = cfg.cell_center(cell);
        fill_shape(&mut img, shape, cx, cy, diameter / 2.0, gray, cfg.background);
    }
    img
}

fn fill_shape(img: &mut Image, shape: Shape, cx: f64, cy: f64, radius: f64, gray: u8, background: u8) {
    let poly = outline(shape, cx, cy, radius);
    let x0 = (cx - radius).floor().max(0.0) as usize;
    let y0 = (cy - radius).floor().max(0.0) as usize;
    let x1 = ((cx + radius).ceil() as usize).min(img.width.saturating_sub(1));
    let y1 = ((cy + radius).ceil() as usize).min(img.height.saturating_sub(1));
    const OFFSETS: [(f64, f64); 4] = [(0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75)];
    for y in y0..=y1 {
        for x in x0..=x1 {
            let covered = OFFSETS
                .iter()
                .filter(|(dx, dy)| {
                    let (px, py) = (x as f64 + dx, y as f64 + dy);
                    match &poly {
                        None => (px - cx).powi(2) + (py - cy).powi(2) <= radius * radius,
                        Some(vertices) => inside_polygon(vertices, px, py),
                    }
                })
                .count() as u32;
            if covered > 0 {
                let v = (covered * gray as u32 + (4 - covered) * background as u32 + 2) / 4;
                img.pixels[y * img.width + x] = v as u8;
            }
        }
    }
}

/// Polygon vertices inscribed in the circle of `radius`; `None` for a circle.
/// Image y grows downwards, so angle -90 degrees points up.
fn outline(shape: Shape, cx: f64, cy: f64, radius: f64) -> Option<Vec<(f64, f64)>> {
    let at = |deg: f64, r: f64| {
        let a = deg.to_radians();
        (cx + r * a.cos(), cy + r * a.sin())
    };
    match shape {
        Shape::Circle => None,
        Shape::Triangle => Some([-90.0, 30.0, 150.0].iter().map(|&d| at(d, radius)).collect()),
        Shape::Square => Some([45.0, 135.0, 225.0, 315.0].iter().map(|&d| at(d, radius)).collect()),
        Shape::Hexagon => Some((0..6).map(|k| at(60.0 * k as f64, radius)).collect()),
        Shape::Star => Some(
            (0..10)
                .map(|k| {
                    let r = if k % 2 == 0 { radius } else { radius * 0.5 };
                    at(-90.0 + 36.0 * k as f64, r)
                })
                .collect(),
        ),
    }
}

/// Even-odd crossing test.
fn inside_polygon(v: &[(f64, f64)], px: f64, py: f64) -> bool {
    let mut inside = false;
    let mut j = v.len() - 1;
    for i in 0..v.len() {
        let (xi, yi) = v[i];
        let (xj, yj) = v[j];
        if (yi > py) != (yj > py) {
            let x_cross = xi + (py - yi) * (xj - xi) / (yj - yi);
            if px < x_cross {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}
