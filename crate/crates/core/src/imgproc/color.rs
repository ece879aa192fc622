use image::RgbImage;

use crate::raster::Grid;

/// BT.601 luma, rounded half-up: `(299 R + 587 G + 114 B + 500) / 1000`.
#[inline]
pub fn gray_value(rgb: [u8; 3]) -> u8 {
    let acc = 299 * rgb[0] as u32 + 587 * rgb[1] as u32 + 114 * rgb[2] as u32;
    ((acc + 500) / 1000) as u8
}

pub fn rgb_to_gray(img: &RgbImage) -> Grid<u8> {
    let (w, h) = img.dimensions();
    let data = img.pixels().map(|p| gray_value(p.0)).collect();
    Grid::from_vec(w as usize, h as usize, data)
}

/// Hexcone HSV. `h` in degrees `[0, 360)`, `s` and `v` in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hsv {
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

pub fn hsv_from_rgb(rgb: [u8; 3]) -> Hsv {
    let r = rgb[0] as f64 / 255.0;
    let g = rgb[1] as f64 / 255.0;
    let b = rgb[2] as f64 / 255.0;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let v = max;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta <= 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta)
    } else if max == g {
        60.0 * ((b - r) / delta) + 120.0
    } else {
        60.0 * ((r - g) / delta) + 240.0
    };
    let h = if h < 0.0 { h + 360.0 } else { h };
    Hsv {
        h: if h >= 360.0 { h - 360.0 } else { h },
        s,
        v,
    }
}

pub fn rgb_from_hsv(hsv: Hsv) -> [u8; 3] {
    let c = hsv.v * hsv.s;
    let hp = (hsv.h.rem_euclid(360.0)) / 60.0;
    let x = c * (1.0 - ((hp % 2.0) - 1.0).abs());
    let (r1, g1, b1) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = hsv.v - c;
    let q = |f: f64| ((f + m) * 255.0).round().clamp(0.0, 255.0) as u8;
    [q(r1), q(g1), q(b1)]
}

pub fn rgb_to_hsv(img: &RgbImage) -> Grid<Hsv> {
    let (w, h) = img.dimensions();
    let data = img.pixels().map(|p| hsv_from_rgb(p.0)).collect();
    Grid::from_vec(w as usize, h as usize, data)
}
