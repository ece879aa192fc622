//! Mask-restricted colour and texture statistics.

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgproc::color::hsv_from_rgb;
use crate::imgproc::gabor::{GaborBank, Window};
use crate::imgproc::RegionMask;
use crate::raster::Grid;

pub const FEATURE_COUNT: usize = 18;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "r_mean", "r_std", "g_mean", "g_std", "b_mean", "b_std", "h_mean", "h_std", "s_mean", "s_std",
    "v_mean", "v_std", "gabor_l0_mean", "gabor_l0_std", "gabor_l1_mean", "gabor_l1_std",
    "gabor_l2_mean", "gabor_l2_std",
];

/// Column ranges of the three feature groups.
pub const RGB_FEATURES: std::ops::Range<usize> = 0..6;
pub const HSV_FEATURES: std::ops::Range<usize> = 6..12;
pub const GABOR_FEATURES: std::ops::Range<usize> = 12..18;

/// Which feature groups a model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    Rgb,
    Hsv,
    RgbHsv,
    RgbGabor,
    HsvGabor,
    All,
}

impl FeatureSet {
    pub fn indices(self) -> Vec<usize> {
        let groups: &[std::ops::Range<usize>] = match self {
            FeatureSet::Rgb => &[RGB_FEATURES],
            FeatureSet::Hsv => &[HSV_FEATURES],
            FeatureSet::RgbHsv => &[RGB_FEATURES, HSV_FEATURES],
            FeatureSet::RgbGabor => &[RGB_FEATURES, GABOR_FEATURES],
            FeatureSet::HsvGabor => &[HSV_FEATURES, GABOR_FEATURES],
            FeatureSet::All => &[RGB_FEATURES, HSV_FEATURES, GABOR_FEATURES],
        };
        groups.iter().flat_map(|r| r.clone()).collect()
    }
}

/// Mean and population standard deviation of R, G, B, H, S, V and the three
/// orientation-averaged Gabor responses over a region. Hue statistics are
/// circular, in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector(pub [f64; FEATURE_COUNT]);

impl FeatureVector {
    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

#[derive(Default, Clone, Copy)]
struct Moments {
    n: f64,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    #[inline]
    fn add(&mut self, x: f64) {
        self.n += 1.0;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn mean_std(&self, shift: f64) -> (f64, f64) {
        let mean = self.sum / self.n;
        let var = (self.sum_sq / self.n - mean * mean).max(0.0);
        (mean + shift, var.sqrt())
    }
}

/// Circular mean and circular standard deviation (degrees) of hue angles.
fn circular_stats(sum_cos: f64, sum_sin: f64, n: f64) -> (f64, f64) {
    let (c, s) = (sum_cos / n, sum_sin / n);
    let r = (c * c + s * s).sqrt().min(1.0);
    let mean = if r < 1e-12 { 0.0 } else { s.atan2(c).to_degrees().rem_euclid(360.0) };
    let std = (-2.0 * r.max(1e-300).ln()).sqrt().to_degrees();
    (mean, std)
}

/// Colour statistics (first 12 features) over the region.
fn color_features(img: &RgbImage, mask: &RegionMask, out: &mut [f64; FEATURE_COUNT]) {
    // shift by a reference pixel so the one-pass variance stays well conditioned
    let (x0, y0) = mask.pixels().next().expect("non-empty mask");
    let ref_px = img.get_pixel(x0, y0).0;
    let ref_hsv = hsv_from_rgb(ref_px);
    let mut m = [Moments::default(); 5];
    let (mut hc, mut hs) = (0.0, 0.0);
    for r in &mask.runs {
        for x in r.x0..=r.x1 {
            let p = img.get_pixel(x, r.y).0;
            for k in 0..3 {
                m[k].add(p[k] as f64 - ref_px[k] as f64);
            }
            let hsv = hsv_from_rgb(p);
            let (s, c) = hsv.h.to_radians().sin_cos();
            hc += c;
            hs += s;
            m[3].add(hsv.s - ref_hsv.s);
            m[4].add(hsv.v - ref_hsv.v);
        }
    }
    for k in 0..3 {
        let (mean, std) = m[k].mean_std(ref_px[k] as f64);
        out[2 * k] = mean;
        out[2 * k + 1] = std;
    }
    let n = m[3].n;
    let (hm, hsd) = circular_stats(hc, hs, n);
    out[6] = hm;
    out[7] = hsd;
    let (sm, ss) = m[3].mean_std(ref_hsv.s);
    out[8] = sm;
    out[9] = ss;
    let (vm, vs) = m[4].mean_std(ref_hsv.v);
    out[10] = vm;
    out[11] = vs;
}

/// Gabor statistics over the region; `responses[k]` covers `win`.
fn gabor_features(responses: &[Grid<f32>], win: Window, mask: &RegionMask, out: &mut [f64; FEATURE_COUNT]) {
    for (k, resp) in responses.iter().enumerate().take(3) {
        let (rx, ry) = mask.pixels().next().expect("non-empty mask");
        let shift = resp[(rx as usize - win.x0, ry as usize - win.y0)] as f64;
        let mut m = Moments::default();
        for r in &mask.runs {
            let row = resp.row(r.y as usize - win.y0);
            for &v in &row[r.x0 as usize - win.x0..=r.x1 as usize - win.x0] {
                m.add(v as f64 - shift);
            }
        }
        let (mean, std) = m.mean_std(shift);
        out[12 + 2 * k] = mean;
        out[13 + 2 * k] = std;
    }
}

/// Extracts features with precomputed Gabor responses that cover `win`
/// (which must contain the mask).
pub fn extract_features_with(
    img: &RgbImage,
    mask: &RegionMask,
    responses: &[Grid<f32>],
    win: Window,
) -> Result<FeatureVector> {
    if mask.area == 0 || mask.runs.is_empty() {
        return Err(Error::EmptyMask);
    }
    let b = mask.bbox;
    if (b.x0 as usize) < win.x0 || (b.y0 as usize) < win.y0 || b.x1 as usize >= win.x1 || b.y1 as usize >= win.y1 {
        return Err(Error::InvalidInput("Gabor window does not cover the mask".into()));
    }
    let mut out = [0.0; FEATURE_COUNT];
    color_features(img, mask, &mut out);
    gabor_features(responses, win, mask, &mut out);
    Ok(FeatureVector(out))
}

/// Window covering the mask's bounding box plus the Gabor kernel margin,
/// clipped to the image.
pub fn gabor_window(mask: &RegionMask, bank: &GaborBank, width: usize, height: usize) -> Window {
    let r = bank.params().radius();
    let b = mask.bbox;
    Window {
        x0: (b.x0 as usize).saturating_sub(r),
        y0: (b.y0 as usize).saturating_sub(r),
        x1: (b.x1 as usize + 1 + r).min(width),
        y1: (b.y1 as usize + 1 + r).min(height),
    }
}

pub fn gray_f32(img: &RgbImage) -> Grid<f32> {
    let (w, h) = img.dimensions();
    Grid::from_vec(
        w as usize,
        h as usize,
        img.pixels()
            .map(|p| crate::imgproc::color::gray_value(p.0) as f32)
            .collect(),
    )
}

/// Features of one region. The Gabor filters run on the mask's bounding box
/// plus the kernel margin; only responses under the mask enter the statistics.
pub fn extract_features(img: &RgbImage, mask: &RegionMask, bank: &GaborBank) -> Result<FeatureVector> {
    if mask.area == 0 || mask.runs.is_empty() {
        return Err(Error::EmptyMask);
    }
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray = gray_f32(img);
    // bbox window; the convolution reads the margin around it from `gray`
    let b = mask.bbox;
    let win = Window {
        x0: b.x0 as usize,
        y0: b.y0 as usize,
        x1: (b.x1 as usize + 1).min(w),
        y1: (b.y1 as usize + 1).min(h),
    };
    let responses = bank.apply_window(&gray, win);
    extract_features_with(img, mask, &responses, win)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgproc::gabor::GaborParams;
    use crate::imgproc::regions::Run;
    use image::Rgb;

    fn rect_mask(x0: u32, y0: u32, x1: u32, y1: u32) -> RegionMask {
        RegionMask::from_runs((y0..=y1).map(|y| Run { y, x0, x1 }).collect())
    }

    fn bank() -> GaborBank {
        GaborBank::new(GaborParams::default()).unwrap()
    }

    #[test]
    fn uniform_patch() {
        let img = RgbImage::from_pixel(80, 60, Rgb([100, 150, 200]));
        let f = extract_features(&img, &rect_mask(10, 10, 50, 40), &bank()).unwrap().0;
        assert_eq!(&f[0..6], &[100.0, 0.0, 150.0, 0.0, 200.0, 0.0]);
        for k in 0..3 {
            assert!(f[13 + 2 * k].abs() < 1e-9);
        }
    }

    #[test]
    fn pure_red_hsv() {
        let img = RgbImage::from_pixel(40, 40, Rgb([255, 0, 0]));
        let f = extract_features(&img, &rect_mask(5, 5, 30, 30), &bank()).unwrap().0;
        assert_eq!((f[6], f[8], f[10]), (0.0, 1.0, 1.0));
        assert!(f[7].abs() < 1e-6);
    }

    #[test]
    fn two_tone_red_statistics() {
        let img = RgbImage::from_fn(40, 20, |x, _| if x < 20 { Rgb([0, 0, 0]) } else { Rgb([255, 0, 0]) });
        let f = extract_features(&img, &rect_mask(10, 5, 29, 14), &bank()).unwrap().0;
        assert!((f[0] - 127.5).abs() < 1e-9);
        assert!((f[1] - 127.5).abs() < 1e-9);
    }

    #[test]
    fn hue_mean_wraps_around_zero() {
        // hues near 350 and 10 degrees average to 0, not 180
        let img = RgbImage::from_fn(40, 20, |x, _| if x < 20 { Rgb([255, 0, 43]) } else { Rgb([255, 43, 0]) });
        let f = extract_features(&img, &rect_mask(0, 0, 39, 19), &bank()).unwrap().0;
        let d = f[6].min(360.0 - f[6]);
        assert!(d < 1.0, "{}", f[6]);
        assert!(f[7] > 5.0 && f[7] < 15.0);
    }

    #[test]
    fn empty_mask_is_rejected() {
        let img = RgbImage::new(10, 10);
        let m = RegionMask::from_runs(Vec::new());
        assert!(matches!(extract_features(&img, &m, &bank()), Err(Error::EmptyMask)));
    }

    #[test]
    fn pixels_outside_mask_and_margin_do_not_matter() {
        let base = RgbImage::from_fn(120, 100, |x, y| Rgb([(x * 3 % 256) as u8, (y * 5 % 256) as u8, ((x + y) % 256) as u8]));
        let mask = rect_mask(40, 30, 70, 60);
        let b = bank();
        let f0 = extract_features(&base, &mask, &b).unwrap();
        let mut far = base.clone();
        far.put_pixel(2, 2, Rgb([255, 255, 255]));
        far.put_pixel(110, 95, Rgb([0, 0, 0]));
        assert_eq!(extract_features(&far, &mask, &b).unwrap(), f0);
        let mut near = base.clone();
        near.put_pixel(35, 45, Rgb([255, 255, 255]));
        let f2 = extract_features(&near, &mask, &b).unwrap();
        assert_eq!(&f2.0[..12], &f0.0[..12]);
        assert_ne!(&f2.0[12..], &f0.0[12..]);
    }

    #[test]
    fn full_frame_responses_match_window_responses() {
        let img = RgbImage::from_fn(90, 70, |x, y| Rgb([(x * 7 % 256) as u8, (y * 11 % 256) as u8, 40]));
        let mask = rect_mask(20, 15, 60, 50);
        let b = bank();
        let gray = gray_f32(&img);
        let full = b.apply(&gray);
        let f_full = extract_features_with(&img, &mask, &full, Window::full(90, 70)).unwrap();
        assert_eq!(f_full, extract_features(&img, &mask, &b).unwrap());
    }
}
