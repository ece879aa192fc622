//! Height-adaptive homogeneous-region segmentation: gray conversion, Canny
//! edges, distance to the nearest edge, thresholding and region extraction.
//! Both thresholds are cubic functions of the altitude above ground.

use std::path::Path;

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgproc::{self, canny, edt, rgb_to_gray, RegionMask};
use crate::raster::Grid;

/// Frame size the default minimum region area refers to.
pub const REFERENCE_FRAME_AREA: usize = 752 * 480;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SegmenterConfig {
    /// Canny threshold cubic, coefficients of `h^3, h^2, h, 1`.
    pub canny_poly: [f64; 4],
    /// Edge-distance threshold cubic (pixels), coefficients of `h^3, h^2, h, 1`.
    pub dtf_poly: [f64; 4],
    /// Altitude range the cubics were fitted on; inputs are clamped to it.
    pub valid_agl: [f64; 2],
    /// Minimum region size in pixels at 752x480, scaled with the frame area.
    pub min_region_area_px: usize,
}

impl Default for SegmenterConfig {
    fn default() -> Self {
        Self {
            canny_poly: [-1.72e-6, 0.00148, -0.43, 62.97],
            dtf_poly: [-1.23e-6, 0.0011, -0.39, 56.82],
            valid_agl: [58.0, 382.0],
            min_region_area_px: 2000,
        }
    }
}

impl SegmenterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.valid_agl[0] < self.valid_agl[1]) || self.valid_agl[0] <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "invalid AGL range {:?}",
                self.valid_agl
            )));
        }
        if self.min_region_area_px < 1 {
            return Err(Error::InvalidInput("min_region_area_px must be >= 1".into()));
        }
        Ok(())
    }

    /// Minimum region area for a frame of the given size.
    pub fn min_area_for(&self, width: usize, height: usize) -> usize {
        let scaled = self.min_region_area_px as f64 * (width * height) as f64 / REFERENCE_FRAME_AREA as f64;
        (scaled.round() as usize).max(1)
    }
}

#[inline]
fn cubic(c: &[f64; 4], h: f64) -> f64 {
    ((c[0] * h + c[1]) * h + c[2]) * h + c[3]
}

/// `(canny_threshold, distance_threshold_px)` for an altitude above ground.
pub fn thresholds_for_agl(agl: f64, cfg: &SegmenterConfig) -> Result<(f64, f64)> {
    if !(agl > 0.0) || !agl.is_finite() {
        return Err(Error::InvalidInput(format!("AGL must be positive, got {agl}")));
    }
    let h = agl.clamp(cfg.valid_agl[0], cfg.valid_agl[1]);
    // the distance cubic dips slightly below zero near the top of its range
    Ok((cubic(&cfg.canny_poly, h).max(0.0), cubic(&cfg.dtf_poly, h).max(0.0)))
}

/// Intermediate rasters of one segmentation, for inspection and debug dumps.
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub canny_threshold: f64,
    pub dtf_threshold: f64,
    pub gray: Grid<u8>,
    pub edges: Grid<u8>,
    pub distance: Grid<f64>,
    pub regions: Vec<RegionMask>,
}

impl Segmentation {
    /// Writes the input, edge, distance and region panels as PNGs named
    /// `<prefix>_{input,edges,distance,regions}.png` in `dir`.
    pub fn write_panels(&self, frame: &RgbImage, dir: &Path, prefix: &str) -> Result<()> {
        imgproc::write_debug_rgb(&dir.join(format!("{prefix}_input.png")), frame)?;
        imgproc::write_debug_gray(
            &dir.join(format!("{prefix}_edges.png")),
            &self.edges.map(|&e| if e != 0 { 255 } else { 0 }),
        )?;
        let capped = self.distance.map(|&d| d.min(4.0 * self.dtf_threshold));
        imgproc::write_debug_gray(
            &dir.join(format!("{prefix}_distance.png")),
            &imgproc::normalize_to_u8(&capped),
        )?;
        let mut panel = Grid::new(self.gray.width(), self.gray.height(), 0u8);
        let n = self.regions.len().max(1);
        for (i, r) in self.regions.iter().enumerate() {
            let shade = (64 + 191 * (i + 1) / n) as u8;
            for (x, y) in r.pixels() {
                panel[(x as usize, y as usize)] = shade;
            }
        }
        imgproc::write_debug_gray(&dir.join(format!("{prefix}_regions.png")), &panel)
    }
}

/// Full segmentation with intermediates.
pub fn segment_detailed(frame: &RgbImage, agl: f64, cfg: &SegmenterConfig) -> Result<Segmentation> {
    let (canny_threshold, dtf_threshold) = thresholds_for_agl(agl, cfg)?;
    let gray = rgb_to_gray(frame);
    let edges = canny(&gray, canny_threshold);
    let distance = edt(&edges);
    let mask = distance.map(|&d| u8::from(d > dtf_threshold));
    let min_area = cfg.min_area_for(gray.width(), gray.height());
    let regions = imgproc::extract_regions(&mask, min_area);
    Ok(Segmentation {
        canny_threshold,
        dtf_threshold,
        gray,
        edges,
        distance,
        regions,
    })
}

/// Homogeneous regions of `frame`: every returned pixel lies farther than the
/// altitude-dependent threshold from the nearest Canny edge.
pub fn segment(frame: &RgbImage, agl: f64, cfg: &SegmenterConfig) -> Result<Vec<RegionMask>> {
    Ok(segment_detailed(frame, agl, cfg)?.regions)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::Rgb;

    #[test]
    fn thresholds_at_100_m() {
        let (c, d) = thresholds_for_agl(100.0, &SegmenterConfig::default()).unwrap();
        assert!((c - 33.05).abs() < 0.01 && (d - 27.59).abs() < 0.01, "{c} {d}");
    }

    #[test]
    fn thresholds_clamp_to_fitted_range() {
        let cfg = SegmenterConfig::default();
        let (c, d) = thresholds_for_agl(58.0, &cfg).unwrap();
        assert!((c - 42.67).abs() < 0.01 && (d - 37.66).abs() < 0.01, "{c} {d}");
        assert_eq!(thresholds_for_agl(30.0, &cfg).unwrap(), (c, d));
        assert_eq!(
            thresholds_for_agl(500.0, &cfg).unwrap(),
            thresholds_for_agl(382.0, &cfg).unwrap()
        );
        assert!(thresholds_for_agl(0.0, &cfg).is_err());
        assert!(thresholds_for_agl(-5.0, &cfg).is_err());
    }

    #[test]
    fn thresholds_positive_and_continuous_on_range() {
        let cfg = SegmenterConfig::default();
        let mut prev = thresholds_for_agl(58.0, &cfg).unwrap();
        let mut h = 58.0;
        while h <= 382.0 {
            let t = thresholds_for_agl(h, &cfg).unwrap();
            assert!(t.0 > 0.0 && t.1 >= 0.0);
            assert!((t.0 - prev.0).abs() < 0.05 && (t.1 - prev.1).abs() < 0.05);
            prev = t;
            h += 0.1;
        }
    }

    #[test]
    fn uniform_frame_is_one_region() {
        let img = RgbImage::from_pixel(188, 120, Rgb([80, 140, 50]));
        let regions = segment(&img, 100.0, &SegmenterConfig::default()).unwrap();
        assert_eq!(regions.len(), 1);
        assert_eq!(regions[0].area, 188 * 120);
    }

    #[test]
    fn dark_stripe_splits_the_field() {
        let img = RgbImage::from_fn(300, 200, |x, _| {
            if (140..160).contains(&x) {
                Rgb([20, 40, 20])
            } else {
                Rgb([80, 140, 50])
            }
        });
        let seg = segment_detailed(&img, 100.0, &SegmenterConfig::default()).unwrap();
        assert_eq!(seg.regions.len(), 2);
        for r in &seg.regions {
            assert!(r.pixels().all(|(x, _)| !(140..160).contains(&x)));
            for (x, y) in r.pixels() {
                assert!(seg.distance[(x as usize, y as usize)] > seg.dtf_threshold);
            }
        }
    }

    #[test]
    fn min_area_scales_with_frame() {
        let cfg = SegmenterConfig::default();
        assert_eq!(cfg.min_area_for(752, 480), 2000);
        assert_eq!(cfg.min_area_for(376, 240), 500);
    }
}
