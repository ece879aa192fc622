use image::{Rgb, RgbImage};

use super::plan::PlanReport;
use crate::terrain_map::GridStack;

const HAZARD: Rgb<u8> = Rgb([140, 20, 20]);
const PATH: Rgb<u8> = Rgb([255, 220, 0]);
const LOITER: Rgb<u8> = Rgb([0, 200, 255]);
const TOUCHDOWN: Rgb<u8> = Rgb([0, 255, 0]);
const REJECTED: Rgb<u8> = Rgb([255, 0, 255]);

/// North-up picture of the hazard distance map (brighter is safer) with the
/// planned approach, loiter circle, touch-down cell and rejected candidates.
pub fn render_overlay(stack: &GridStack, report: &PlanReport) -> RgbImage {
    let g = &stack.geometry;
    let max = stack
        .hazard_distance
        .as_slice()
        .iter()
        .copied()
        .filter(|d| d.is_finite())
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let rows = g.rows as u32;
    let mut img = RgbImage::from_fn(g.cols as u32, rows, |x, y| {
        let cell = (x as usize, (rows - 1 - y) as usize);
        if stack.fused_hazard[cell] != 0 {
            return HAZARD;
        }
        let v = (stack.hazard_distance[cell].min(max) / max * 255.0) as u8;
        Rgb([v, v, v])
    });
    let mut put = |c: usize, r: usize, color| {
        if c < g.cols && r < g.rows {
            img.put_pixel(c as u32, rows - 1 - r as u32, color);
        }
    };
    for f in &report.failures {
        put(f.candidate[0], f.candidate[1], REJECTED);
    }
    if let Some(plan) = &report.plan {
        for &[c, r] in &plan.loiter_cells {
            put(c, r, LOITER);
        }
        for &[c, r] in &plan.path_cells {
            put(c, r, PATH);
        }
        let [c, r] = plan.td_cell;
        for dc in -1i64..=1 {
            for dr in -1i64..=1 {
                let (cc, rr) = (c as i64 + dc, r as i64 + dr);
                if cc >= 0 && rr >= 0 {
                    put(cc as usize, rr as usize, TOUCHDOWN);
                }
            }
        }
    }
    img
}
