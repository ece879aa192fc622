//! Planar polygon utilities: convex hull, minimum-area enclosing rectangle
//! (rotating calipers), winding-number containment and shoelace area.

use crate::error::{Error, Result};

pub type P2 = [f64; 2];

#[inline]
fn cross(o: P2, a: P2, b: P2) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Signed shoelace area; positive for counter-clockwise polygons.
pub fn signed_area(poly: &[P2]) -> f64 {
    let n = poly.len();
    let mut s = 0.0;
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        s += a[0] * b[1] - b[0] * a[1];
    }
    0.5 * s
}

pub fn centroid(poly: &[P2]) -> P2 {
    let n = poly.len().max(1) as f64;
    let (sx, sy) = poly.iter().fold((0.0, 0.0), |(x, y), p| (x + p[0], y + p[1]));
    [sx / n, sy / n]
}

/// Convex hull (Andrew's monotone chain), counter-clockwise, without
/// collinear points.
pub fn convex_hull(points: &[P2]) -> Vec<P2> {
    let mut pts: Vec<P2> = points.iter().copied().filter(|p| p[0].is_finite() && p[1].is_finite()).collect();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<P2> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &P2>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// Minimum-area rectangle enclosing `points`, corners counter-clockwise.
/// One side of the result is collinear with a convex-hull edge.
pub fn min_area_rect(points: &[P2]) -> Result<[P2; 4]> {
    let hull = convex_hull(points);
    if hull.len() < 3 || signed_area(&hull).abs() < 1e-12 {
        return Err(Error::Degenerate(
            "minimum-area rectangle needs three non-collinear points".into(),
        ));
    }
    let n = hull.len();
    let mut best: Option<(f64, [P2; 4])> = None;
    // calipers: for edge i, track the extreme vertices along the edge
    // direction (max), its normal (max) and the opposite direction (min)
    let (mut j_far, mut k_max, mut m_min) = (1usize, 1usize, 1usize);
    for i in 0..n {
        let a = hull[i];
        let b = hull[(i + 1) % n];
        let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        if len == 0.0 {
            continue;
        }
        let e = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
        let nrm = [-e[1], e[0]];
        let along = |p: P2| (p[0] - a[0]) * e[0] + (p[1] - a[1]) * e[1];
        let up = |p: P2| (p[0] - a[0]) * nrm[0] + (p[1] - a[1]) * nrm[1];
        if i == 0 {
            k_max = (0..n).max_by(|&x, &y| along(hull[x]).total_cmp(&along(hull[y]))).unwrap();
            j_far = (0..n).max_by(|&x, &y| up(hull[x]).total_cmp(&up(hull[y]))).unwrap();
            m_min = (0..n).min_by(|&x, &y| along(hull[x]).total_cmp(&along(hull[y]))).unwrap();
        } else {
            while along(hull[(k_max + 1) % n]) > along(hull[k_max]) {
                k_max = (k_max + 1) % n;
            }
            while up(hull[(j_far + 1) % n]) > up(hull[j_far]) {
                j_far = (j_far + 1) % n;
            }
            while along(hull[(m_min + 1) % n]) < along(hull[m_min]) {
                m_min = (m_min + 1) % n;
            }
        }
        let lo = along(hull[m_min]);
        let hi = along(hull[k_max]);
        let h = up(hull[j_far]);
        let area = (hi - lo) * h;
        if best.as_ref().map_or(true, |(ba, _)| area < *ba) {
            let at = |s: f64, t: f64| [a[0] + s * e[0] + t * nrm[0], a[1] + s * e[1] + t * nrm[1]];
            best = Some((area, [at(lo, 0.0), at(hi, 0.0), at(hi, h), at(lo, h)]));
        }
    }
    Ok(best.expect("hull has edges").1)
}

#[inline]
fn on_segment(p: P2, a: P2, b: P2) -> bool {
    let len2 = (b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2);
    let c = cross(a, b, p);
    if c * c > 1e-24 * len2.max(1e-300) * (1.0 + len2) {
        return false;
    }
    let dot = (p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1]);
    dot >= -1e-12 && dot <= len2 + 1e-12
}

/// Winding number of `polygon` around `p` (counter-clockwise positive).
pub fn winding_number(p: P2, polygon: &[P2]) -> i32 {
    let n = polygon.len();
    let mut wn = 0;
    for i in 0..n {
        let a = polygon[i];
        let b = polygon[(i + 1) % n];
        if a[1] <= p[1] {
            if b[1] > p[1] && cross(a, b, p) > 0.0 {
                wn += 1;
            }
        } else if b[1] <= p[1] && cross(a, b, p) < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// Non-zero winding containment; points on the boundary count as inside.
pub fn winding_inside(p: P2, polygon: &[P2]) -> bool {
    let n = polygon.len();
    if n < 3 {
        return false;
    }
    if (0..n).any(|i| on_segment(p, polygon[i], polygon[(i + 1) % n])) {
        return true;
    }
    winding_number(p, polygon) != 0
}
