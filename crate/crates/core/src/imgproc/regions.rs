//! 8-connected component extraction with Moore-neighbour outer contours.

use serde::{Deserialize, Serialize};

use crate::raster::Grid;

/// Horizontal pixel run `[x0, x1]` (inclusive) on row `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub y: u32,
    pub x0: u32,
    pub x1: u32,
}

/// Inclusive pixel bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionMask {
    /// Row-major runs, sorted by `(y, x0)`.
    pub runs: Vec<Run>,
    pub area: usize,
    pub bbox: BBox,
    /// Ordered outer boundary pixels `[x, y]`.
    pub contour: Vec<[i32; 2]>,
}

impl RegionMask {
    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32)> + '_ {
        self.runs
            .iter()
            .flat_map(|r| (r.x0..=r.x1).map(move |x| (x, r.y)))
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        let i = self.runs.partition_point(|r| (r.y, r.x1) < (y, x));
        self.runs
            .get(i)
            .is_some_and(|r| r.y == y && r.x0 <= x && x <= r.x1)
    }

    /// Mean pixel position `[x, y]`.
    pub fn centroid(&self) -> [f64; 2] {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0.0);
        for r in &self.runs {
            let len = (r.x1 - r.x0 + 1) as f64;
            sx += 0.5 * (r.x0 + r.x1) as f64 * len;
            sy += r.y as f64 * len;
            n += len;
        }
        if n == 0.0 {
            [0.0, 0.0]
        } else {
            [sx / n, sy / n]
        }
    }

    /// Rasterises into a full-size 0/1 mask.
    pub fn to_grid(&self, width: usize, height: usize) -> Grid<u8> {
        let mut g = Grid::new(width, height, 0u8);
        for r in &self.runs {
            for x in r.x0..=r.x1 {
                g[(x as usize, r.y as usize)] = 1;
            }
        }
        g
    }

    /// Builds a region from a set of runs (no contour is traced).
    pub fn from_runs(mut runs: Vec<Run>) -> Self {
        runs.sort_by_key(|r| (r.y, r.x0));
        let area = runs.iter().map(|r| (r.x1 - r.x0 + 1) as usize).sum();
        let bbox = BBox {
            x0: runs.iter().map(|r| r.x0).min().unwrap_or(0),
            y0: runs.first().map_or(0, |r| r.y),
            x1: runs.iter().map(|r| r.x1).max().unwrap_or(0),
            y1: runs.last().map_or(0, |r| r.y),
        };
        Self {
            runs,
            area,
            bbox,
            contour: Vec::new(),
        }
    }
}

const DIRS: [(i64, i64); 8] = [
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
];

/// Labels the 8-connected components of the non-zero pixels. Returns the
/// label grid (0 = background, components numbered from 1 in raster order of
/// their first pixel) and the component count.
pub fn label_components(mask: &Grid<u8>) -> (Grid<u32>, u32) {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = Grid::new(w, h, 0u32);
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if mask.as_slice()[start] == 0 || labels.as_slice()[start] != 0 {
            continue;
        }
        next += 1;
        labels.as_mut_slice()[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = ((i % w) as i64, (i / w) as i64);
            for (dx, dy) in DIRS {
                let (nx, ny) = (x + dx, y + dy);
                if !mask.in_bounds(nx, ny) {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if mask.as_slice()[j] != 0 && labels.as_slice()[j] == 0 {
                    labels.as_mut_slice()[j] = next;
                    stack.push(j);
                }
            }
        }
    }
    (labels, next)
}

/// Traces the outer boundary of the component labelled `label`, starting at
/// its first pixel in raster order.
fn trace_contour(labels: &Grid<u32>, label: u32, start: (i64, i64)) -> Vec<[i32; 2]> {
    let inside = |x: i64, y: i64| labels.in_bounds(x, y) && labels[(x as usize, y as usize)] == label;
    let step = |p: (i64, i64), search_from: usize| -> Option<(usize, (i64, i64))> {
        (0..8).find_map(|k| {
            let d = (search_from + k) % 8;
            let q = (p.0 + DIRS[d].0, p.1 + DIRS[d].1);
            inside(q.0, q.1).then_some((d, q))
        })
    };
    let next_search = |d: usize| if d % 2 == 0 { (d + 7) % 8 } else { (d + 6) % 8 };

    let mut contour = vec![[start.0 as i32, start.1 as i32]];
    // West, north-west, north and north-east of the first pixel are outside,
    // so the clockwise search may begin at east.
    let Some((d0, second)) = step(start, 0) else {
        return contour;
    };
    let mut cur = second;
    let mut dir = d0;
    let limit = 4 * labels.len() + 8;
    for _ in 0..limit {
        if cur == start {
            match step(cur, next_search(dir)) {
                Some((_, q)) if q == second => break,
                _ => {}
            }
        }
        contour.push([cur.0 as i32, cur.1 as i32]);
        let (d, q) = step(cur, next_search(dir)).expect("component pixel has a neighbour");
        dir = d;
        cur = q;
    }
    contour
}

/// Connected components of `mask` with at least `min_area` pixels, each with
/// its outer contour. Components are returned in raster order of their first pixel.
pub fn extract_regions(mask: &Grid<u8>, min_area: usize) -> Vec<RegionMask> {
    split_regions(mask, min_area).0
}

/// Like [`extract_regions`] but also returns the rejected small components.
pub fn split_regions(mask: &Grid<u8>, min_area: usize) -> (Vec<RegionMask>, Vec<RegionMask>) {
    let min_area = min_area.max(1);
    let (labels, count) = label_components(mask);
    let w = mask.width();
    let mut runs: Vec<Vec<Run>> = vec![Vec::new(); count as usize];
    let mut first: Vec<Option<(i64, i64)>> = vec![None; count as usize];
    for y in 0..mask.height() {
        let row = labels.row(y);
        let mut x = 0;
        while x < w {
            let l = row[x];
            if l == 0 {
                x += 1;
                continue;
            }
            let x0 = x;
            while x < w && row[x] == l {
                x += 1;
            }
            let idx = (l - 1) as usize;
            runs[idx].push(Run {
                y: y as u32,
                x0: x0 as u32,
                x1: (x - 1) as u32,
            });
            first[idx].get_or_insert((x0 as i64, y as i64));
        }
    }
    let mut kept = Vec::new();
    let mut rejected = Vec::new();
    for (idx, rs) in runs.into_iter().enumerate() {
        let mut region = RegionMask::from_runs(rs);
        if region.area >= min_area {
            region.contour = trace_contour(&labels, idx as u32 + 1, first[idx].unwrap());
            kept.push(region);
        } else {
            rejected.push(region);
        }
    }
    (kept, rejected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    #[test]
    fn full_frame_is_one_region() {
        let m = Grid::new(20, 10, 1u8);
        let r = extract_regions(&m, 1);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].area, 200);
    }

    #[test]
    fn zero_column_separates_blobs() {
        let m = Grid::from_fn(21, 10, |x, _| u8::from(x != 10));
        assert_eq!(extract_regions(&m, 1).len(), 2);
    }

    #[test]
    fn diagonal_touch_is_connected() {
        let mut m = Grid::new(4, 4, 0u8);
        m[(0, 0)] = 1;
        m[(1, 1)] = 1;
        m[(2, 2)] = 1;
        let r = extract_regions(&m, 1);
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].area, 3);
    }

    #[test]
    fn small_components_rejected() {
        let mut m = Grid::new(10, 10, 0u8);
        m[(0, 0)] = 1;
        for y in 5..9 {
            for x in 5..9 {
                m[(x, y)] = 1;
            }
        }
        let (kept, rejected) = split_regions(&m, 2);
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].area, 16);
        assert_eq!(rejected.len(), 1);
    }

    #[test]
    fn rectangle_contour_is_its_perimeter() {
        let (x0, y0, x1, y1) = (3usize, 2usize, 12usize, 8usize);
        let m = Grid::from_fn(16, 12, |x, y| u8::from(x >= x0 && x <= x1 && y >= y0 && y <= y1));
        let r = extract_regions(&m, 1);
        assert_eq!(r.len(), 1);
        let got: BTreeSet<[i32; 2]> = r[0].contour.iter().copied().collect();
        let mut want = BTreeSet::new();
        for y in y0..=y1 {
            for x in x0..=x1 {
                if x == x0 || x == x1 || y == y0 || y == y1 {
                    want.insert([x as i32, y as i32]);
                }
            }
        }
        assert_eq!(got, want);
        // each perimeter pixel visited once, consecutive points are 8-neighbours
        assert_eq!(r[0].contour.len(), want.len());
        for pair in r[0].contour.windows(2) {
            let d = ((pair[0][0] - pair[1][0]).abs(), (pair[0][1] - pair[1][1]).abs());
            assert!(d.0 <= 1 && d.1 <= 1 && d != (0, 0));
        }
    }

    #[test]
    fn single_pixel_and_line_contours() {
        let mut m = Grid::new(5, 5, 0u8);
        m[(2, 2)] = 1;
        assert_eq!(extract_regions(&m, 1)[0].contour, vec![[2, 2]]);
        let m = Grid::from_fn(6, 3, |_, y| u8::from(y == 1));
        let c = &extract_regions(&m, 1)[0].contour;
        let set: BTreeSet<_> = c.iter().copied().collect();
        assert_eq!(set.len(), 6);
    }

    #[test]
    fn run_membership() {
        let m = Grid::from_fn(8, 8, |x, y| u8::from((x + y) % 3 != 0 && x > 1));
        for r in extract_regions(&m, 1) {
            for (x, y) in r.pixels() {
                assert!(r.contains(x, y));
            }
            assert!(!r.contains(0, 0));
        }
    }
}
