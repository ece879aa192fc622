use crate::terrain_map::GridGeometry;

/// A grid cell crossed by a segment, with the segment parameter range
/// `[t0, t1]` inside it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellSpan {
    pub cell: (usize, usize),
    pub t0: f64,
    pub t1: f64,
}

/// Parameter interval of `p + t (q - p)`, `t in [0, 1]`, inside the closed box.
fn clip(p: [f64; 2], q: [f64; 2], lo: [f64; 2], hi: [f64; 2]) -> Option<(f64, f64)> {
    let (mut t0, mut t1) = (0.0f64, 1.0f64);
    for k in 0..2 {
        let d = q[k] - p[k];
        if d == 0.0 {
            if p[k] < lo[k] || p[k] > hi[k] {
                return None;
            }
        } else {
            let (a, b) = ((lo[k] - p[k]) / d, (hi[k] - p[k]) / d);
            let (a, b) = if a < b { (a, b) } else { (b, a) };
            t0 = t0.max(a);
            t1 = t1.min(b);
        }
    }
    (t0 <= t1).then_some((t0, t1))
}

/// Index range of unit cells whose closed extent meets `[lo, hi]`, limited to `0..n`.
fn cell_range(lo: f64, hi: f64, n: usize) -> std::ops::RangeInclusive<usize> {
    let first = if lo.fract() == 0.0 { lo - 1.0 } else { lo.floor() };
    let first = first.max(0.0);
    let last = hi.floor().min(n as f64 - 1.0);
    if first > last {
        #[allow(clippy::reversed_empty_ranges)]
        return 1..=0;
    }
    first as usize..=last as usize
}

/// Every in-grid cell touched by the segment `p -> q` (world xy), including
/// cells touched only at an edge or corner, in order of entry.
pub fn supercover(g: &GridGeometry, p: [f64; 2], q: [f64; 2]) -> Vec<CellSpan> {
    let to_grid = |a: [f64; 2]| [(a[0] - g.origin[0]) / g.resolution, (a[1] - g.origin[1]) / g.resolution];
    let (a, b) = (to_grid(p), to_grid(q));
    let mut out = Vec::new();
    for c in cell_range(a[0].min(b[0]), a[0].max(b[0]), g.cols) {
        let (x0, x1) = (c as f64, c as f64 + 1.0);
        let Some((s0, s1)) = clip(a, b, [x0, f64::NEG_INFINITY], [x1, f64::INFINITY]) else {
            continue;
        };
        let (ya, yb) = (a[1] + s0 * (b[1] - a[1]), a[1] + s1 * (b[1] - a[1]));
        for r in cell_range(ya.min(yb), ya.max(yb), g.rows) {
            if let Some((t0, t1)) = clip(a, b, [x0, r as f64], [x1, r as f64 + 1.0]) {
                out.push(CellSpan { cell: (c, r), t0, t1 });
            }
        }
    }
    out.sort_by(|x, y| x.t0.total_cmp(&y.t0).then(x.cell.cmp(&y.cell)));
    out
}

/// In-grid cells touched by a circle, approximated by a polygon whose chord
/// deviates from the arc by at most a tenth of a cell.
pub fn circle_cells(g: &GridGeometry, center: [f64; 2], radius: f64) -> Vec<(usize, usize)> {
    let sagitta = 0.1 * g.resolution;
    let n = if radius > sagitta {
        let half = (1.0 - sagitta / radius).acos();
        ((std::f64::consts::PI / half).ceil() as usize).max(8)
    } else {
        8
    };
    let pt = |k: usize| {
        let a = std::f64::consts::TAU * k as f64 / n as f64;
        [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
    };
    let mut cells: Vec<(usize, usize)> = (0..n).flat_map(|k| supercover(g, pt(k), pt(k + 1))).map(|s| s.cell).collect();
    cells.sort_unstable();
    cells.dedup();
    cells
}
