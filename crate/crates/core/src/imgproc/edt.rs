//! Exact Euclidean distance transform (lower envelope of parabolas, one pass
//! per axis). Intersections are compared as exact rationals, so the squared
//! distances are exact integers.

use std::cmp::Ordering;

use crate::raster::Grid;

/// Marks pixels with no non-zero pixel anywhere in the mask.
pub const NO_FEATURE: u64 = u64::MAX;

#[derive(Debug, Clone, Copy)]
enum Bound {
    NegInf,
    PosInf,
    /// `num / den`, `den > 0`
    Frac(i128, i128),
}

impl Bound {
    fn cmp_frac(&self, num: i128, den: i128) -> Ordering {
        match *self {
            Bound::NegInf => Ordering::Less,
            Bound::PosInf => Ordering::Greater,
            Bound::Frac(n, d) => (n * den).cmp(&(num * d)),
        }
    }
}

/// One-dimensional squared-distance transform of `f`, skipping `NO_FEATURE` sites.
fn transform_1d(f: &[u64], out: &mut [u64], v: &mut Vec<usize>, z: &mut Vec<Bound>) {
    v.clear();
    z.clear();
    let mut sites = f.iter().enumerate().filter(|(_, &x)| x != NO_FEATURE);
    let Some((q0, _)) = sites.next() else {
        out.fill(NO_FEATURE);
        return;
    };
    let key = |q: usize| f[q] as i128 + (q * q) as i128;
    v.push(q0);
    z.push(Bound::NegInf);
    z.push(Bound::PosInf);
    for (q, _) in sites {
        loop {
            let k = v.len() - 1;
            let vk = v[k];
            let num = key(q) - key(vk);
            let den = 2 * (q as i128 - vk as i128);
            // s <= z[k]  <=>  z[k] >= s
            if z[k].cmp_frac(num, den) != Ordering::Less {
                v.pop();
                z.pop();
                continue;
            }
            *z.last_mut().unwrap() = Bound::Frac(num, den);
            v.push(q);
            z.push(Bound::PosInf);
            break;
        }
    }
    let mut k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        // advance while z[k+1] < q
        while z[k + 1].cmp_frac(q as i128, 1) == Ordering::Less {
            k += 1;
        }
        let d = q as i64 - v[k] as i64;
        *o = (d * d) as u64 + f[v[k]];
    }
}

/// Squared distance from every pixel to the nearest non-zero pixel.
pub fn edt_squared(mask: &Grid<u8>) -> Grid<u64> {
    let (w, h) = (mask.width(), mask.height());
    let mut cols = Grid::new(w, h, NO_FEATURE);
    let mut f = vec![0u64; h];
    let mut o = vec![0u64; h];
    let mut v = Vec::new();
    let mut z = Vec::new();
    for x in 0..w {
        for y in 0..h {
            f[y] = if mask[(x, y)] != 0 { 0 } else { NO_FEATURE };
        }
        transform_1d(&f, &mut o, &mut v, &mut z);
        for y in 0..h {
            cols[(x, y)] = o[y];
        }
    }
    let mut out = Grid::new(w, h, NO_FEATURE);
    let mut row_out = vec![0u64; w];
    for y in 0..h {
        transform_1d(cols.row(y), &mut row_out, &mut v, &mut z);
        out.as_mut_slice()[y * w..(y + 1) * w].copy_from_slice(&row_out);
    }
    out
}

/// Euclidean distance to the nearest non-zero pixel; `f64::INFINITY` if there is none.
pub fn edt(mask: &Grid<u8>) -> Grid<f64> {
    edt_squared(mask).map(|&d| {
        if d == NO_FEATURE {
            f64::INFINITY
        } else {
            (d as f64).sqrt()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn center_pixel_3x3() {
        let mut m = Grid::new(3, 3, 0u8);
        m[(1, 1)] = 1;
        let d = edt(&m);
        assert_eq!(d[(1, 1)], 0.0);
        assert_eq!(d[(0, 1)], 1.0);
        assert_eq!(d[(1, 0)], 1.0);
        assert_eq!(d[(0, 0)], 2f64.sqrt());
        assert_eq!(d[(2, 2)], 2f64.sqrt());
    }

    #[test]
    fn all_set_and_all_clear() {
        let d = edt(&Grid::new(5, 4, 1u8));
        assert!(d.as_slice().iter().all(|&v| v == 0.0));
        let d = edt(&Grid::new(5, 4, 0u8));
        assert!(d.as_slice().iter().all(|v| v.is_infinite()));
    }

    #[test]
    fn single_row_and_column() {
        let m = Grid::from_vec(7, 1, vec![0, 0, 1, 0, 0, 0, 1]);
        let d = edt_squared(&m);
        assert_eq!(d.as_slice(), &[4, 1, 0, 1, 4, 1, 0]);
        let m = Grid::from_vec(1, 4, vec![1, 0, 0, 0]);
        assert_eq!(edt_squared(&m).as_slice(), &[0, 1, 4, 9]);
    }
}
