//! Canny edge detector: 5x5 Gaussian (sigma 1.4), 3x3 Sobel, non-maximum
//! suppression, hysteresis with `low = high / 2`. Borders are replicated.

use std::collections::VecDeque;

use crate::raster::Grid;

pub const SMOOTHING_SIGMA: f64 = 1.4;
pub const LOW_HIGH_RATIO: f64 = 0.5;

fn gaussian_taps() -> [f32; 5] {
    let mut taps = [0f64; 5];
    for (i, t) in taps.iter_mut().enumerate() {
        let x = i as f64 - 2.0;
        *t = (-x * x / (2.0 * SMOOTHING_SIGMA * SMOOTHING_SIGMA)).exp();
    }
    let sum: f64 = taps.iter().sum();
    taps.map(|t| (t / sum) as f32)
}

#[inline]
fn clamp_idx(i: isize, n: usize) -> usize {
    i.clamp(0, n as isize - 1) as usize
}

/// Separable 5x5 Gaussian blur.
pub fn smooth(gray: &Grid<u8>) -> Grid<f32> {
    let (w, h) = (gray.width(), gray.height());
    let taps = gaussian_taps();
    let mut tmp = Grid::new(w, h, 0f32);
    for y in 0..h {
        let row = gray.row(y);
        for x in 0..w {
            let mut acc = 0f32;
            for (k, t) in taps.iter().enumerate() {
                acc += t * row[clamp_idx(x as isize + k as isize - 2, w)] as f32;
            }
            tmp[(x, y)] = acc;
        }
    }
    let mut out = Grid::new(w, h, 0f32);
    for y in 0..h {
        for (k, t) in taps.iter().enumerate() {
            let src = tmp.row(clamp_idx(y as isize + k as isize - 2, h));
            let dst = &mut out.as_mut_slice()[y * w..(y + 1) * w];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += t * s;
            }
        }
    }
    out
}

/// Sobel derivatives of an already smoothed image.
pub fn sobel(img: &Grid<f32>) -> (Grid<f32>, Grid<f32>) {
    let (w, h) = (img.width(), img.height());
    let mut gx = Grid::new(w, h, 0f32);
    let mut gy = Grid::new(w, h, 0f32);
    for y in 0..h {
        let ym = img.row(clamp_idx(y as isize - 1, h));
        let y0 = img.row(y);
        let yp = img.row(clamp_idx(y as isize + 1, h));
        for x in 0..w {
            let xm = clamp_idx(x as isize - 1, w);
            let xp = clamp_idx(x as isize + 1, w);
            gx[(x, y)] = (ym[xp] + 2.0 * y0[xp] + yp[xp]) - (ym[xm] + 2.0 * y0[xm] + yp[xm]);
            gy[(x, y)] = (yp[xm] + 2.0 * yp[x] + yp[xp]) - (ym[xm] + 2.0 * ym[x] + ym[xp]);
        }
    }
    (gx, gy)
}

/// L2 Sobel magnitude of the smoothed image; edges can only appear where this is non-zero.
pub fn gradient_magnitude(gray: &Grid<u8>) -> Grid<f32> {
    let (gx, gy) = sobel(&smooth(gray));
    let data = gx
        .as_slice()
        .iter()
        .zip(gy.as_slice())
        .map(|(a, b)| (a * a + b * b).sqrt())
        .collect();
    Grid::from_vec(gray.width(), gray.height(), data)
}

/// Binary edge mask (1 = edge) with hysteresis `high = threshold`, `low = threshold / 2`.
pub fn canny(gray: &Grid<u8>, threshold: f64) -> Grid<u8> {
    let (w, h) = (gray.width(), gray.height());
    let (gx, gy) = sobel(&smooth(gray));
    let mag: Vec<f32> = gx
        .as_slice()
        .iter()
        .zip(gy.as_slice())
        .map(|(a, b)| (a * a + b * b).sqrt())
        .collect();
    let at = |x: isize, y: isize| -> f32 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };

    // tan(22.5 deg) and tan(67.5 deg)
    const T1: f32 = 0.414_213_57;
    const T2: f32 = 2.414_213_6;
    let mut nms = vec![0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = mag[i];
            if m <= 0.0 {
                continue;
            }
            let (dx, dy) = (gx.as_slice()[i], gy.as_slice()[i]);
            let (ax, ay) = (dx.abs(), dy.abs());
            let (xi, yi) = (x as isize, y as isize);
            let (a, b) = if ay <= T1 * ax {
                (at(xi + 1, yi), at(xi - 1, yi))
            } else if ay >= T2 * ax {
                (at(xi, yi + 1), at(xi, yi - 1))
            } else if (dx > 0.0) == (dy > 0.0) {
                (at(xi + 1, yi + 1), at(xi - 1, yi - 1))
            } else {
                (at(xi - 1, yi + 1), at(xi + 1, yi - 1))
            };
            if m > a && m >= b {
                nms[i] = m;
            }
        }
    }

    let high = threshold as f32;
    let low = (threshold * LOW_HIGH_RATIO) as f32;
    let mut out = Grid::new(w, h, 0u8);
    let mut queue = VecDeque::new();
    for (i, &m) in nms.iter().enumerate() {
        if m > 0.0 && m >= high {
            out.as_mut_slice()[i] = 1;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if out.as_slice()[j] == 0 && nms[j] > 0.0 && nms[j] >= low {
                    out.as_mut_slice()[j] = 1;
                    queue.push_back(j);
                }
            }
        }
    }
    out
}
