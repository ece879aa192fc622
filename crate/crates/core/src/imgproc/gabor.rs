//! Real Gabor filter bank. For each wavelength the responses of all
//! orientations are averaged; since convolution is linear this equals a single
//! convolution with the orientation-averaged kernel, which is what runs here.

use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::raster::Grid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaborParams {
    /// Wavelengths in pixels.
    pub wavelengths: Vec<f64>,
    /// Orientations in radians.
    pub orientations: Vec<f64>,
    pub phase: f64,
    /// Standard deviation of the Gaussian envelope, pixels.
    pub sigma: f64,
    /// Spatial aspect ratio of the envelope.
    pub gamma: f64,
    /// Kernel side length, odd.
    pub kernel_size: usize,
}

impl Default for GaborParams {
    fn default() -> Self {
        use std::f64::consts::PI;
        let sigma = 4.0;
        Self {
            wavelengths: vec![0.5, 1.0, 5.0],
            orientations: vec![0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0],
            phase: 0.0,
            sigma,
            gamma: 0.02,
            kernel_size: 2 * (3.0 * sigma).ceil() as usize + 1,
        }
    }
}

impl GaborParams {
    pub fn validate(&self) -> Result<(), Error> {
        if self.kernel_size < 3 || self.kernel_size % 2 == 0 {
            return Err(Error::InvalidInput(format!(
                "gabor kernel size must be odd and >= 3, got {}",
                self.kernel_size
            )));
        }
        if !(self.sigma > 0.0) || self.wavelengths.iter().any(|l| !(*l > 0.0)) {
            return Err(Error::InvalidInput(
                "gabor sigma and wavelengths must be positive".into(),
            ));
        }
        if self.orientations.is_empty() || self.wavelengths.is_empty() {
            return Err(Error::InvalidInput("empty gabor bank".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn radius(&self) -> usize {
        self.kernel_size / 2
    }
}

/// `exp(-(x'^2 + gamma^2 y'^2) / (2 sigma^2)) * cos(2 pi x' / lambda + phase)`,
/// row-major, centre at `(r, r)`.
pub fn gabor_kernel(params: &GaborParams, lambda: f64, theta: f64) -> Grid<f64> {
    let r = params.radius() as i64;
    let (s, c) = theta.sin_cos();
    let two_sigma2 = 2.0 * params.sigma * params.sigma;
    let g2 = params.gamma * params.gamma;
    Grid::from_fn(params.kernel_size, params.kernel_size, |i, j| {
        let x = (i as i64 - r) as f64;
        let y = (j as i64 - r) as f64;
        let xr = x * c + y * s;
        let yr = -x * s + y * c;
        (-(xr * xr + g2 * yr * yr) / two_sigma2).exp()
            * (2.0 * std::f64::consts::PI * xr / lambda + params.phase).cos()
    })
}

pub fn averaged_kernel(params: &GaborParams, lambda: f64) -> Grid<f64> {
    let n = params.kernel_size;
    let mut acc = Grid::new(n, n, 0.0);
    for &theta in &params.orientations {
        let k = gabor_kernel(params, lambda, theta);
        for (a, b) in acc.as_mut_slice().iter_mut().zip(k.as_slice()) {
            *a += b;
        }
    }
    let m = params.orientations.len() as f64;
    acc.map(|v| v / m)
}

/// Reflect-101 index (`dcb|abcd|cba`).
#[inline]
pub(crate) fn reflect101(i: i64, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let n = n as i64;
    let period = 2 * (n - 1);
    let mut m = i.rem_euclid(period);
    if m >= n {
        m = period - m;
    }
    m as usize
}

/// Axis-aligned pixel window `[x0, x1) x [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Window {
    pub fn full(width: usize, height: usize) -> Self {
        Self {
            x0: 0,
            y0: 0,
            x1: width,
            y1: height,
        }
    }

    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }
}

/// 2D convolution of `img` with `kernel` evaluated on `win`, reflect-101 borders.
/// The output grid has the window's size.
pub fn convolve_window(img: &Grid<f32>, kernel: &Grid<f64>, win: Window) -> Grid<f32> {
    let (w, h) = (img.width(), img.height());
    let n = kernel.width();
    let r = (n / 2) as i64;
    let ow = win.width();
    let oh = win.height();
    let pw = ow + n - 1;
    let ph = oh + n - 1;
    // padded source covering the window plus the kernel apron
    let col_map: Vec<usize> = (0..pw)
        .map(|i| reflect101(win.x0 as i64 + i as i64 - r, w))
        .collect();
    let mut padded = vec![0f32; pw * ph];
    for j in 0..ph {
        let src = img.row(reflect101(win.y0 as i64 + j as i64 - r, h));
        let dst = &mut padded[j * pw..(j + 1) * pw];
        for (d, &c) in dst.iter_mut().zip(&col_map) {
            *d = src[c];
        }
    }
    // convolution = correlation with the point-mirrored kernel
    let taps: Vec<f32> = (0..n * n)
        .map(|idx| {
            let (ki, kj) = (idx % n, idx / n);
            kernel[(n - 1 - ki, n - 1 - kj)] as f32
        })
        .collect();
    let mut out = Grid::new(ow, oh, 0f32);
    let mut acc = vec![0f32; ow];
    for y in 0..oh {
        acc.fill(0.0);
        for kj in 0..n {
            let src_row = &padded[(y + kj) * pw..(y + kj + 1) * pw];
            for ki in 0..n {
                let t = taps[kj * n + ki];
                if t == 0.0 {
                    continue;
                }
                let src = &src_row[ki..ki + ow];
                for (a, s) in acc.iter_mut().zip(src) {
                    *a += t * s;
                }
            }
        }
        out.as_mut_slice()[y * ow..(y + 1) * ow].copy_from_slice(&acc);
    }
    out
}

/// Precomputed orientation-averaged kernels, one per wavelength.
#[derive(Debug, Clone)]
pub struct GaborBank {
    params: GaborParams,
    kernels: Vec<Grid<f64>>,
}

impl GaborBank {
    pub fn new(params: GaborParams) -> Result<Self, Error> {
        params.validate()?;
        let kernels = params
            .wavelengths
            .iter()
            .map(|&l| averaged_kernel(&params, l))
            .collect();
        Ok(Self { params, kernels })
    }

    pub fn params(&self) -> &GaborParams {
        &self.params
    }

    pub fn kernels(&self) -> &[Grid<f64>] {
        &self.kernels
    }

    /// One response image per wavelength, restricted to `win`.
    pub fn apply_window(&self, img: &Grid<f32>, win: Window) -> Vec<Grid<f32>> {
        self.kernels
            .iter()
            .map(|k| convolve_window(img, k, win))
            .collect()
    }

    pub fn apply(&self, img: &Grid<f32>) -> Vec<Grid<f32>> {
        self.apply_window(img, Window::full(img.width(), img.height()))
    }
}

/// Smallest `n >= min` whose only prime factors are 2, 3 and 5.
fn fft_size(min: usize) -> usize {
    let mut n = min.max(1);
    loop {
        let mut m = n;
        for p in [2, 3, 5] {
            while m % p == 0 {
                m /= p;
            }
        }
        if m == 1 {
            return n;
        }
        n += 1;
    }
}

/// Full-frame bank responses by FFT for a fixed frame size. Produces the same
/// reflect-101 bordered convolution as [`convolve_window`] up to rounding.
pub struct GaborFft {
    width: usize,
    height: usize,
    radius: usize,
    nw: usize,
    nh: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
    /// Kernel spectra, transposed layout (`nh` contiguous per column).
    spectra: Vec<Vec<Complex<f64>>>,
}

impl std::fmt::Debug for GaborFft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GaborFft")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("fft", &(self.nw, self.nh))
            .finish()
    }
}

impl GaborFft {
    pub fn new(bank: &GaborBank, width: usize, height: usize) -> Self {
        let radius = bank.params.radius();
        let nw = fft_size(width + 2 * radius);
        let nh = fft_size(height + 2 * radius);
        let mut planner = FftPlanner::new();
        let mut me = Self {
            width,
            height,
            radius,
            nw,
            nh,
            row_fwd: planner.plan_fft_forward(nw),
            row_inv: planner.plan_fft_inverse(nw),
            col_fwd: planner.plan_fft_forward(nh),
            col_inv: planner.plan_fft_inverse(nh),
            spectra: Vec::new(),
        };
        let r = radius as i64;
        for k in &bank.kernels {
            let mut buf = vec![Complex::new(0.0, 0.0); nw * nh];
            for j in 0..k.height() {
                for i in 0..k.width() {
                    let x = (i as i64 - r).rem_euclid(nw as i64) as usize;
                    let y = (j as i64 - r).rem_euclid(nh as i64) as usize;
                    buf[y * nw + x] = Complex::new(k[(i, j)], 0.0);
                }
            }
            me.spectra.push(me.forward(buf));
        }
        me
    }

    /// Row-major `nh x nw` buffer to its 2D spectrum in column-major layout.
    fn forward(&self, mut buf: Vec<Complex<f64>>) -> Vec<Complex<f64>> {
        self.row_fwd.process(&mut buf);
        let mut t = transpose(&buf, self.nw, self.nh);
        self.col_fwd.process(&mut t);
        t
    }

    /// Column-major spectrum back to a row-major spatial buffer (unnormalised).
    fn inverse(&self, mut spec: Vec<Complex<f64>>) -> Vec<Complex<f64>> {
        self.col_inv.process(&mut spec);
        let mut buf = transpose(&spec, self.nh, self.nw);
        self.row_inv.process(&mut buf);
        buf
    }

    /// One response image per wavelength over the whole frame.
    pub fn apply(&self, img: &Grid<f32>) -> Vec<Grid<f32>> {
        assert_eq!((img.width(), img.height()), (self.width, self.height), "frame size mismatch");
        let (w, h, r) = (self.width, self.height, self.radius as i64);
        let (nw, nh) = (self.nw, self.nh);
        let mut buf = vec![Complex::new(0.0, 0.0); nw * nh];
        for y in 0..h + 2 * self.radius {
            let src = img.row(reflect101(y as i64 - r, h));
            for x in 0..w + 2 * self.radius {
                buf[y * nw + x] = Complex::new(src[reflect101(x as i64 - r, w)] as f64, 0.0);
            }
        }
        let spec = self.forward(buf);
        let scale = 1.0 / (nw * nh) as f64;
        let mut out = Vec::with_capacity(self.spectra.len());
        // two real responses per inverse transform: a + i b
        for pair in self.spectra.chunks(2) {
            let i = Complex::new(0.0, 1.0);
            let prod: Vec<Complex<f64>> = match pair {
                [a, b] => spec
                    .iter()
                    .zip(a.iter().zip(b))
                    .map(|(s, (ka, kb))| s * ka + i * (s * kb))
                    .collect(),
                [a] => spec.iter().zip(a).map(|(s, ka)| s * ka).collect(),
                _ => unreachable!(),
            };
            let spatial = self.inverse(prod);
            let crop = |im: bool| {
                Grid::from_fn(w, h, |x, y| {
                    let v = spatial[(y + self.radius) * nw + x + self.radius];
                    ((if im { v.im } else { v.re }) * scale) as f32
                })
            };
            out.push(crop(false));
            if pair.len() == 2 {
                out.push(crop(true));
            }
        }
        out
    }
}

fn transpose(src: &[Complex<f64>], w: usize, h: usize) -> Vec<Complex<f64>> {
    let mut dst = vec![Complex::new(0.0, 0.0); w * h];
    const T: usize = 32;
    for y0 in (0..h).step_by(T) {
        for x0 in (0..w).step_by(T) {
            for y in y0..(y0 + T).min(h) {
                for x in x0..(x0 + T).min(w) {
                    dst[x * h + y] = src[y * w + x];
                }
            }
        }
    }
    dst
}

/// Orientation-averaged Gabor responses of an 8-bit gray image, one per wavelength.
pub fn gabor_bank(gray: &Grid<u8>, params: &GaborParams) -> Result<Vec<Grid<f32>>, Error> {
    let bank = GaborBank::new(params.clone())?;
    Ok(bank.apply(&gray.map(|&v| v as f32)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_kernel_size_covers_three_sigma() {
        let p = GaborParams::default();
        assert_eq!(p.kernel_size, 25);
        assert!(p.validate().is_ok());
        let mut bad = p.clone();
        bad.kernel_size = 24;
        assert!(bad.validate().is_err());
        bad.kernel_size = 1;
        assert!(bad.validate().is_err());
    }

    #[test]
    fn reflect101_indices() {
        let idx: Vec<usize> = (-3..8).map(|i| reflect101(i, 5)).collect();
        assert_eq!(idx, vec![3, 2, 1, 0, 1, 2, 3, 4, 3, 2, 1]);
        assert_eq!(reflect101(-40, 3), reflect101(-40 + 4 * 10, 3));
    }

    #[test]
    fn uniform_image_gives_constant_response() {
        let g = Grid::new(40, 30, 120u8);
        for resp in gabor_bank(&g, &GaborParams::default()).unwrap() {
            let first = resp.as_slice()[0];
            assert!(resp
                .as_slice()
                .iter()
                .all(|v| (v - first).abs() <= 1e-3 * first.abs().max(1.0)));
        }
    }

    #[test]
    fn averaged_kernel_is_invariant_under_quarter_turn() {
        let p = GaborParams::default();
        for &l in &p.wavelengths {
            let k = averaged_kernel(&p, l);
            let n = k.width();
            for j in 0..n {
                for i in 0..n {
                    // (x, y) -> (-y, x)
                    let rot = k[(n - 1 - j, i)];
                    assert!((k[(i, j)] - rot).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn window_matches_full_image_crop() {
        let img = Grid::from_fn(60, 50, |x, y| ((x * 7 + y * 13) % 29) as f32);
        let bank = GaborBank::new(GaborParams::default()).unwrap();
        let full = bank.apply(&img);
        let win = Window {
            x0: 5,
            y0: 20,
            x1: 41,
            y1: 50,
        };
        let part = bank.apply_window(&img, win);
        for (f, p) in full.iter().zip(&part) {
            for y in 0..win.height() {
                for x in 0..win.width() {
                    assert_eq!(f[(x + win.x0, y + win.y0)], p[(x, y)]);
                }
            }
        }
    }

    #[test]
    fn fft_matches_direct_convolution() {
        let img = Grid::from_fn(73, 41, |x, y| (((x * 31 + y * 17) % 53) as f32) * 3.0 + (x as f32 * 0.3).sin() * 20.0);
        let bank = GaborBank::new(GaborParams::default()).unwrap();
        let direct = bank.apply(&img);
        let fft = GaborFft::new(&bank, 73, 41).apply(&img);
        assert_eq!(fft.len(), 3);
        for (d, f) in direct.iter().zip(&fft) {
            for (a, b) in d.as_slice().iter().zip(f.as_slice()) {
                assert!((a - b).abs() <= 1e-3 * (1.0 + a.abs()), "{a} {b}");
            }
        }
    }

    #[test]
    fn fft_sizes_are_smooth() {
        assert_eq!(fft_size(776), 800);
        assert_eq!(fft_size(504), 512);
        assert_eq!(fft_size(1), 1);
    }
}
