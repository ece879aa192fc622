//! Dense row-major 2D grids and the PGM reader/writer shared by every module
//! that dumps rasters.
//!
//! PGM files are written as binary `P5`. 8-bit files carry one byte per
//! sample; 16-bit files (`maxval` 65535) carry two bytes per sample in
//! big-endian order, as the Netpbm format requires.

use std::fs;
use std::io::{self, BufRead, BufReader, Read, Write};
use std::ops::{Index, IndexMut};
use std::path::Path;

use serde::{Deserialize, Serialize};

/// Row-major 2D container. `(x, y)` indexes column `x` of row `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn new(width: usize, height: usize, fill: T) -> Self {
        Self {
            width,
            height,
            data: vec![fill; width * height],
        }
    }
}

impl<T> Grid<T> {
    /// Wraps an existing buffer; panics if its length does not match.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height, "grid buffer size mismatch");
        Self {
            width,
            height,
            data,
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn in_bounds(&self, x: i64, y: i64) -> bool {
        x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<&T> {
        if x < self.width && y < self.height {
            Some(&self.data[y * self.width + x])
        } else {
            None
        }
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn row(&self, y: usize) -> &[T] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Iterates `(x, y, &value)` in row-major order.
    pub fn indexed(&self) -> impl Iterator<Item = (usize, usize, &T)> {
        let w = self.width;
        self.data.iter().enumerate().map(move |(i, v)| (i % w, i / w, v))
    }
}

impl<T> Index<(usize, usize)> for Grid<T> {
    type Output = T;

    #[inline]
    fn index(&self, (x, y): (usize, usize)) -> &T {
        debug_assert!(x < self.width && y < self.height);
        &self.data[y * self.width + x]
    }
}

impl<T> IndexMut<(usize, usize)> for Grid<T> {
    #[inline]
    fn index_mut(&mut self, (x, y): (usize, usize)) -> &mut T {
        debug_assert!(x < self.width && y < self.height);
        &mut self.data[y * self.width + x]
    }
}

/// Writes an 8-bit binary PGM.
pub fn write_pgm8(path: &Path, grid: &Grid<u8>) -> io::Result<()> {
    let mut out = Vec::with_capacity(grid.len() + 32);
    write!(out, "P5\n{} {}\n255\n", grid.width(), grid.height())?;
    out.extend_from_slice(grid.as_slice());
    write_atomic(path, &out)
}

/// Writes a 16-bit binary PGM (big-endian samples).
pub fn write_pgm16(path: &Path, grid: &Grid<u16>) -> io::Result<()> {
    let mut out = Vec::with_capacity(grid.len() * 2 + 32);
    write!(out, "P5\n{} {}\n65535\n", grid.width(), grid.height())?;
    for v in grid.as_slice() {
        out.extend_from_slice(&v.to_be_bytes());
    }
    write_atomic(path, &out)
}

/// A decoded PGM; `maxval` tells which of the two sample widths was stored.
#[derive(Debug, Clone)]
pub struct Pgm {
    pub maxval: u16,
    pub samples: Grid<u16>,
}

pub fn read_pgm(path: &Path) -> io::Result<Pgm> {
    let mut reader = BufReader::new(fs::File::open(path)?);
    let magic = next_token(&mut reader)?;
    if magic != "P5" {
        return Err(invalid(format!("{}: not a binary PGM", path.display())));
    }
    let width: usize = parse_token(&mut reader)?;
    let height: usize = parse_token(&mut reader)?;
    let maxval: u32 = parse_token(&mut reader)?;
    if maxval == 0 || maxval > 65535 {
        return Err(invalid(format!("bad PGM maxval {maxval}")));
    }
    let wide = maxval > 255;
    let mut raw = vec![0u8; width * height * if wide { 2 } else { 1 }];
    reader.read_exact(&mut raw)?;
    let data = if wide {
        raw.chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]))
            .collect()
    } else {
        raw.into_iter().map(u16::from).collect()
    };
    Ok(Pgm {
        maxval: maxval as u16,
        samples: Grid::from_vec(width, height, data),
    })
}

/// Writes `bytes` to a sibling temp file and renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| invalid(format!("{}: no file name", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(file_name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = match dir {
        Some(d) => d.join(&tmp_name),
        None => tmp_name.into(),
    };
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all().ok();
    }
    fs::rename(&tmp, path)
}

fn invalid(msg: String) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, msg)
}

fn next_token<R: BufRead>(r: &mut R) -> io::Result<String> {
    let mut tok = String::new();
    let mut byte = [0u8; 1];
    loop {
        r.read_exact(&mut byte)?;
        let c = byte[0] as char;
        if c == '#' {
            let mut skip = String::new();
            r.read_line(&mut skip)?;
            if !tok.is_empty() {
                return Ok(tok);
            }
            continue;
        }
        if c.is_ascii_whitespace() {
            if tok.is_empty() {
                continue;
            }
            return Ok(tok);
        }
        tok.push(c);
    }
}

fn parse_token<R: BufRead, T: std::str::FromStr>(r: &mut R) -> io::Result<T> {
    let tok = next_token(r)?;
    tok.parse()
        .map_err(|_| invalid(format!("bad PGM header token {tok:?}")))
}
