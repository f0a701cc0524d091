use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::path::Path;

use crate::error::{Error, Result};

/// A domain given by a bitmap of cells. Cell `(i, j)` covers
/// `[x_min + i hx, x_min + (i+1) hx] × [y_min + j hy, y_min + (j+1) hy]`;
/// rows are stored from the bottom edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMask {
    /// `[x_min, x_max, y_min, y_max]`.
    pub bbox: [f64; 4],
    pub width: usize,
    pub height: usize,
    #[serde(skip)]
    pub inside: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct MaskHeader {
    bbox: [f64; 4],
    width: usize,
    height: usize,
}

impl GridMask {
    /// Checks the bitmap: no inside cell on the frame and a single
    /// 4-connected inside component.
    pub fn new(bbox: [f64; 4], width: usize, height: usize, inside: Vec<bool>) -> Result<Self> {
        let m = GridMask {
            bbox,
            width,
            height,
            inside,
        };
        m.validate()?;
        Ok(m)
    }

    /// Rasterizes a membership predicate at cell centers.
    pub fn rasterize<F>(bbox: [f64; 4], width: usize, height: usize, contains: F) -> Result<Self>
    where
        F: Fn(Complex64) -> bool,
    {
        let mut inside = vec![false; width * height];
        for j in 0..height {
            for i in 0..width {
                inside[j * width + i] = contains(cell_center(&bbox, width, height, i, j));
            }
        }
        GridMask::new(bbox, width, height, inside)
    }

    pub fn validate(&self) -> Result<()> {
        let (w, h) = (self.width, self.height);
        if w < 3 || h < 3 || self.inside.len() != w * h {
            return Err(Error::Invalid(format!("mask of {w}×{h} cells with {} bits", self.inside.len())));
        }
        let [x0, x1, y0, y1] = self.bbox;
        if !(x1 > x0 && y1 > y0 && self.bbox.iter().all(|v| v.is_finite())) {
            return Err(Error::Invalid(format!("bad bounding box {:?}", self.bbox)));
        }
        let on_frame = (0..w).any(|i| self.at(i, 0) || self.at(i, h - 1))
            || (0..h).any(|j| self.at(0, j) || self.at(w - 1, j));
        if on_frame {
            return Err(Error::Invalid("mask touches its bounding box".into()));
        }
        let Some(start) = self.inside.iter().position(|&b| b) else {
            return Err(Error::Invalid("empty mask".into()));
        };
        let reached = flood_fill(w, h, |k| self.inside[k], start);
        let total = self.inside.iter().filter(|&&b| b).count();
        let filled = reached.iter().filter(|&&b| b).count();
        if filled != total {
            return Err(Error::Invalid(format!(
                "mask is disconnected: {filled} of {total} cells reachable"
            )));
        }
        Ok(())
    }

    pub fn cell_size(&self) -> (f64, f64) {
        (
            (self.bbox[1] - self.bbox[0]) / self.width as f64,
            (self.bbox[3] - self.bbox[2]) / self.height as f64,
        )
    }

    pub fn at(&self, i: usize, j: usize) -> bool {
        self.inside[j * self.width + i]
    }

    pub fn center(&self, i: usize, j: usize) -> Complex64 {
        cell_center(&self.bbox, self.width, self.height, i, j)
    }

    /// The cell containing `z`, if it lies in the bounding box.
    pub fn cell_of(&self, z: Complex64) -> Option<(usize, usize)> {
        let (hx, hy) = self.cell_size();
        let u = (z.re - self.bbox[0]) / hx;
        let v = (z.im - self.bbox[2]) / hy;
        if !(u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64) {
            return None;
        }
        Some((u as usize, v as usize))
    }

    pub fn contains(&self, z: Complex64) -> bool {
        self.cell_of(z).is_some_and(|(i, j)| self.at(i, j))
    }

    /// `inf |z|` over the union of inside cells.
    pub fn inf_modulus(&self) -> f64 {
        let (hx, hy) = self.cell_size();
        let mut best = f64::INFINITY;
        for j in 0..self.height {
            for i in 0..self.width {
                if !self.at(i, j) {
                    continue;
                }
                let c = self.center(i, j);
                let dx = (c.re.abs() - hx / 2.0).max(0.0);
                let dy = (c.im.abs() - hy / 2.0).max(0.0);
                best = best.min(dx.hypot(dy));
            }
        }
        best
    }

    /// Writes `stem.pbm` (binary, 1 = inside, top row first) and
    /// `stem.json` with the bounding box.
    pub fn write(&self, stem: &Path) -> Result<()> {
        let header = MaskHeader {
            bbox: self.bbox,
            width: self.width,
            height: self.height,
        };
        std::fs::write(stem.with_extension("json"), serde_json::to_string_pretty(&header)?)?;
        let mut bytes = format!("P4\n{} {}\n", self.width, self.height).into_bytes();
        let row_bytes = self.width.div_ceil(8);
        for j in (0..self.height).rev() {
            let mut row = vec![0u8; row_bytes];
            for i in 0..self.width {
                if self.at(i, j) {
                    row[i / 8] |= 0x80 >> (i % 8);
                }
            }
            bytes.extend(row);
        }
        std::fs::write(stem.with_extension("pbm"), bytes)?;
        Ok(())
    }

    /// Reads the pair written by [`GridMask::write`]; plain (`P1`) bitmaps
    /// are accepted too.
    pub fn read(stem: &Path) -> Result<Self> {
        let header: MaskHeader = serde_json::from_str(&std::fs::read_to_string(stem.with_extension("json"))?)?;
        let bytes = std::fs::read(stem.with_extension("pbm"))?;
        let (binary, w, h, body) = parse_pbm_header(&bytes)?;
        if (w, h) != (header.width, header.height) {
            return Err(Error::Parse(format!(
                "bitmap is {w}×{h} but the header says {}×{}",
                header.width, header.height
            )));
        }
        let mut top_down = Vec::with_capacity(w * h);
        if binary {
            let row_bytes = w.div_ceil(8);
            if body.len() < row_bytes * h {
                return Err(Error::Parse("truncated bitmap".into()));
            }
            for r in 0..h {
                let row = &body[r * row_bytes..(r + 1) * row_bytes];
                top_down.extend((0..w).map(|i| row[i / 8] & (0x80 >> (i % 8)) != 0));
            }
        } else {
            top_down.extend(body.iter().filter(|b| matches!(b, b'0' | b'1')).map(|&b| b == b'1'));
            if top_down.len() != w * h {
                return Err(Error::Parse("plain bitmap has the wrong number of bits".into()));
            }
        }
        let mut inside = vec![false; w * h];
        for r in 0..h {
            let j = h - 1 - r;
            inside[j * w..(j + 1) * w].copy_from_slice(&top_down[r * w..(r + 1) * w]);
        }
        GridMask::new(header.bbox, w, h, inside)
    }
}

pub(crate) fn cell_center(bbox: &[f64; 4], width: usize, height: usize, i: usize, j: usize) -> Complex64 {
    let hx = (bbox[1] - bbox[0]) / width as f64;
    let hy = (bbox[3] - bbox[2]) / height as f64;
    Complex64::new(bbox[0] + (i as f64 + 0.5) * hx, bbox[2] + (j as f64 + 0.5) * hy)
}

/// Returns `(is_binary, width, height, raster)`.
fn parse_pbm_header(bytes: &[u8]) -> Result<(bool, usize, usize, &[u8])> {
    let bad = || Error::Parse("not a PBM bitmap".into());
    let binary = match bytes.get(..2) {
        Some(b"P4") => true,
        Some(b"P1") => false,
        _ => return Err(bad()),
    };
    let mut pos = 2;
    let mut fields = Vec::new();
    while fields.len() < 2 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if start == pos {
            return Err(bad());
        }
        let s = std::str::from_utf8(&bytes[start..pos]).map_err(|_| bad())?;
        fields.push(s.parse::<usize>().map_err(|_| bad())?);
    }
    // One whitespace byte separates the header from the raster.
    pos += 1;
    Ok((binary, fields[0], fields[1], bytes.get(pos..).unwrap_or(&[])))
}

/// 4-connected flood fill over a `width × height` grid.
pub(crate) fn flood_fill<F: Fn(usize) -> bool>(width: usize, height: usize, member: F, start: usize) -> Vec<bool> {
    let mut seen = vec![false; width * height];
    if !member(start) {
        return seen;
    }
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(k) = queue.pop_front() {
        let (i, j) = (k % width, k / width);
        let mut visit = |n: usize| {
            if !seen[n] && member(n) {
                seen[n] = true;
                queue.push_back(n);
            }
        };
        if i > 0 {
            visit(k - 1);
        }
        if i + 1 < width {
            visit(k + 1);
        }
        if j > 0 {
            visit(k - width);
        }
        if j + 1 < height {
            visit(k + width);
        }
    }
    seen
}
