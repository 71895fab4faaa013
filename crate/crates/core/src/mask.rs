//! Binary segment masks stored as column-major run lengths.
//!
//! # Compact RLE strings
//!
//! Masks are exchanged as COCO-style compressed RLE strings. The run list
//! alternates background and foreground, starting with background, over the
//! pixels in column-major order (pixel `(x, y)` has flat index `x * height + y`).
//! Each run count `c[i]` is turned into a signed value `v`:
//!
//! * `v = c[i]` for `i <= 2`
//! * `v = c[i] - c[i - 2]` for `i > 2`
//!
//! `v` is then emitted as little-endian groups of 5 bits. Each group becomes
//! one character `48 + g`, where `g` holds the 5 value bits in its low bits and
//! bit `0x20` is set when more groups follow. The last group carries the sign
//! in bit `0x10`: decoding sign-extends from it.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Axis-aligned box in pixel units; `(x, y)` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct BBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BBox {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }

    /// Center of the box in continuous pixel coordinates.
    pub fn center(&self) -> (f64, f64) {
        (
            f64::from(self.x) + f64::from(self.w) / 2.0,
            f64::from(self.y) + f64::from(self.h) / 2.0,
        )
    }
}

/// Intersection-over-union of two rectangles.
pub fn box_iou(a: &BBox, b: &BBox) -> f64 {
    let ix0 = a.x.max(b.x);
    let iy0 = a.y.max(b.y);
    let ix1 = (a.x + a.w).min(b.x + b.w);
    let iy1 = (a.y + a.h).min(b.y + b.h);
    let inter = if ix1 > ix0 && iy1 > iy0 {
        u64::from(ix1 - ix0) * u64::from(iy1 - iy0)
    } else {
        0
    };
    let union = a.area() + b.area() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// A `width x height` binary mask in canonical run-length form.
///
/// `runs` alternate background/foreground starting with background. Only the
/// first run may be zero, and the runs sum to `width * height`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: u32,
    height: u32,
    runs: Vec<u32>,
}

impl BinaryMask {
    pub fn empty(width: u32, height: u32) -> Self {
        Self {
            width,
            height,
            runs: vec![width * height],
        }
    }

    pub fn full(width: u32, height: u32) -> Self {
        let n = width * height;
        let runs = if n == 0 { vec![0] } else { vec![0, n] };
        Self {
            width,
            height,
            runs,
        }
    }

    /// Builds a mask from a run list, folding away zero-length interior runs.
    pub fn from_runs(width: u32, height: u32, runs: &[u32]) -> Result<Self> {
        let total: u64 = runs.iter().map(|&r| u64::from(r)).sum();
        let expected = u64::from(width) * u64::from(height);
        if total != expected {
            return Err(Error::Integrity(format!(
                "runs sum to {total}, expected {width}x{height} = {expected}"
            )));
        }
        let mut builder = RunBuilder::default();
        for (i, &r) in runs.iter().enumerate() {
            builder.push(i % 2 == 1, r);
        }
        Ok(Self {
            width,
            height,
            runs: builder.finish(),
        })
    }

    /// Rasterizes `f(x, y)` over the whole image.
    pub fn from_fn(width: u32, height: u32, mut f: impl FnMut(u32, u32) -> bool) -> Self {
        let mut builder = RunBuilder::default();
        for x in 0..width {
            for y in 0..height {
                builder.push(f(x, y), 1);
            }
        }
        Self {
            width,
            height,
            runs: builder.finish(),
        }
    }

    /// Builds a mask from a dense column-major pixel array.
    pub fn from_column_major(width: u32, height: u32, pixels: &[bool]) -> Result<Self> {
        if pixels.len() as u64 != u64::from(width) * u64::from(height) {
            return Err(Error::Integrity(format!(
                "{} pixels for a {width}x{height} mask",
                pixels.len()
            )));
        }
        let mut builder = RunBuilder::default();
        for &p in pixels {
            builder.push(p, 1);
        }
        Ok(Self {
            width,
            height,
            runs: builder.finish(),
        })
    }

    /// Filled rectangle, clipped to the image.
    pub fn from_box(width: u32, height: u32, b: &BBox) -> Self {
        let x1 = (b.x + b.w).min(width);
        let y1 = (b.y + b.h).min(height);
        Self::from_fn(width, height, |x, y| {
            x >= b.x && x < x1 && y >= b.y && y < y1
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn runs(&self) -> &[u32] {
        &self.runs
    }

    /// Number of foreground pixels.
    pub fn area(&self) -> u64 {
        self.runs
            .iter()
            .skip(1)
            .step_by(2)
            .map(|&r| u64::from(r))
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.area() == 0
    }

    /// Foreground spans as `(flat_start, len)` in column-major order.
    pub fn foreground_spans(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        let mut offset = 0u64;
        self.runs.iter().enumerate().filter_map(move |(i, &r)| {
            let start = offset;
            offset += u64::from(r);
            (i % 2 == 1).then_some((start, u64::from(r)))
        })
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        if x >= self.width || y >= self.height {
            return false;
        }
        let idx = u64::from(x) * u64::from(self.height) + u64::from(y);
        let mut offset = 0u64;
        for (i, &r) in self.runs.iter().enumerate() {
            offset += u64::from(r);
            if idx < offset {
                return i % 2 == 1;
            }
        }
        false
    }

    /// Dense column-major pixel array.
    pub fn to_column_major(&self) -> Vec<bool> {
        let mut out = Vec::with_capacity((self.width * self.height) as usize);
        for (i, &r) in self.runs.iter().enumerate() {
            out.extend(std::iter::repeat_n(i % 2 == 1, r as usize));
        }
        out
    }

    fn check_same_size(&self, other: &Self) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::DimensionMismatch {
                a_width: self.width,
                a_height: self.height,
                b_width: other.width,
                b_height: other.height,
            });
        }
        Ok(())
    }

    /// Number of pixels set in both masks.
    pub fn intersection_area(&self, other: &Self) -> Result<u64> {
        self.check_same_size(other)?;
        let mut inter = 0u64;
        walk_runs(&self.runs, &other.runs, |a, b, len| {
            if a && b {
                inter += len;
            }
        });
        Ok(inter)
    }

    /// Pixel-wise OR of two masks.
    pub fn union(&self, other: &Self) -> Result<Self> {
        self.check_same_size(other)?;
        let mut builder = RunBuilder::default();
        walk_runs(&self.runs, &other.runs, |a, b, len| {
            builder.push(a || b, len as u32)
        });
        Ok(Self {
            width: self.width,
            height: self.height,
            runs: builder.finish(),
        })
    }

    /// Tight bounding box of the foreground.
    pub fn bbox(&self) -> Result<BBox> {
        let h = u64::from(self.height);
        let (mut x0, mut y0) = (u64::MAX, u64::MAX);
        let (mut x1, mut y1) = (0u64, 0u64);
        let mut any = false;
        for (start, len) in self.foreground_spans() {
            any = true;
            let end = start + len - 1;
            let (cx0, ry0) = (start / h, start % h);
            let (cx1, ry1) = (end / h, end % h);
            x0 = x0.min(cx0);
            x1 = x1.max(cx1 + 1);
            if cx0 != cx1 {
                // a span crossing a column boundary touches the last row of
                // cx0 and the first row of cx1
                y0 = 0;
                y1 = h;
            } else {
                y0 = y0.min(ry0);
                y1 = y1.max(ry1 + 1);
            }
        }
        if !any {
            return Err(Error::EmptyMask);
        }
        Ok(BBox {
            x: x0 as u32,
            y: y0 as u32,
            w: (x1 - x0) as u32,
            h: (y1 - y0) as u32,
        })
    }

    /// Mask as an 8-bit image (foreground 255).
    pub fn to_gray_image(&self) -> image::GrayImage {
        let mut img = image::GrayImage::new(self.width, self.height);
        for (start, len) in self.foreground_spans() {
            for idx in start..start + len {
                let x = (idx / u64::from(self.height)) as u32;
                let y = (idx % u64::from(self.height)) as u32;
                img.put_pixel(x, y, image::Luma([255]));
            }
        }
        img
    }

    /// Writes the mask as a binary PGM (P5) file.
    pub fn write_pgm(&self, path: impl AsRef<Path>) -> Result<()> {
        let img = self.to_gray_image();
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        write!(file, "P5\n{} {}\n255\n", self.width, self.height)?;
        file.write_all(img.as_raw())?;
        file.flush()?;
        Ok(())
    }

    /// Compact RLE string for this mask.
    pub fn to_rle_string(&self) -> String {
        rle_encode(self)
    }
}

/// Walks two run lists in lockstep, calling `f(a_value, b_value, len)` for
/// every maximal stretch where neither mask changes value.
fn walk_runs(a: &[u32], b: &[u32], mut f: impl FnMut(bool, bool, u64)) {
    let (mut ia, mut ib) = (0usize, 0usize);
    let (mut ra, mut rb) = (0u64, 0u64);
    loop {
        while ra == 0 && ia < a.len() {
            ra = u64::from(a[ia]);
            ia += 1;
        }
        while rb == 0 && ib < b.len() {
            rb = u64::from(b[ib]);
            ib += 1;
        }
        if ra == 0 || rb == 0 {
            break;
        }
        let step = ra.min(rb);
        f(ia % 2 == 0, ib % 2 == 0, step);
        ra -= step;
        rb -= step;
    }
}

#[derive(Default)]
struct RunBuilder {
    runs: Vec<u32>,
    current: bool,
}

impl RunBuilder {
    fn push(&mut self, value: bool, len: u32) {
        if self.runs.is_empty() {
            self.runs.push(0);
        }
        if len == 0 {
            return;
        }
        if value != self.current {
            self.runs.push(0);
            self.current = value;
        }
        *self.runs.last_mut().unwrap() += len;
    }

    fn finish(mut self) -> Vec<u32> {
        if self.runs.is_empty() {
            self.runs.push(0);
        }
        self.runs
    }
}

/// Encodes a mask into its compact RLE string.
pub fn rle_encode(mask: &BinaryMask) -> String {
    let runs = &mask.runs;
    let mut out = String::with_capacity(runs.len() * 2);
    for i in 0..runs.len() {
        let mut x = i64::from(runs[i]);
        if i > 2 {
            x -= i64::from(runs[i - 2]);
        }
        loop {
            let mut c = (x & 0x1f) as u8;
            x >>= 5;
            let more = if c & 0x10 != 0 { x != -1 } else { x != 0 };
            if more {
                c |= 0x20;
            }
            out.push(char::from(c + 48));
            if !more {
                break;
            }
        }
    }
    out
}

/// Decodes a compact RLE string into a `width x height` mask.
pub fn rle_decode(encoded: &str, height: u32, width: u32) -> Result<BinaryMask> {
    let bytes = encoded.as_bytes();
    let mut counts: Vec<i64> = Vec::new();
    let mut p = 0usize;
    while p < bytes.len() {
        let start = p;
        let mut x: i64 = 0;
        let mut k = 0u32;
        loop {
            let Some(&byte) = bytes.get(p) else {
                return Err(Error::RleDecode {
                    offset: start,
                    reason: "unterminated run",
                });
            };
            if !(48..48 + 64).contains(&byte) {
                return Err(Error::RleDecode {
                    offset: p,
                    reason: "character outside the 6-bit alphabet",
                });
            }
            if k >= 12 {
                return Err(Error::RleDecode {
                    offset: p,
                    reason: "run value too long",
                });
            }
            let c = i64::from(byte - 48);
            x |= (c & 0x1f) << (5 * k);
            p += 1;
            k += 1;
            if c & 0x20 == 0 {
                if c & 0x10 != 0 {
                    x |= -1i64 << (5 * k);
                }
                break;
            }
        }
        let m = counts.len();
        if m > 2 {
            x += counts[m - 2];
        }
        if x < 0 || x > i64::from(u32::MAX) {
            return Err(Error::RleDecode {
                offset: start,
                reason: "run length out of range",
            });
        }
        counts.push(x);
    }
    let runs: Vec<u32> = counts.into_iter().map(|c| c as u32).collect();
    BinaryMask::from_runs(width, height, &runs)
}

/// Intersection-over-union of two masks; two empty masks give 0.
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    let inter = a.intersection_area(b)?;
    let union = a.area() + b.area() - inter;
    if union == 0 {
        return Ok(0.0);
    }
    Ok(inter as f64 / union as f64)
}

/// Tight bounding box of the mask foreground; errors on an empty mask.
pub fn mask_bbox(mask: &BinaryMask) -> Result<BBox> {
    mask.bbox()
}
