//! Result overlays: translucent per-id mask colors with id labels.

use std::collections::BTreeMap;
use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::Result;
use crate::io::{frame_path, ResultRecord};
use crate::mask::{mask_bbox, BinaryMask};

/// Mask tint opacity.
pub const ALPHA: f64 = 0.5;

/// Deterministic color for an object id: golden-ratio hue steps.
pub fn id_color(object_id: u32) -> [u8; 3] {
    let hue = (f64::from(object_id) * 0.618_033_988_749_895).fract() * 6.0;
    let (s, v) = (0.8, 0.95);
    let c = v * s;
    let x = c * (1.0 - (hue % 2.0 - 1.0).abs());
    let (r, g, b) = match hue as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    let to = |u: f64| ((u + m) * 255.0).round() as u8;
    [to(r), to(g), to(b)]
}

/// 3x5 digit glyphs, one row per entry, bit 2 = left column.
const DIGITS: [[u8; 5]; 10] = [
    [7, 5, 5, 5, 7],
    [2, 6, 2, 2, 7],
    [7, 1, 7, 4, 7],
    [7, 1, 7, 1, 7],
    [5, 5, 7, 1, 1],
    [7, 4, 7, 1, 7],
    [7, 4, 7, 5, 7],
    [7, 1, 1, 1, 1],
    [7, 5, 7, 5, 7],
    [7, 5, 7, 1, 7],
];

fn label_pixels(text: &str, x0: u32, y0: u32, scale: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for (k, ch) in text.chars().enumerate() {
        let Some(d) = ch.to_digit(10) else { continue };
        let gx = x0 + k as u32 * 4 * scale;
        for (row, bits) in DIGITS[d as usize].iter().enumerate() {
            for col in 0..3u32 {
                if bits & (4 >> col) == 0 {
                    continue;
                }
                for sy in 0..scale {
                    for sx in 0..scale {
                        out.push((gx + col * scale + sx, y0 + row as u32 * scale + sy));
                    }
                }
            }
        }
    }
    out
}

/// Tints the mask pixels and writes the id, clipped to the mask, in white.
pub fn draw_object(img: &mut RgbImage, object_id: u32, mask: &BinaryMask) -> Result<()> {
    let color = id_color(object_id);
    let (w, h) = img.dimensions();
    for (start, len) in mask.foreground_spans() {
        for k in start..start + len {
            let (x, y) = ((k / u64::from(mask.height())) as u32, (k % u64::from(mask.height())) as u32);
            if x >= w || y >= h {
                continue;
            }
            let p = img.get_pixel_mut(x, y);
            for c in 0..3 {
                p.0[c] = (f64::from(p.0[c]) * (1.0 - ALPHA) + f64::from(color[c]) * ALPHA).round() as u8;
            }
        }
    }
    if mask.is_empty() {
        return Ok(());
    }
    let b = mask_bbox(mask)?;
    let scale = if b.h >= 24 { 2 } else { 1 };
    for (x, y) in label_pixels(&object_id.to_string(), b.x + 1, b.y + 1, scale) {
        if x < w && y < h && mask.get(x, y) {
            img.put_pixel(x, y, Rgb([255, 255, 255]));
        }
    }
    Ok(())
}

pub fn overlay(base: &RgbImage, objects: &[(u32, BinaryMask)]) -> Result<RgbImage> {
    let mut img = base.clone();
    for (id, m) in objects {
        draw_object(&mut img, *id, m)?;
    }
    Ok(img)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VizSummary {
    pub written: Vec<u32>,
    /// Result frames without an image.
    pub missing: Vec<u32>,
}

/// Writes `out_dir/{frame:06}.png` for every frame that has an image. Frames
/// are the result frames plus the consecutive images from frame 0.
pub fn render_sequence(records: &[ResultRecord], image_pattern: &str, out_dir: impl AsRef<Path>) -> Result<VizSummary> {
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir)?;
    let mut by_frame: BTreeMap<u32, Vec<(u32, BinaryMask)>> = BTreeMap::new();
    for r in records {
        by_frame
            .entry(r.frame)
            .or_default()
            .push((r.object_id, r.decode_mask()?));
    }
    let mut frame = 0;
    while frame_path(image_pattern, frame).is_file() {
        by_frame.entry(frame).or_default();
        frame += 1;
        if frame_path(image_pattern, 0) == frame_path(image_pattern, 1) {
            break;
        }
    }
    let mut summary = VizSummary::default();
    for (frame, objects) in by_frame {
        let path = frame_path(image_pattern, frame);
        if !path.is_file() {
            summary.missing.push(frame);
            continue;
        }
        let base = image::open(&path)?.to_rgb8();
        overlay(&base, &objects)?.save(out_dir.join(format!("{frame:06}.png")))?;
        summary.written.push(frame);
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::{rle_encode, BBox};

    #[test]
    fn colors_are_stable_and_distinct() {
        assert_eq!(id_color(1001), id_color(1001));
        let cs: Vec<[u8; 3]> = (1001..1011).map(id_color).collect();
        for a in 0..cs.len() {
            for b in a + 1..cs.len() {
                assert_ne!(cs[a], cs[b]);
            }
        }
    }

    #[test]
    fn only_mask_pixels_change() {
        let base = RgbImage::from_fn(30, 20, |x, y| Rgb([x as u8 * 3, y as u8 * 5, 40]));
        let mask = BinaryMask::from_box(30, 20, &BBox::new(4, 3, 12, 9));
        let out = overlay(&base, &[(1001, mask.clone())]).unwrap();
        for (x, y, p) in out.enumerate_pixels() {
            let changed = p != base.get_pixel(x, y);
            assert_eq!(changed, mask.get(x, y), "pixel {x},{y}");
        }
        assert_eq!(overlay(&base, &[]).unwrap(), base);
    }

    #[test]
    fn label_glyphs() {
        let px = label_pixels("1", 0, 0, 1);
        // glyph "1": 2,6,2,2,7 -> 1+2+1+1+3 pixels
        assert_eq!(px.len(), 8);
        assert!(label_pixels("x", 0, 0, 1).is_empty());
    }

    #[test]
    fn renders_sequence_and_reports_missing() {
        let dir = tempfile::tempdir().unwrap();
        let pat = dir.path().join("{frame:02}.png");
        let pat = pat.to_str().unwrap();
        for f in 0..2 {
            RgbImage::from_pixel(8, 6, Rgb([10, 20, 30])).save(frame_path(pat, f)).unwrap();
        }
        let m = BinaryMask::from_box(8, 6, &BBox::new(1, 1, 3, 3));
        let rec = |frame| ResultRecord { frame, object_id: 2001, class: 2, img_h: 6, img_w: 8, rle: rle_encode(&m) };
        let out = dir.path().join("out");
        let s = render_sequence(&[rec(1), rec(5)], pat, &out).unwrap();
        assert_eq!(s.written, vec![0, 1]);
        assert_eq!(s.missing, vec![5]);
        let f0 = image::open(out.join("000000.png")).unwrap().to_rgb8();
        assert!(f0.pixels().all(|p| p.0 == [10, 20, 30]));
    }
}
