//! Detection, result and image-frame I/O.
//!
//! Detections: `frame class confidence img_h img_w rle`, one per line.
//! Results and ground truth: `frame object_id class img_h img_w rle` with
//! `object_id = class * 1000 + instance`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use image::GrayImage;

use crate::config::{ObjectClass, TrackerConfig};
use crate::error::{Error, Result};
use crate::mask::{rle_decode, rle_encode, BinaryMask};
use crate::tracker::{FrameResult, Segment, TrackedObject};

/// One line of a detections file, kept verbatim enough to re-serialize.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionRecord {
    pub frame: u32,
    pub class: u32,
    pub confidence: f64,
    pub img_h: u32,
    pub img_w: u32,
    pub rle: String,
    confidence_text: String,
}

impl DetectionRecord {
    pub fn new(frame: u32, class: u32, confidence: f64, img_h: u32, img_w: u32, rle: String) -> Self {
        Self {
            frame,
            class,
            confidence,
            img_h,
            img_w,
            rle,
            confidence_text: confidence.to_string(),
        }
    }

    pub fn parse(line: &str) -> std::result::Result<Self, String> {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 6 {
            return Err(format!("expected 6 fields, found {}", f.len()));
        }
        let confidence: f64 = parse_field(f[2], "confidence")?;
        if !(0.0..=1.0).contains(&confidence) {
            return Err(format!("confidence {confidence} outside [0, 1]"));
        }
        Ok(Self {
            frame: parse_field(f[0], "frame")?,
            class: parse_field(f[1], "class")?,
            confidence,
            img_h: parse_field(f[3], "img_h")?,
            img_w: parse_field(f[4], "img_w")?,
            rle: f[5].to_string(),
            confidence_text: f[2].to_string(),
        })
    }

    pub fn to_line(&self) -> String {
        format!(
            "{} {} {} {} {} {}",
            self.frame, self.class, self.confidence_text, self.img_h, self.img_w, self.rle
        )
    }

    pub fn decode_mask(&self) -> Result<BinaryMask> {
        rle_decode(&self.rle, self.img_h, self.img_w)
    }

    /// The record as a tracker input; `None` for unknown classes and empty
    /// masks.
    pub fn to_segment(&self) -> Result<Option<Segment>> {
        let Some(class) = ObjectClass::from_id(self.class) else {
            return Ok(None);
        };
        let mask = self.decode_mask()?;
        if mask.is_empty() {
            return Ok(None);
        }
        Segment::new(self.frame, class, self.confidence, mask).map(Some)
    }
}

fn parse_field<T: std::str::FromStr>(s: &str, name: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|_| format!("invalid {name} {s:?}"))
}

/// Inclusive per-class confidence thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Thresholds {
    pub car: f64,
    pub pedestrian: f64,
}

impl Thresholds {
    /// Keeps every record.
    pub const NONE: Thresholds = Thresholds {
        car: 0.0,
        pedestrian: 0.0,
    };

    pub fn keeps(&self, class: ObjectClass, confidence: f64) -> bool {
        let t = match class {
            ObjectClass::Car => self.car,
            ObjectClass::Pedestrian => self.pedestrian,
        };
        confidence >= t
    }
}

impl From<&TrackerConfig> for Thresholds {
    fn from(c: &TrackerConfig) -> Self {
        Self {
            car: c.conf_car,
            pedestrian: c.conf_ped,
        }
    }
}

fn parse_error(path: &Path, line: usize, reason: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        reason: reason.into(),
    }
}

/// Reads every record of a detections file without filtering.
pub fn read_detection_records(path: impl AsRef<Path>) -> Result<Vec<DetectionRecord>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(DetectionRecord::parse(&line).map_err(|r| parse_error(path, k + 1, r))?);
    }
    Ok(out)
}

pub fn write_detection_records(path: impl AsRef<Path>, records: &[DetectionRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        writeln!(w, "{}", r.to_line())?;
    }
    w.flush()?;
    Ok(())
}

/// Streams a detections file frame by frame. Records must be sorted by
/// frame; low-confidence, unknown-class and empty masks are dropped.
pub struct DetectionReader<R> {
    lines: std::iter::Enumerate<std::io::Lines<R>>,
    path: PathBuf,
    thresholds: Thresholds,
    pending: Option<(u32, Vec<Segment>)>,
    last_frame: Option<u32>,
    done: bool,
}

impl DetectionReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>, thresholds: Thresholds) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path)?;
        Ok(Self::new(BufReader::new(file), path, thresholds))
    }
}

impl<R: BufRead> DetectionReader<R> {
    pub fn new(reader: R, path: impl Into<PathBuf>, thresholds: Thresholds) -> Self {
        Self {
            lines: reader.lines().enumerate(),
            path: path.into(),
            thresholds,
            pending: None,
            last_frame: None,
            done: false,
        }
    }

    /// Next non-blank record as `(frame, kept segment)`.
    fn next_record(&mut self) -> Option<Result<(u32, Option<Segment>)>> {
        loop {
            let (k, line) = self.lines.next()?;
            let line = match line {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            if !line.trim().is_empty() {
                return Some(self.ingest(k + 1, &line));
            }
        }
    }

    fn ingest(&mut self, lineno: usize, line: &str) -> Result<(u32, Option<Segment>)> {
        let rec = DetectionRecord::parse(line).map_err(|r| parse_error(&self.path, lineno, r))?;
        if let Some(prev) = self.last_frame {
            if rec.frame < prev {
                return Err(parse_error(
                    &self.path,
                    lineno,
                    format!("frame {} after frame {prev}; records must be sorted", rec.frame),
                ));
            }
        }
        self.last_frame = Some(rec.frame);
        match ObjectClass::from_id(rec.class) {
            Some(class) if self.thresholds.keeps(class, rec.confidence) => {}
            _ => return Ok((rec.frame, None)),
        }
        let seg = rec
            .to_segment()
            .map_err(|e| parse_error(&self.path, lineno, e.to_string()))?;
        Ok((rec.frame, seg))
    }
}

impl<R: BufRead> Iterator for DetectionReader<R> {
    /// A frame index and its kept segments. Frames whose every record was
    /// dropped still appear, with an empty list.
    type Item = Result<(u32, Vec<Segment>)>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        loop {
            match self.next_record() {
                None => {
                    self.done = true;
                    return self.pending.take().map(Ok);
                }
                Some(Err(e)) => {
                    self.done = true;
                    return Some(Err(e));
                }
                Some(Ok((frame, seg))) => match &mut self.pending {
                    Some((f, segs)) if *f == frame => segs.extend(seg),
                    _ => {
                        if let Some(prev) = self.pending.replace((frame, seg.into_iter().collect())) {
                            return Some(Ok(prev));
                        }
                    }
                },
            }
        }
    }
}

/// Reads and thresholds a whole detections file, grouped by frame in order.
pub fn read_detections(path: impl AsRef<Path>, thresholds: Thresholds) -> Result<Vec<(u32, Vec<Segment>)>> {
    DetectionReader::open(path, thresholds)?.collect()
}

/// One line of a results or ground-truth file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultRecord {
    pub frame: u32,
    pub object_id: u32,
    pub class: u32,
    pub img_h: u32,
    pub img_w: u32,
    pub rle: String,
}

impl ResultRecord {
    pub fn parse(line: &str) -> std::result::Result<Self, String> {
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 6 {
            return Err(format!("expected 6 fields, found {}", f.len()));
        }
        Ok(Self {
            frame: parse_field(f[0], "frame")?,
            object_id: parse_field(f[1], "object_id")?,
            class: parse_field(f[2], "class")?,
            img_h: parse_field(f[3], "img_h")?,
            img_w: parse_field(f[4], "img_w")?,
            rle: f[5].to_string(),
        })
    }

    pub fn to_line(&self) -> String {
        format!(
            "{} {} {} {} {} {}",
            self.frame, self.object_id, self.class, self.img_h, self.img_w, self.rle
        )
    }

    pub fn decode_mask(&self) -> Result<BinaryMask> {
        rle_decode(&self.rle, self.img_h, self.img_w)
    }

    pub fn from_object(frame: u32, obj: &TrackedObject) -> Result<Self> {
        Ok(Self {
            frame,
            object_id: object_id(obj.class, obj.id)?,
            class: obj.class.id(),
            img_h: obj.mask.height(),
            img_w: obj.mask.width(),
            rle: rle_encode(&obj.mask),
        })
    }
}

/// `class * 1000 + instance`.
pub fn object_id(class: ObjectClass, instance: u32) -> Result<u32> {
    if instance >= 1000 {
        return Err(Error::IdOverflow(instance));
    }
    Ok(class.id() * 1000 + instance)
}

/// Flattens per-frame results into records.
pub fn result_records(results: &[FrameResult]) -> Result<Vec<ResultRecord>> {
    let mut out = Vec::new();
    for r in results {
        for obj in &r.objects {
            out.push(ResultRecord::from_object(r.frame, obj)?);
        }
    }
    Ok(out)
}

pub fn write_frame_results<W: Write>(w: &mut W, results: &[FrameResult]) -> Result<()> {
    for r in results {
        for obj in &r.objects {
            writeln!(w, "{}", ResultRecord::from_object(r.frame, obj)?.to_line())?;
        }
    }
    Ok(())
}

pub fn write_results(path: impl AsRef<Path>, results: &[FrameResult]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_frame_results(&mut w, results)?;
    w.flush()?;
    Ok(())
}

pub fn read_result_records(path: impl AsRef<Path>) -> Result<Vec<ResultRecord>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(ResultRecord::parse(&line).map_err(|r| parse_error(path, k + 1, r))?);
    }
    Ok(out)
}

/// Reads a results file back into per-frame results. Frames without any
/// record do not appear.
pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<FrameResult>> {
    let path = path.as_ref();
    let mut out: Vec<FrameResult> = Vec::new();
    for (k, rec) in read_result_records(path)?.into_iter().enumerate() {
        let class = ObjectClass::from_id(rec.class)
            .ok_or_else(|| parse_error(path, k + 1, format!("unknown class {}", rec.class)))?;
        let mask = rec
            .decode_mask()
            .map_err(|e| parse_error(path, k + 1, e.to_string()))?;
        let obj = TrackedObject {
            id: rec.object_id % 1000,
            class,
            mask,
        };
        match out.last_mut() {
            Some(fr) if fr.frame == rec.frame => fr.objects.push(obj),
            _ => out.push(FrameResult {
                frame: rec.frame,
                objects: vec![obj],
            }),
        }
    }
    Ok(out)
}

/// Expands `{frame}` or `{frame:0N}` in a path pattern.
pub fn frame_path(pattern: &str, frame: u32) -> PathBuf {
    let mut out = String::with_capacity(pattern.len() + 8);
    let mut rest = pattern;
    while let Some(start) = rest.find("{frame") {
        out.push_str(&rest[..start]);
        let tail = &rest[start + "{frame".len()..];
        let Some(end) = tail.find('}') else {
            out.push_str(&rest[start..]);
            rest = "";
            break;
        };
        let spec = &tail[..end];
        match spec.strip_prefix(":0").and_then(|w| w.parse::<usize>().ok()) {
            Some(width) => out.push_str(&format!("{frame:0width$}")),
            None if spec.is_empty() => out.push_str(&frame.to_string()),
            None => out.push_str(&rest[start..start + "{frame".len() + end + 1]),
        }
        rest = &tail[end + 1..];
    }
    out.push_str(rest);
    PathBuf::from(out)
}

/// BT.601 luma of an 8-bit RGB pixel.
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b))
        .round()
        .clamp(0.0, 255.0) as u8
}

/// Loads frame `frame` of `pattern` as an 8-bit luma plane, optionally
/// checking its `(width, height)`.
pub fn load_frame(pattern: &str, frame: u32, expected: Option<(u32, u32)>) -> Result<GrayImage> {
    let path = frame_path(pattern, frame);
    if !path.is_file() {
        return Err(Error::MissingFrame { frame, path });
    }
    let rgb = image::open(&path)?.to_rgb8();
    let (w, h) = rgb.dimensions();
    if let Some((want_w, want_h)) = expected {
        if (w, h) != (want_w, want_h) {
            return Err(Error::FrameSize {
                frame,
                got_w: w,
                got_h: h,
                want_w,
                want_h,
            });
        }
    }
    Ok(GrayImage::from_fn(w, h, |x, y| {
        let p = rgb.get_pixel(x, y).0;
        image::Luma([luma(p[0], p[1], p[2])])
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::BBox;

    fn oracle_rle(mask: &BinaryMask) -> String {
        // independent encoder: pixel scan to runs, then 5-bit groups
        let px = mask.to_column_major();
        let mut runs = Vec::new();
        let (mut cur, mut len) = (false, 0i64);
        for &p in &px {
            if p != cur {
                runs.push(len);
                cur = p;
                len = 0;
            }
            len += 1;
        }
        runs.push(len);
        let mut s = String::new();
        for i in 0..runs.len() {
            let mut x = runs[i];
            if i > 2 {
                x -= runs[i - 2];
            }
            loop {
                let mut c = x & 0x1f;
                x >>= 5;
                let more = if c & 0x10 != 0 { x != -1 } else { x != 0 };
                if more {
                    c |= 0x20;
                }
                s.push((c as u8 + 48) as char);
                if !more {
                    break;
                }
            }
        }
        s
    }

    #[test]
    fn thresholds_are_inclusive() {
        let t = Thresholds { car: 0.6, pedestrian: 0.7 };
        assert!(!t.keeps(ObjectClass::Car, 0.59));
        assert!(t.keeps(ObjectClass::Car, 0.6));
        assert!(t.keeps(ObjectClass::Pedestrian, 0.70));
        assert!(!t.keeps(ObjectClass::Pedestrian, 0.69));
    }

    #[test]
    fn reads_three_line_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("dets.txt");
        let masks = [
            BinaryMask::from_box(8, 6, &BBox::new(1, 1, 2, 3)),
            BinaryMask::from_box(8, 6, &BBox::new(4, 0, 3, 3)),
            BinaryMask::from_box(8, 6, &BBox::new(0, 2, 5, 4)),
        ];
        let text = format!(
            "0 1 0.9 6 8 {}\n0 2 0.75 6 8 {}\n3 1 0.61 6 8 {}\n",
            oracle_rle(&masks[0]),
            oracle_rle(&masks[1]),
            oracle_rle(&masks[2])
        );
        std::fs::write(&path, text).unwrap();
        let frames = read_detections(&path, Thresholds { car: 0.6, pedestrian: 0.7 }).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[0].0, 0);
        assert_eq!(frames[0].1.len(), 2);
        assert_eq!(frames[1].0, 3);
        assert_eq!(frames[0].1[0].mask, masks[0]);
        assert_eq!(frames[0].1[1].class, ObjectClass::Pedestrian);
        assert_eq!(frames[1].1[0].mask, masks[2]);
        assert_eq!(frames[1].1[0].bbox, BBox::new(0, 2, 5, 4));
    }

    #[test]
    fn drops_low_confidence_unknown_and_empty() {
        let m = rle_encode(&BinaryMask::from_box(4, 4, &BBox::new(0, 0, 2, 2)));
        let e = rle_encode(&BinaryMask::empty(4, 4));
        let text = format!("0 1 0.59 4 4 {m}\n0 2 0.70 4 4 {m}\n1 10 0.9 4 4 {m}\n1 1 0.9 4 4 {e}\n");
        let r = DetectionReader::new(text.as_bytes(), "mem", Thresholds { car: 0.6, pedestrian: 0.7 });
        let frames: Vec<_> = r.collect::<Result<_>>().unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(frames[0].1.len(), 1);
        assert_eq!(frames[0].1[0].class, ObjectClass::Pedestrian);
        assert!(frames[1].1.is_empty());
    }

    #[test]
    fn parse_errors_name_the_line() {
        let text = "0 1 0.9 4 4 0g\n0 1 oops 4 4 4\n";
        let r = DetectionReader::new(text.as_bytes(), "d.txt", Thresholds::NONE);
        let err = r.collect::<Result<Vec<_>>>().unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("{other:?}"),
        }
        let bad = DetectionReader::new("0 1 oops 4 4 4\n".as_bytes(), "d.txt", Thresholds::NONE);
        let msg = bad.collect::<Result<Vec<_>>>().unwrap_err().to_string();
        assert!(msg.contains("d.txt:1") && msg.contains("confidence"), "{msg}");
        let wrong_dims = DetectionReader::new("0 1 0.9 4 4 5\n".as_bytes(), "d.txt", Thresholds::NONE);
        assert!(wrong_dims.collect::<Result<Vec<_>>>().is_err());
        let unsorted = DetectionReader::new("2 1 0.9 2 2 4\n1 1 0.9 2 2 4\n".as_bytes(), "d", Thresholds::NONE);
        assert!(unsorted.collect::<Result<Vec<_>>>().is_err());
    }

    #[test]
    fn detection_records_reserialize_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.txt"), dir.path().join("b.txt"));
        let text = "0 1 0.90 4 4 0<0\n0 2 0.5 4 4 4\n7 1 1 4 4 04\n";
        std::fs::write(&a, text).unwrap();
        let recs = read_detection_records(&a).unwrap();
        write_detection_records(&b, &recs).unwrap();
        assert_eq!(std::fs::read_to_string(&b).unwrap(), text);
    }

    #[test]
    fn results_write_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("res.txt");
        write_results(&path, &[]).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "");

        let mask = BinaryMask::from_box(5, 4, &BBox::new(1, 1, 2, 2));
        let results = vec![
            FrameResult {
                frame: 0,
                objects: vec![TrackedObject { id: 1, class: ObjectClass::Car, mask: mask.clone() }],
            },
            FrameResult {
                frame: 2,
                objects: vec![
                    TrackedObject { id: 1, class: ObjectClass::Car, mask: mask.clone() },
                    TrackedObject { id: 999, class: ObjectClass::Pedestrian, mask: BinaryMask::full(5, 4) },
                ],
            },
        ];
        write_results(&path, &results).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with(&format!("0 1001 1 4 5 {}\n", oracle_rle(&mask))));
        assert!(text.contains(" 2999 2 "));
        assert_eq!(read_results(&path).unwrap(), results);

        let overflow = [FrameResult {
            frame: 0,
            objects: vec![TrackedObject { id: 1000, class: ObjectClass::Car, mask }],
        }];
        assert!(matches!(write_results(&path, &overflow), Err(Error::IdOverflow(1000))));
    }

    #[test]
    fn frame_patterns() {
        assert_eq!(frame_path("img/{frame:06}.png", 42), PathBuf::from("img/000042.png"));
        assert_eq!(frame_path("f{frame}.jpg", 7), PathBuf::from("f7.jpg"));
        assert_eq!(frame_path("a/{frame:04}/{frame}.png", 3), PathBuf::from("a/0003/3.png"));
        assert_eq!(frame_path("static.png", 3), PathBuf::from("static.png"));
    }

    #[test]
    fn loads_white_png() {
        let dir = tempfile::tempdir().unwrap();
        let pat = dir.path().join("{frame:03}.png");
        let pat = pat.to_str().unwrap();
        image::RgbImage::from_pixel(4, 4, image::Rgb([255, 255, 255]))
            .save(frame_path(pat, 5))
            .unwrap();
        let g = load_frame(pat, 5, Some((4, 4))).unwrap();
        assert_eq!(g.pixels().filter(|p| p.0[0] == 255).count(), 16);
        assert!(matches!(load_frame(pat, 5, Some((4, 5))), Err(Error::FrameSize { .. })));
        let err = load_frame(pat, 6, None).unwrap_err();
        assert!(matches!(err, Error::MissingFrame { frame: 6, .. }));
        assert!(err.to_string().contains("006.png"));
    }

    #[test]
    fn luma_matches_scalar_oracle() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rgb.png");
        let img = image::RgbImage::from_fn(16, 16, |x, y| {
            image::Rgb([(x * 16) as u8, (y * 16) as u8, ((x * 7 + y * 13) % 256) as u8])
        });
        img.save(&path).unwrap();
        let g = load_frame(path.to_str().unwrap(), 0, None).unwrap();
        for (x, y, p) in img.enumerate_pixels() {
            let [r, gg, b] = p.0;
            let want = (299 * u32::from(r) + 587 * u32::from(gg) + 114 * u32::from(b) + 500) / 1000;
            assert_eq!(u32::from(g.get_pixel(x, y).0[0]), want, "pixel {x},{y}");
        }
    }
}
