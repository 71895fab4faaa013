//! Procedural MOTS scenarios: textured rectangles and ellipses on linear
//! paths, rendered with depth order, plus ground truth and detections.
//!
//! Every frame is a pure function of the scene seed and the frame index, so
//! frames can be generated on demand and in any order.

use std::fs;
use std::path::Path;
use std::str::FromStr;

use image::{GrayImage, Luma};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ObjectClass, TrackerConfig};
use crate::error::{Error, Result};
use crate::io::{frame_path, object_id, DetectionRecord, ResultRecord, Thresholds};
use crate::mask::{rle_encode, BinaryMask};
use crate::tracker::{FrameResult, Segment, Tracker};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// Two cars crossing with partial mutual occlusion.
    Crossing,
    /// One car hidden for frames 10 to 12.
    Occlusion,
    /// Four bouncing objects and spurious detections.
    Clutter,
    /// Three pedestrians walking side by side.
    Parallel,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Crossing,
        Scenario::Occlusion,
        Scenario::Clutter,
        Scenario::Parallel,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Crossing => "crossing",
            Scenario::Occlusion => "occlusion",
            Scenario::Clutter => "clutter",
            Scenario::Parallel => "parallel",
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|c| c.name() == s.trim().to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown scenario {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthOptions {
    pub seed: u64,
    pub frames: u32,
    pub width: u32,
    pub height: u32,
    /// Probability that a visible object yields no detection.
    pub dropout: f64,
    /// Maximum detection offset in pixels, uniform per axis.
    pub jitter: u32,
    /// Expected spurious detections per true detection; `None` uses the
    /// scenario default (0.2 for clutter, otherwise 0).
    pub fp_rate: Option<f64>,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            frames: 40,
            width: 320,
            height: 192,
            dropout: 0.0,
            jitter: 0,
            fp_rate: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Rect,
    Ellipse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthObject {
    /// Instance index within its class.
    pub id: u32,
    pub class: ObjectClass,
    pub shape: Shape,
    pub size: (u32, u32),
    /// Top-left corner at frame 0.
    pub start: (f64, f64),
    /// Pixels per frame.
    pub velocity: (f64, f64),
    /// Frames in which the object is absent.
    pub hidden: Vec<u32>,
    texture: Vec<u8>,
}

impl SynthObject {
    /// Top-left corner at frame `t`, reflecting off the image borders.
    pub fn position(&self, t: u32, width: u32, height: u32) -> (i64, i64) {
        let reflect = |p0: f64, v: f64, span: f64| -> f64 {
            if span <= 0.0 {
                return 0.0;
            }
            let p = (p0 + v * f64::from(t)).rem_euclid(2.0 * span);
            if p > span {
                2.0 * span - p
            } else {
                p
            }
        };
        let x = reflect(self.start.0, self.velocity.0, f64::from(width - self.size.0));
        let y = reflect(self.start.1, self.velocity.1, f64::from(height - self.size.1));
        (x.round() as i64, y.round() as i64)
    }

    fn covers(&self, dx: u32, dy: u32) -> bool {
        match self.shape {
            Shape::Rect => true,
            Shape::Ellipse => {
                let (w, h) = (f64::from(self.size.0), f64::from(self.size.1));
                let nx = (f64::from(dx) + 0.5 - w / 2.0) / (w / 2.0);
                let ny = (f64::from(dy) + 0.5 - h / 2.0) / (h / 2.0);
                nx * nx + ny * ny <= 1.0
            }
        }
    }

    fn texel(&self, dx: u32, dy: u32) -> u8 {
        self.texture[(dy * self.size.0 + dx) as usize]
    }
}

/// One rendered frame.
#[derive(Debug, Clone)]
pub struct SynthFrame {
    pub frame: u32,
    pub image: GrayImage,
    pub gt: Vec<ResultRecord>,
    pub detections: Vec<DetectionRecord>,
    /// How many of `detections` are spurious.
    pub spurious: usize,
}

impl SynthFrame {
    /// Detections as tracker input.
    pub fn segments(&self) -> Result<Vec<Segment>> {
        let mut out = Vec::with_capacity(self.detections.len());
        for d in &self.detections {
            out.extend(d.to_segment()?);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone)]
pub struct Scene {
    pub scenario: Scenario,
    pub opts: SynthOptions,
    pub objects: Vec<SynthObject>,
    background: Vec<u8>,
}

fn texture(rng: &mut ChaCha8Rng, w: u32, h: u32) -> Vec<u8> {
    // blocky noise around an object-specific mean with an oriented stripe
    let mean: f64 = rng.gen_range(60.0..200.0);
    let cell = rng.gen_range(3..6u32);
    let (fx, fy): (f64, f64) = (rng.gen_range(-0.6..0.6), rng.gen_range(-0.6..0.6));
    let cols = w / cell + 1;
    let cells: Vec<f64> = (0..cols * (h / cell + 1)).map(|_| rng.gen_range(-45.0..45.0)).collect();
    let mut out = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let stripe = 25.0 * (fx * f64::from(x) + fy * f64::from(y)).sin();
            let v = mean + cells[((y / cell) * cols + x / cell) as usize] + stripe;
            out.push(v.clamp(0.0, 255.0) as u8);
        }
    }
    out
}

impl Scene {
    pub fn new(scenario: Scenario, opts: SynthOptions) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let (w, h) = (f64::from(opts.width), f64::from(opts.height));
        let mut specs: Vec<(ObjectClass, Shape, (u32, u32), (f64, f64), (f64, f64), Vec<u32>)> = Vec::new();
        let car = (36, 28);
        let ped = (16, 36);
        match scenario {
            Scenario::Occlusion => {
                specs.push((ObjectClass::Car, Shape::Rect, car, (0.06 * w, 0.42 * h), (6.0, 0.5), (10..=12).collect()));
            }
            Scenario::Crossing => {
                specs.push((ObjectClass::Car, Shape::Rect, car, (0.03 * w, 0.36 * h), (7.0, 0.0), vec![]));
                specs.push((ObjectClass::Car, Shape::Ellipse, car, (w - 40.0, 0.47 * h), (-7.0, 0.0), vec![]));
            }
            Scenario::Parallel => {
                for k in 0..3 {
                    let x = 0.06 * w + f64::from(k) * 24.0;
                    specs.push((ObjectClass::Pedestrian, Shape::Ellipse, ped, (x, 0.3 * h), (3.0, 1.0), vec![]));
                }
            }
            Scenario::Clutter => {
                for k in 0..4u32 {
                    let (class, shape, size) = if k % 2 == 0 {
                        (ObjectClass::Car, Shape::Rect, car)
                    } else {
                        (ObjectClass::Pedestrian, Shape::Ellipse, ped)
                    };
                    let start = (rng.gen_range(0.0..w - 40.0), rng.gen_range(0.0..h - 40.0));
                    let vel = (rng.gen_range(-5.0..5.0), rng.gen_range(-3.0..3.0));
                    specs.push((class, shape, size, start, vel, vec![]));
                }
            }
        }
        let mut next_id = [1u32; 3];
        let objects = specs
            .into_iter()
            .map(|(class, shape, size, start, velocity, hidden)| {
                let id = next_id[class.id() as usize];
                next_id[class.id() as usize] += 1;
                SynthObject {
                    id,
                    class,
                    shape,
                    size,
                    start,
                    velocity,
                    hidden,
                    texture: texture(&mut rng, size.0, size.1),
                }
            })
            .collect();
        let background = (0..opts.width * opts.height)
            .map(|_| rng.gen_range(70u8..110))
            .collect();
        Self {
            scenario,
            opts,
            objects,
            background,
        }
    }

    pub fn fp_rate(&self) -> f64 {
        self.opts
            .fp_rate
            .unwrap_or(if self.scenario == Scenario::Clutter { 0.2 } else { 0.0 })
    }

    /// Renders frame `t`.
    pub fn frame(&self, t: u32) -> SynthFrame {
        let (w, h) = (self.opts.width, self.opts.height);
        let mut rng = ChaCha8Rng::seed_from_u64(self.opts.seed ^ (u64::from(t) + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15));
        let mut owner = vec![usize::MAX; (w * h) as usize];
        let mut image = GrayImage::from_fn(w, h, |x, y| {
            let n: i16 = rng.gen_range(-4..=4);
            Luma([(i16::from(self.background[(y * w + x) as usize]) + n).clamp(0, 255) as u8])
        });
        for (k, o) in self.objects.iter().enumerate() {
            if o.hidden.contains(&t) {
                continue;
            }
            let (px, py) = o.position(t, w, h);
            for dy in 0..o.size.1 {
                for dx in 0..o.size.0 {
                    let (x, y) = (px + i64::from(dx), py + i64::from(dy));
                    if x < 0 || y < 0 || x >= i64::from(w) || y >= i64::from(h) || !o.covers(dx, dy) {
                        continue;
                    }
                    let (x, y) = (x as u32, y as u32);
                    owner[(y * w + x) as usize] = k;
                    image.put_pixel(x, y, Luma([o.texel(dx, dy)]));
                }
            }
        }

        let mut gt = Vec::new();
        let mut detections = Vec::new();
        for (k, o) in self.objects.iter().enumerate() {
            let mask = BinaryMask::from_fn(w, h, |x, y| owner[(y * w + x) as usize] == k);
            if mask.is_empty() {
                continue;
            }
            gt.push(ResultRecord {
                frame: t,
                object_id: object_id(o.class, o.id).expect("synthetic ids stay small"),
                class: o.class.id(),
                img_h: h,
                img_w: w,
                rle: rle_encode(&mask),
            });
            if rng.gen::<f64>() < self.opts.dropout {
                continue;
            }
            let det = if self.opts.jitter > 0 {
                let j = i64::from(self.opts.jitter);
                shift(&mask, rng.gen_range(-j..=j), rng.gen_range(-j..=j))
            } else {
                mask
            };
            if det.is_empty() {
                continue;
            }
            detections.push(DetectionRecord::new(t, o.class.id(), confidence(&mut rng), h, w, rle_encode(&det)));
        }

        let true_dets = detections.len();
        let mut spurious = 0;
        for _ in 0..true_dets {
            if rng.gen::<f64>() >= self.fp_rate() {
                continue;
            }
            let (ew, eh) = (rng.gen_range(8..30u32), rng.gen_range(8..30u32));
            let (ex, ey) = (rng.gen_range(0..w - ew), rng.gen_range(0..h - eh));
            let m = BinaryMask::from_fn(w, h, |x, y| {
                let nx = (f64::from(x) + 0.5 - f64::from(ex) - f64::from(ew) / 2.0) / (f64::from(ew) / 2.0);
                let ny = (f64::from(y) + 0.5 - f64::from(ey) - f64::from(eh) / 2.0) / (f64::from(eh) / 2.0);
                nx * nx + ny * ny <= 1.0
            });
            let class = if rng.gen::<bool>() { 1 } else { 2 };
            detections.push(DetectionRecord::new(t, class, confidence(&mut rng), h, w, rle_encode(&m)));
            spurious += 1;
        }
        SynthFrame {
            frame: t,
            image,
            gt,
            detections,
            spurious,
        }
    }

    pub fn frames(&self) -> impl Iterator<Item = SynthFrame> + '_ {
        (0..self.opts.frames).map(move |t| self.frame(t))
    }

    /// Writes `dets.txt`, `gt.txt` and `img/{frame:06}.png` under `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir.join("img"))?;
        let mut dets = String::new();
        let mut gt = String::new();
        let pattern = dir.join("img").join("{frame:06}.png");
        let pattern = pattern.to_string_lossy();
        for f in self.frames() {
            for d in &f.detections {
                dets.push_str(&d.to_line());
                dets.push('\n');
            }
            for g in &f.gt {
                gt.push_str(&g.to_line());
                gt.push('\n');
            }
            f.image.save(frame_path(&pattern, f.frame))?;
        }
        fs::write(dir.join("dets.txt"), dets)?;
        fs::write(dir.join("gt.txt"), gt)?;
        Ok(())
    }
}

/// Output of [`track_scene`].
#[derive(Debug, Clone)]
pub struct TrackedScene {
    pub results: Vec<FrameResult>,
    pub gt: Vec<ResultRecord>,
    /// Seconds spent inside the tracker loop.
    pub tracker_seconds: f64,
}

/// Runs the tracker over every frame of a scene.
pub fn track_scene(scene: &Scene, config: &TrackerConfig) -> Result<TrackedScene> {
    let thresholds = Thresholds::from(config);
    let mut tracker = Tracker::new(config.clone());
    let mut out = TrackedScene {
        results: Vec::new(),
        gt: Vec::new(),
        tracker_seconds: 0.0,
    };
    for f in scene.frames() {
        let segs: Vec<Segment> = f
            .segments()?
            .into_iter()
            .filter(|s| thresholds.keeps(s.class, s.confidence))
            .collect();
        let start = std::time::Instant::now();
        out.results.push(tracker.step(f.frame, &segs, Some(&f.image))?);
        out.tracker_seconds += start.elapsed().as_secs_f64();
        out.gt.extend(f.gt);
    }
    Ok(out)
}

fn confidence(rng: &mut ChaCha8Rng) -> f64 {
    (rng.gen_range(0.75..0.99f64) * 1000.0).round() / 1000.0
}

fn shift(mask: &BinaryMask, dx: i64, dy: i64) -> BinaryMask {
    let (w, h) = (i64::from(mask.width()), i64::from(mask.height()));
    BinaryMask::from_fn(mask.width(), mask.height(), |x, y| {
        let (sx, sy) = (i64::from(x) - dx, i64::from(y) - dy);
        sx >= 0 && sy >= 0 && sx < w && sy < h && mask.get(sx as u32, sy as u32)
    })
}
