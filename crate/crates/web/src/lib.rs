//! Browser demo: track a synthetic scene, inspect the motion likelihood of
//! the predicted tracks and probe the appearance filter.

use gmphd_mots::affinity::pm_affinity;
use gmphd_mots::eval::{evaluate, EvalOptions};
use gmphd_mots::gmphd::ObservationVec;
use gmphd_mots::io::{object_id, result_records, Thresholds};
use gmphd_mots::kcf::KcfModel;
use gmphd_mots::synth::{Scenario, Scene, SynthOptions};
use gmphd_mots::viz::overlay;
use gmphd_mots::{mask_bbox, BBox, FrameResult, ObjectClass, Pipeline, Segment, Tracker, TrackerConfig};
use image::{GrayImage, RgbImage};
use wasm_bindgen::prelude::*;

fn rgba(img: &RgbImage) -> Vec<u8> {
    img.pixels().flat_map(|p| [p[0], p[1], p[2], 255]).collect()
}

fn gray_to_rgb(img: &GrayImage) -> RgbImage {
    RgbImage::from_fn(img.width(), img.height(), |x, y| {
        let v = img.get_pixel(x, y)[0];
        image::Rgb([v, v, v])
    })
}

/// Black to red to yellow to white.
fn heat(v: f64) -> [u8; 3] {
    let v = v.clamp(0.0, 1.0) * 3.0;
    let c = |t: f64| (t.clamp(0.0, 1.0) * 255.0).round() as u8;
    [c(v), c(v - 1.0), c(v - 2.0)]
}

/// One tracked synthetic sequence.
#[wasm_bindgen]
pub struct SceneRun {
    scene: Scene,
    config: TrackerConfig,
    results: Vec<FrameResult>,
    report: String,
}

/// Appearance response of a trained filter on a displaced box.
#[wasm_bindgen]
pub struct KcfProbe {
    width: u32,
    height: u32,
    rgba: Vec<u8>,
    affinity: f64,
}

#[wasm_bindgen]
impl KcfProbe {
    #[wasm_bindgen(getter)]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> u32 {
        self.height
    }

    /// Distance map, dark where the response is strong.
    #[wasm_bindgen(getter)]
    pub fn rgba(&self) -> Vec<u8> {
        self.rgba.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn affinity(&self) -> f64 {
        self.affinity
    }
}

fn segments(scene: &Scene, t: u32, cfg: &TrackerConfig) -> Result<(GrayImage, Vec<Segment>), String> {
    let f = scene.frame(t);
    let thr = Thresholds::from(cfg);
    let segs = f
        .segments()
        .map_err(|e| e.to_string())?
        .into_iter()
        .filter(|s| thr.keeps(s.class, s.confidence))
        .collect();
    Ok((f.image, segs))
}

impl SceneRun {
    pub fn run(scenario: &str, seed: u64, pipeline: u8, dropout: f64, jitter: u32) -> Result<SceneRun, String> {
        let scenario: Scenario = scenario.parse().map_err(|e: gmphd_mots::Error| e.to_string())?;
        let pipeline = Pipeline::preset(pipeline).ok_or("pipeline must be 1 to 5")?;
        if !(0.0..=1.0).contains(&dropout) {
            return Err("dropout must be in [0, 1]".into());
        }
        let opts = SynthOptions { seed, dropout, jitter, ..SynthOptions::default() };
        let scene = Scene::new(scenario, opts);
        let config = TrackerConfig::with_pipeline(pipeline);
        let mut tracker = Tracker::new(config.clone());
        let mut results = Vec::new();
        let mut gt = Vec::new();
        for t in 0..scene.opts.frames {
            let (img, segs) = segments(&scene, t, &config)?;
            results.push(tracker.step(t, &segs, Some(&img)).map_err(|e| e.to_string())?);
            gt.extend(scene.frame(t).gt);
        }
        let res = result_records(&results).map_err(|e| e.to_string())?;
        let report = evaluate(&gt, &res, EvalOptions::default()).map_err(|e| e.to_string())?;
        let mut ids: Vec<u32> = res.iter().map(|r| r.object_id).collect();
        ids.sort_unstable();
        ids.dedup();
        let report = format!("{}distinct ids {}\n", report.to_text(), ids.len());
        Ok(SceneRun { scene, config, results, report })
    }

    /// Tracker state after frames `0..t`.
    fn tracker_before(&self, t: u32) -> Result<Tracker, String> {
        let mut tracker = Tracker::new(self.config.clone());
        for f in 0..t {
            let (img, segs) = segments(&self.scene, f, &self.config)?;
            tracker.step(f, &segs, Some(&img)).map_err(|e| e.to_string())?;
        }
        Ok(tracker)
    }

    /// Sum of predicted-track likelihoods at every pixel, scaled to [0, 1].
    pub fn likelihood(&self, t: u32) -> Result<Vec<f64>, String> {
        let tracker = self.tracker_before(t.min(self.frames() - 1))?;
        let comps: Vec<_> = ObjectClass::ALL
            .iter()
            .filter_map(|c| tracker.class_tracker(*c))
            .flat_map(|ct| ct.tracks().iter().filter(|tr| tr.is_live()))
            .map(|tr| tr.predicted(t, &self.config))
            .collect();
        let (w, h) = (self.width(), self.height());
        let mut out = vec![0.0; (w * h) as usize];
        for y in 0..h {
            for x in 0..w {
                let z = ObservationVec::new(f64::from(x), f64::from(y));
                out[(y * w + x) as usize] = comps.iter().map(|c| pm_affinity(c, z, &self.config.params)).sum();
            }
        }
        let max = out.iter().cloned().fold(0.0, f64::max);
        if max > 0.0 {
            out.iter_mut().for_each(|v| *v /= max);
        }
        Ok(out)
    }

    /// Trains on ground-truth object `index` at frame `t` and evaluates on
    /// its box in frame `t + 1` moved by `(dx, dy)`.
    pub fn probe(&self, t: u32, index: usize, dx: i32, dy: i32) -> Result<KcfProbe, String> {
        let (t0, t1) = (self.scene.frame(t), self.scene.frame(t + 1));
        let gt0 = t0.gt.get(index).ok_or("no such object in this frame")?;
        let gt1 = t1
            .gt
            .iter()
            .find(|g| g.object_id == gt0.object_id)
            .ok_or("object not visible in the next frame")?;
        let b0 = mask_bbox(&gt0.decode_mask().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let b1 = mask_bbox(&gt1.decode_mask().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let clamp = |v: i64, len: u32, side: u32| v.clamp(0, i64::from(side - len)) as u32;
        let moved = BBox::new(
            clamp(i64::from(b1.x) + i64::from(dx), b1.w, self.width()),
            clamp(i64::from(b1.y) + i64::from(dy), b1.h, self.height()),
            b1.w,
            b1.h,
        );
        let model = KcfModel::train(&t0.image, &b0, t, self.config.kcf).map_err(|e| e.to_string())?;
        let map = model.response_map(&t1.image, &moved).map_err(|e| e.to_string())?;
        let rgba = map
            .values
            .iter()
            .flat_map(|d| {
                let [r, g, b] = heat(1.0 - d);
                [r, g, b, 255]
            })
            .collect();
        let affinity = model.appearance_affinity(&t1.image, &moved).map_err(|e| e.to_string())?;
        Ok(KcfProbe { width: map.width as u32, height: map.height as u32, rgba, affinity })
    }
}

#[wasm_bindgen]
impl SceneRun {
    /// Generates and tracks a scene. `scenario` is crossing, occlusion,
    /// clutter or parallel; `pipeline` is 1 to 5.
    #[wasm_bindgen(constructor)]
    pub fn new(scenario: &str, seed: u32, pipeline: u8, dropout: f64, jitter: u32) -> Result<SceneRun, JsError> {
        Self::run(scenario, u64::from(seed), pipeline, dropout, jitter).map_err(|e| JsError::new(&e))
    }

    #[wasm_bindgen(getter)]
    pub fn width(&self) -> u32 {
        self.scene.opts.width
    }

    #[wasm_bindgen(getter)]
    pub fn height(&self) -> u32 {
        self.scene.opts.height
    }

    #[wasm_bindgen(getter)]
    pub fn frames(&self) -> u32 {
        self.scene.opts.frames
    }

    /// Metrics of the whole run as text.
    #[wasm_bindgen(getter)]
    pub fn report(&self) -> String {
        self.report.clone()
    }

    /// Frame `t` with tracked masks and ids drawn on it.
    pub fn frame_rgba(&self, t: u32) -> Vec<u8> {
        let t = t.min(self.frames() - 1);
        let base = gray_to_rgb(&self.scene.frame(t).image);
        let objects: Vec<_> = self.results[t as usize]
            .objects
            .iter()
            .filter_map(|o| Some((object_id(o.class, o.id).ok()?, o.mask.clone())))
            .collect();
        overlay(&base, &objects).map(|img| rgba(&img)).unwrap_or_default()
    }

    /// Object ids drawn in frame `t`.
    pub fn ids(&self, t: u32) -> Vec<u32> {
        self.results
            .get(t as usize)
            .map(|r| r.objects.iter().filter_map(|o| object_id(o.class, o.id).ok()).collect())
            .unwrap_or_default()
    }

    /// Motion likelihood of the tracks predicted into frame `t`, over the frame.
    pub fn likelihood_rgba(&self, t: u32) -> Result<Vec<u8>, JsError> {
        let heatmap = self.likelihood(t).map_err(|e| JsError::new(&e))?;
        let base = self.scene.frame(t.min(self.frames() - 1)).image;
        Ok(base
            .pixels()
            .zip(&heatmap)
            .flat_map(|(p, &v)| {
                let c = heat(v);
                let g = f64::from(p[0]) * 0.35;
                let mix = |k: usize| (g * (1.0 - v) + f64::from(c[k]) * v).round() as u8;
                [mix(0), mix(1), mix(2), 255]
            })
            .collect())
    }

    /// Appearance filter probe; see [`SceneRun::probe`].
    pub fn kcf_probe(&self, t: u32, index: usize, dx: i32, dy: i32) -> Result<KcfProbe, JsError> {
        self.probe(t, index, dx, dy).map_err(|e| JsError::new(&e))
    }
}
