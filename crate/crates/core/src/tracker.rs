//! Online MOTS loop: segment-to-track association, mask merging,
//! track-to-track re-identification and the track lifecycle.
//!
//! Each class is tracked in its own state space. Per frame and class:
//! predict → S2TA → births → demote unmatched live tracks to lost →
//! mask merge → T2TA → retire old lost tracks → emit.

use std::collections::BTreeMap;

use image::GrayImage;

use crate::affinity::{fuse, minmax_normalize, AffinityMatrix, CostMatrix, UNDERFLOW_AFFINITY};
use crate::assignment::{solve, Assignment};
use crate::config::{MergeMode, ObjectClass, TrackerConfig};
use crate::error::{Error, Result};
use crate::gmphd::{
    init_component, likelihood, normalize_confidence, predict_n, update, GaussianComponent,
    ObservationVec, MIN_WEIGHT,
};
use crate::kcf::KcfModel;
use crate::mask::{box_iou, mask_bbox, mask_iou, BBox, BinaryMask};

/// One instance segmentation of the current frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub frame: u32,
    pub class: ObjectClass,
    pub confidence: f64,
    pub mask: BinaryMask,
    pub bbox: BBox,
    pub center: ObservationVec,
}

impl Segment {
    pub fn new(frame: u32, class: ObjectClass, confidence: f64, mask: BinaryMask) -> Result<Self> {
        let bbox = mask_bbox(&mask)?;
        let (cx, cy) = bbox.center();
        Ok(Self {
            frame,
            class,
            confidence,
            mask,
            bbox,
            center: ObservationVec::new(cx, cy),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Live,
    Lost,
    Dead,
}

/// The mask a track carries in the frame being processed.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentMask {
    pub mask: BinaryMask,
    pub confidence: f64,
}

#[derive(Debug, Clone)]
pub struct Track {
    pub id: u32,
    pub class: ObjectClass,
    /// Posterior at `last_update`.
    pub component: GaussianComponent,
    pub last_mask: BinaryMask,
    pub last_box: BBox,
    pub mask_history: BTreeMap<u32, BinaryMask>,
    pub birth_frame: u32,
    pub lost_frame: Option<u32>,
    pub last_update: u32,
    /// Observation the track was born from.
    pub birth_obs: ObservationVec,
    pub appearance: Option<KcfModel>,
    pub hits: u32,
    pub status: TrackStatus,
    pub current: Option<CurrentMask>,
}

impl Track {
    /// Creates a live track from an unmatched segment.
    pub fn birth(
        id: u32,
        seg: &Segment,
        image: Option<&GrayImage>,
        config: &TrackerConfig,
    ) -> Result<Self> {
        let component = init_component(seg.center, normalize_confidence(seg.confidence), &config.params)?;
        let appearance = if config.pipeline.uses_appearance() {
            train_appearance(image, &seg.bbox, seg.frame, config)
        } else {
            None
        };
        Ok(Self {
            id,
            class: seg.class,
            component,
            last_mask: seg.mask.clone(),
            last_box: seg.bbox,
            mask_history: BTreeMap::from([(seg.frame, seg.mask.clone())]),
            birth_frame: seg.frame,
            lost_frame: None,
            last_update: seg.frame,
            birth_obs: seg.center,
            appearance,
            hits: 1,
            status: TrackStatus::Live,
            current: Some(CurrentMask {
                mask: seg.mask.clone(),
                confidence: seg.confidence,
            }),
        })
    }

    /// State predicted to `frame`.
    pub fn predicted(&self, frame: u32, config: &TrackerConfig) -> GaussianComponent {
        predict_n(&self.component, frame.saturating_sub(self.last_update), &config.params)
    }

    pub fn is_live(&self) -> bool {
        self.status == TrackStatus::Live
    }
}

fn train_appearance(
    image: Option<&GrayImage>,
    bbox: &BBox,
    frame: u32,
    config: &TrackerConfig,
) -> Option<KcfModel> {
    // boxes too small for the filter simply carry no appearance evidence
    image.and_then(|img| KcfModel::train(img, bbox, frame, config.kcf).ok())
}

/// A mask emitted for one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedObject {
    pub id: u32,
    pub class: ObjectClass,
    pub mask: BinaryMask,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameResult {
    pub frame: u32,
    /// Sorted by `(class, id)`.
    pub objects: Vec<TrackedObject>,
}

/// Outcome of one association stage; indices refer to its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Association {
    pub costs: CostMatrix,
    pub assignment: Assignment,
}

/// Turns raw affinities into association costs.
///
/// Pairs whose raw position/motion affinity underflows are forbidden before
/// normalization, so a lone pair cannot be normalized up to a perfect match.
/// `None` appearance entries carry no evidence and normalize to 1.
pub fn association_costs(
    pm_raw: &AffinityMatrix,
    appr_raw: Option<&[Option<f64>]>,
    alpha: f64,
) -> Result<CostMatrix> {
    let (rows, cols) = (pm_raw.rows(), pm_raw.cols());
    let pm = minmax_normalize(pm_raw);
    let appr = match appr_raw {
        Some(entries) => {
            let known_max = entries.iter().flatten().cloned().fold(f64::NAN, f64::max);
            let fill = if known_max.is_nan() { 1.0 } else { known_max };
            let vals = entries.iter().map(|e| e.unwrap_or(fill)).collect();
            minmax_normalize(&AffinityMatrix::new(rows, cols, vals)?)
        }
        None => AffinityMatrix::filled(rows, cols, 1.0),
    };
    let mut costs = fuse(&pm, &appr, alpha)?;
    for i in 0..rows {
        for j in 0..cols {
            if !(pm_raw.get(i, j) > UNDERFLOW_AFFINITY) {
                costs.forbid(i, j);
            }
        }
    }
    Ok(costs)
}

/// Segment-to-track association of live tracks (rows) and segments
/// (columns). Tracks are predicted to `frame` internally.
pub fn s2ta(
    tracks: &[&Track],
    segments: &[Segment],
    frame: u32,
    image: Option<&GrayImage>,
    config: &TrackerConfig,
) -> Result<Association> {
    let predicted: Vec<GaussianComponent> = tracks.iter().map(|t| t.predicted(frame, config)).collect();
    let pm = AffinityMatrix::from_fn(tracks.len(), segments.len(), |i, j| {
        raw_pm(&predicted[i], segments[j].center, config)
    })?;
    let appr = match (config.pipeline.saf_s2ta, image) {
        (true, Some(img)) => Some(
            tracks
                .iter()
                .flat_map(|t| {
                    segments.iter().map(move |s| {
                        t.appearance
                            .as_ref()
                            .and_then(|m| m.appearance_affinity(img, &s.bbox).ok())
                    })
                })
                .collect::<Vec<_>>(),
        ),
        _ => None,
    };
    let costs = association_costs(&pm, appr.as_deref(), config.alpha)?;
    let assignment = solve(&costs);
    Ok(Association { costs, assignment })
}

/// Track-to-track association of lost tracks (rows) with recently born live
/// tracks (columns). A pair is only admissible when the live track was born
/// after the lost track's last update.
pub fn t2ta(
    lost: &[&Track],
    live: &[&Track],
    image: Option<&GrayImage>,
    config: &TrackerConfig,
) -> Result<Association> {
    let pm = AffinityMatrix::from_fn(lost.len(), live.len(), |i, j| {
        let (l, v) = (lost[i], live[j]);
        if v.birth_frame <= l.last_update {
            return 0.0;
        }
        raw_pm(&l.predicted(v.birth_frame, config), v.birth_obs, config)
    })?;
    let appr = image.map(|img| {
        lost.iter()
            .flat_map(|l| {
                live.iter().map(move |v| {
                    l.appearance
                        .as_ref()
                        .and_then(|m| m.appearance_affinity(img, &v.last_box).ok())
                })
            })
            .collect::<Vec<_>>()
    });
    let costs = association_costs(&pm, appr.as_deref(), config.alpha)?;
    let assignment = solve(&costs);
    Ok(Association { costs, assignment })
}

fn raw_pm(pred: &GaussianComponent, z: ObservationVec, config: &TrackerConfig) -> f64 {
    likelihood(pred, z, &config.params).map_or(0.0, |q| pred.weight * q)
}

/// Overlap of two masks under the given merge mode.
pub fn merge_overlap(a: &BinaryMask, b: &BinaryMask, mode: MergeMode) -> Result<f64> {
    match mode {
        MergeMode::Off => Ok(0.0),
        MergeMode::MaskIou => mask_iou(a, b),
        MergeMode::BoxIou => Ok(box_iou(&mask_bbox(a)?, &mask_bbox(b)?)),
    }
}

/// Merges overlapping current masks in place until no pair exceeds `t_m`.
///
/// The survivor is the track with higher current confidence, then the older
/// birth frame, then the lower id. The loser's pixels are unioned into the
/// survivor and the loser emits nothing this frame. Returns
/// `(survivor id, loser id)` in merge order.
pub fn mask_merge(
    tracks: &mut [Track],
    frame: u32,
    t_m: f64,
    mode: MergeMode,
) -> Result<Vec<(u32, u32)>> {
    let mut merges = Vec::new();
    if mode == MergeMode::Off {
        return Ok(merges);
    }
    loop {
        let mut order: Vec<usize> = (0..tracks.len())
            .filter(|&k| tracks[k].is_live() && tracks[k].current.is_some())
            .collect();
        order.sort_by(|&a, &b| {
            let (ta, tb) = (&tracks[a], &tracks[b]);
            let (ca, cb) = (ta.current.as_ref().unwrap(), tb.current.as_ref().unwrap());
            cb.confidence
                .total_cmp(&ca.confidence)
                .then(ta.birth_frame.cmp(&tb.birth_frame))
                .then(ta.id.cmp(&tb.id))
        });
        let mut found = None;
        'search: for (p, &a) in order.iter().enumerate() {
            for &b in &order[p + 1..] {
                let ma = &tracks[a].current.as_ref().unwrap().mask;
                let mb = &tracks[b].current.as_ref().unwrap().mask;
                if tracks[a].class == tracks[b].class && merge_overlap(ma, mb, mode)? > t_m {
                    found = Some((a, b));
                    break 'search;
                }
            }
        }
        let Some((a, b)) = found else { break };
        let loser = tracks[b].current.take().unwrap();
        tracks[b].mask_history.remove(&frame);
        let survivor = tracks[a].current.as_mut().unwrap();
        survivor.mask = survivor.mask.union(&loser.mask)?;
        let merged = survivor.mask.clone();
        tracks[a].mask_history.insert(frame, merged.clone());
        tracks[a].last_mask = merged;
        merges.push((tracks[a].id, tracks[b].id));
    }
    Ok(merges)
}

/// Tracker state of one class in one sequence.
#[derive(Debug, Clone)]
pub struct ClassTracker {
    class: ObjectClass,
    tracks: Vec<Track>,
    next_id: u32,
}

impl ClassTracker {
    pub fn new(class: ObjectClass) -> Self {
        Self {
            class,
            tracks: Vec::new(),
            next_id: 1,
        }
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    fn step(
        &mut self,
        frame: u32,
        segments: &[Segment],
        image: Option<&GrayImage>,
        config: &TrackerConfig,
    ) -> Result<Vec<TrackedObject>> {
        for t in &mut self.tracks {
            t.current = None;
        }

        // S2TA
        let live_idx: Vec<usize> = (0..self.tracks.len()).filter(|&k| self.tracks[k].is_live()).collect();
        let live_refs: Vec<&Track> = live_idx.iter().map(|&k| &self.tracks[k]).collect();
        let assoc = s2ta(&live_refs, segments, frame, image, config)?;
        let predicted: Vec<GaussianComponent> =
            live_refs.iter().map(|t| t.predicted(frame, config)).collect();
        let mut updates = Vec::with_capacity(assoc.assignment.pairs.len());
        for &(i, j) in &assoc.assignment.pairs {
            let seg = &segments[j];
            let mut post = update(&predicted[i], seg.center, &config.params)?;
            // weight share of this track among all live tracks for the segment
            let total: f64 = predicted.iter().map(|p| raw_pm(p, seg.center, config)).sum();
            let own = raw_pm(&predicted[i], seg.center, config);
            if total > 0.0 && total.is_finite() {
                post.weight = (own / total).clamp(MIN_WEIGHT, 1.0);
            }
            updates.push((live_idx[i], j, post));
        }
        for (k, j, post) in updates {
            let seg = &segments[j];
            let t = &mut self.tracks[k];
            t.component = post;
            t.last_update = frame;
            t.hits += 1;
            t.last_mask = seg.mask.clone();
            t.last_box = seg.bbox;
            t.mask_history.insert(frame, seg.mask.clone());
            t.current = Some(CurrentMask {
                mask: seg.mask.clone(),
                confidence: seg.confidence,
            });
            if config.pipeline.uses_appearance() {
                t.appearance = train_appearance(image, &seg.bbox, frame, config).or(t.appearance.take());
            }
        }

        // births
        for &j in &assoc.assignment.unassigned_cols {
            if self.next_id >= 1000 {
                return Err(Error::IdOverflow(self.next_id));
            }
            let track = Track::birth(self.next_id, &segments[j], image, config)?;
            self.next_id += 1;
            self.tracks.push(track);
        }

        // demotion
        for &i in &assoc.assignment.unassigned_rows {
            let t = &mut self.tracks[live_idx[i]];
            t.status = TrackStatus::Lost;
            t.lost_frame = Some(t.last_update);
        }

        mask_merge(&mut self.tracks, frame, config.t_m, config.pipeline.merge)?;

        if config.pipeline.t2ta {
            self.reidentify(frame, image, config)?;
        }

        for t in &mut self.tracks {
            if t.status == TrackStatus::Lost
                && frame - t.lost_frame.unwrap_or(frame) > config.max_lost_age
            {
                t.status = TrackStatus::Dead;
            }
        }
        self.tracks.retain(|t| t.status != TrackStatus::Dead);

        let mut out: Vec<TrackedObject> = self
            .tracks
            .iter()
            .filter(|t| t.is_live() && t.hits >= config.min_hits)
            .filter_map(|t| {
                t.current.as_ref().map(|c| TrackedObject {
                    id: t.id,
                    class: self.class,
                    mask: c.mask.clone(),
                })
            })
            .collect();
        out.sort_by_key(|o| o.id);
        Ok(out)
    }

    fn reidentify(&mut self, frame: u32, image: Option<&GrayImage>, config: &TrackerConfig) -> Result<()> {
        let lost_idx: Vec<usize> = (0..self.tracks.len())
            .filter(|&k| self.tracks[k].status == TrackStatus::Lost)
            .collect();
        let live_idx: Vec<usize> = (0..self.tracks.len())
            .filter(|&k| {
                let t = &self.tracks[k];
                t.is_live() && frame - t.birth_frame <= config.t2ta_window
            })
            .collect();
        if lost_idx.is_empty() || live_idx.is_empty() {
            return Ok(());
        }
        let lost: Vec<&Track> = lost_idx.iter().map(|&k| &self.tracks[k]).collect();
        let live: Vec<&Track> = live_idx.iter().map(|&k| &self.tracks[k]).collect();
        let assoc = t2ta(&lost, &live, image, config)?;
        for &(i, j) in &assoc.assignment.pairs {
            let old = self.tracks[lost_idx[i]].clone();
            let v = &mut self.tracks[live_idx[j]];
            v.id = old.id;
            v.birth_frame = old.birth_frame;
            v.hits += old.hits;
            let mut history = old.mask_history;
            history.append(&mut v.mask_history);
            v.mask_history = history;
            self.tracks[lost_idx[i]].status = TrackStatus::Dead;
        }
        Ok(())
    }
}

/// Multi-class online tracker for one sequence.
#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    classes: BTreeMap<ObjectClass, ClassTracker>,
    last_frame: Option<u32>,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Self {
        Self {
            config,
            classes: BTreeMap::new(),
            last_frame: None,
        }
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn class_tracker(&self, class: ObjectClass) -> Option<&ClassTracker> {
        self.classes.get(&class)
    }

    /// Processes one frame. Frames must arrive in strictly increasing order;
    /// skipped indices count as frames without detections. `image` feeds the
    /// appearance model and may be omitted when the pipeline does not use it.
    pub fn step(&mut self, frame: u32, segments: &[Segment], image: Option<&GrayImage>) -> Result<FrameResult> {
        if let Some(prev) = self.last_frame {
            if frame <= prev {
                return Err(Error::FrameOrder { prev, got: frame });
            }
            for skipped in prev + 1..frame {
                for ct in self.classes.values_mut() {
                    ct.step(skipped, &[], None, &self.config)?;
                }
            }
        }
        self.last_frame = Some(frame);
        let mut objects = Vec::new();
        for class in ObjectClass::ALL {
            let segs: Vec<Segment> = segments.iter().filter(|s| s.class == class).cloned().collect();
            if segs.is_empty() && !self.classes.contains_key(&class) {
                continue;
            }
            let ct = self
                .classes
                .entry(class)
                .or_insert_with(|| ClassTracker::new(class));
            objects.extend(ct.step(frame, &segs, image, &self.config)?);
        }
        Ok(FrameResult { frame, objects })
    }
}
