//! MOTS measures: TP, FP, FN, IDS, FM, MOTSA and sMOTSA.
//!
//! A hypothesis matches a ground-truth mask when their mask IoU is strictly
//! above 0.5. Ground-truth masks in a frame are disjoint, so each hypothesis
//! can match at most one of them; when several hypotheses exceed 0.5 on one
//! ground truth the best is kept and the rest count as false positives.
//!
//! Identity switches use the strict rule: a ground-truth object's matched
//! hypothesis id is compared with the id of its most recent match, even
//! across frames where it went unmatched. A fragmentation is counted each
//! time a ground-truth object is matched again after being present but
//! unmatched.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use crate::config::ObjectClass;
use crate::error::{Error, Result};
use crate::io::{read_result_records, ResultRecord};
use crate::mask::{mask_iou, BinaryMask};

/// Ground-truth class id marking ignore regions.
pub const IGNORE_CLASS: u32 = 10;

/// Fraction of a hypothesis inside ignore regions above which an unmatched
/// hypothesis is not a false positive.
pub const IGNORE_OVERLAP: f64 = 0.5;

/// An identified mask of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Obj {
    pub id: u32,
    pub mask: BinaryMask,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameMatching {
    /// `(gt index, hyp index, iou)`, sorted by gt index.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_gt: Vec<usize>,
    pub unmatched_hyp: Vec<usize>,
}

/// Matches one frame's ground truth against hypotheses of the same class.
pub fn match_frame(frame: u32, gt: &[Obj], hyp: &[Obj]) -> Result<FrameMatching> {
    for a in 0..gt.len() {
        for b in a + 1..gt.len() {
            if gt[a].mask.intersection_area(&gt[b].mask)? > 0 {
                return Err(Error::OverlappingGroundTruth {
                    frame,
                    a: gt[a].id,
                    b: gt[b].id,
                });
            }
        }
    }
    let mut out = FrameMatching::default();
    let mut used = vec![false; hyp.len()];
    for (g, go) in gt.iter().enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (h, ho) in hyp.iter().enumerate() {
            if used[h] {
                continue;
            }
            let iou = mask_iou(&go.mask, &ho.mask)?;
            if iou > 0.5 && best.is_none_or(|(_, b)| iou > b) {
                best = Some((h, iou));
            }
        }
        match best {
            Some((h, iou)) => {
                used[h] = true;
                out.pairs.push((g, h, iou));
            }
            None => out.unmatched_gt.push(g),
        }
    }
    out.unmatched_hyp = (0..hyp.len()).filter(|&h| !used[h]).collect();
    Ok(out)
}

/// Raw counts of one class or of all classes together.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Counts {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub ids: u64,
    pub fm: u64,
    /// Sum of the IoUs of matched pairs.
    pub soft_tp: f64,
}

impl Counts {
    /// Number of ground-truth masks.
    pub fn gt_masks(&self) -> u64 {
        self.tp + self.fn_
    }

    /// `(TP - FP - IDS) / M * 100`; zero when there is no ground truth.
    pub fn motsa(&self) -> f64 {
        let m = self.gt_masks();
        if m == 0 {
            return 0.0;
        }
        (self.tp as f64 - self.fp as f64 - self.ids as f64) / m as f64 * 100.0
    }

    /// `(softTP - FP - IDS) / M * 100`; zero when there is no ground truth.
    pub fn smotsa(&self) -> f64 {
        let m = self.gt_masks();
        if m == 0 {
            return 0.0;
        }
        (self.soft_tp - self.fp as f64 - self.ids as f64) / m as f64 * 100.0
    }

    pub fn add(&mut self, o: &Counts) {
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.ids += o.ids;
        self.fm += o.fm;
        self.soft_tp += o.soft_tp;
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricReport {
    pub per_class: BTreeMap<ObjectClass, Counts>,
    /// Tracker-loop throughput, when measured.
    pub fps: Option<f64>,
}

impl MetricReport {
    pub fn class(&self, class: ObjectClass) -> Counts {
        self.per_class.get(&class).copied().unwrap_or_default()
    }

    pub fn overall(&self) -> Counts {
        let mut c = Counts::default();
        for v in self.per_class.values() {
            c.add(v);
        }
        c
    }

    /// Sums raw counts, e.g. over sequences.
    pub fn merge(&mut self, other: &MetricReport) {
        for (k, v) in &other.per_class {
            self.per_class.entry(*k).or_default().add(v);
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<12}{:>9}{:>9}{:>8}{:>8}{:>8}{:>6}{:>6}",
            "class", "sMOTSA", "MOTSA", "TP", "FP", "FN", "IDS", "FM"
        );
        let mut rows: Vec<(String, Counts)> = self
            .per_class
            .iter()
            .map(|(c, v)| (c.name().to_string(), *v))
            .collect();
        rows.push(("all".to_string(), self.overall()));
        for (name, c) in rows {
            let _ = writeln!(
                s,
                "{:<12}{:>9.2}{:>9.2}{:>8}{:>8}{:>8}{:>6}{:>6}",
                name,
                c.smotsa(),
                c.motsa(),
                c.tp,
                c.fp,
                c.fn_,
                c.ids,
                c.fm
            );
        }
        if let Some(fps) = self.fps {
            let _ = writeln!(s, "FPS {fps:.1}");
        }
        s
    }

    /// Machine-readable `key = value` lines.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let mut put = |prefix: &str, c: &Counts| {
            let _ = writeln!(s, "{prefix}.smotsa = {:.6}", c.smotsa());
            let _ = writeln!(s, "{prefix}.motsa = {:.6}", c.motsa());
            let _ = writeln!(s, "{prefix}.soft_tp = {:.6}", c.soft_tp);
            for (k, v) in [("tp", c.tp), ("fp", c.fp), ("fn", c.fn_), ("ids", c.ids), ("fm", c.fm)] {
                let _ = writeln!(s, "{prefix}.{k} = {v}");
            }
        };
        for (c, v) in &self.per_class {
            put(c.name(), v);
        }
        put("all", &self.overall());
        if let Some(fps) = self.fps {
            let _ = writeln!(s, "fps = {fps:.3}");
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalOptions {
    /// Exclude unmatched hypotheses lying mostly inside ignore regions.
    pub use_ignore_regions: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self {
            use_ignore_regions: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct GtState {
    last_hyp: Option<u32>,
    /// Present in its latest frame without a match, after an earlier match.
    interrupted: bool,
}

/// Streaming accumulator over frames of one sequence and class.
#[derive(Debug, Clone, Default)]
pub struct ClassAccumulator {
    counts: Counts,
    gt_state: HashMap<u32, GtState>,
}

impl ClassAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds one frame. `ignore` is the union of ignore regions, if any.
    pub fn add_frame(&mut self, frame: u32, gt: &[Obj], hyp: &[Obj], ignore: Option<&BinaryMask>) -> Result<()> {
        let m = match_frame(frame, gt, hyp)?;
        let c = &mut self.counts;
        c.tp += m.pairs.len() as u64;
        c.fn_ += m.unmatched_gt.len() as u64;
        for &h in &m.unmatched_hyp {
            let ignored = match ignore {
                Some(region) => {
                    let area = hyp[h].mask.area();
                    area > 0
                        && hyp[h].mask.intersection_area(region)? as f64 / area as f64 > IGNORE_OVERLAP
                }
                None => false,
            };
            if !ignored {
                c.fp += 1;
            }
        }
        for &(g, h, iou) in &m.pairs {
            c.soft_tp += iou;
            let st = self.gt_state.entry(gt[g].id).or_default();
            if st.last_hyp.is_some_and(|prev| prev != hyp[h].id) {
                c.ids += 1;
            }
            if st.interrupted {
                c.fm += 1;
            }
            st.last_hyp = Some(hyp[h].id);
            st.interrupted = false;
        }
        for &g in &m.unmatched_gt {
            let st = self.gt_state.entry(gt[g].id).or_default();
            if st.last_hyp.is_some() {
                st.interrupted = true;
            }
        }
        Ok(())
    }

    pub fn counts(&self) -> Counts {
        self.counts
    }
}

/// Evaluates one sequence given ground-truth and result records.
pub fn evaluate(gt: &[ResultRecord], res: &[ResultRecord], opts: EvalOptions) -> Result<MetricReport> {
    let mut frames: BTreeMap<u32, (Vec<&ResultRecord>, Vec<&ResultRecord>)> = BTreeMap::new();
    for r in gt {
        frames.entry(r.frame).or_default().0.push(r);
    }
    for r in res {
        frames.entry(r.frame).or_default().1.push(r);
    }
    let mut acc: BTreeMap<ObjectClass, ClassAccumulator> = BTreeMap::new();
    for (&frame, (g, h)) in &frames {
        let mut ignore: Option<BinaryMask> = None;
        if opts.use_ignore_regions {
            for r in g.iter().filter(|r| r.class == IGNORE_CLASS) {
                let m = r.decode_mask()?;
                ignore = Some(match ignore {
                    Some(u) => u.union(&m)?,
                    None => m,
                });
            }
        }
        for class in ObjectClass::ALL {
            let pick = |rs: &[&ResultRecord]| -> Result<Vec<Obj>> {
                rs.iter()
                    .filter(|r| r.class == class.id())
                    .map(|r| Ok(Obj { id: r.object_id, mask: r.decode_mask()? }))
                    .collect()
            };
            let (go, ho) = (pick(g)?, pick(h)?);
            if go.is_empty() && ho.is_empty() {
                continue;
            }
            acc.entry(class)
                .or_default()
                .add_frame(frame, &go, &ho, ignore.as_ref())?;
        }
    }
    let mut report = MetricReport::default();
    for class in ObjectClass::ALL {
        report
            .per_class
            .insert(class, acc.get(&class).map(ClassAccumulator::counts).unwrap_or_default());
    }
    Ok(report)
}

pub fn evaluate_files(gt: impl AsRef<Path>, res: impl AsRef<Path>, opts: EvalOptions) -> Result<MetricReport> {
    evaluate(&read_result_records(gt)?, &read_result_records(res)?, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mask::{rle_encode, BBox};

    fn rect(x: u32, y: u32, w: u32, h: u32) -> BinaryMask {
        BinaryMask::from_box(20, 10, &BBox::new(x, y, w, h))
    }

    fn rec(frame: u32, id: u32, class: u32, m: &BinaryMask) -> ResultRecord {
        ResultRecord {
            frame,
            object_id: id,
            class,
            img_h: m.height(),
            img_w: m.width(),
            rle: rle_encode(m),
        }
    }

    /// One car moving right one pixel per frame for ten frames.
    fn gt10() -> Vec<ResultRecord> {
        (0..10).map(|f| rec(f, 1001, 1, &rect(f, 2, 4, 4))).collect()
    }

    #[test]
    fn identical_and_disjoint_sets() {
        let gt = vec![Obj { id: 1, mask: rect(0, 0, 3, 3) }, Obj { id: 2, mask: rect(10, 0, 3, 3) }];
        let m = match_frame(0, &gt, &gt).unwrap();
        assert_eq!(m.pairs.len(), 2);
        assert!(m.unmatched_gt.is_empty() && m.unmatched_hyp.is_empty());
        let far = vec![Obj { id: 9, mask: rect(5, 5, 2, 2) }];
        let m = match_frame(0, &gt, &far).unwrap();
        assert!(m.pairs.is_empty());
    }

    #[test]
    fn iou_exactly_half_is_not_a_match() {
        let g = vec![Obj { id: 1, mask: rect(0, 0, 2, 1) }];
        let h = vec![Obj { id: 1, mask: rect(0, 0, 1, 1) }];
        assert_eq!(mask_iou(&g[0].mask, &h[0].mask).unwrap(), 0.5);
        let m = match_frame(0, &g, &h).unwrap();
        assert!(m.pairs.is_empty());
        assert_eq!((m.unmatched_gt.len(), m.unmatched_hyp.len()), (1, 1));
    }

    #[test]
    fn overlapping_ground_truth_rejected() {
        let g = vec![Obj { id: 1, mask: rect(0, 0, 3, 3) }, Obj { id: 2, mask: rect(2, 2, 3, 3) }];
        assert!(matches!(
            match_frame(4, &g, &[]),
            Err(Error::OverlappingGroundTruth { frame: 4, a: 1, b: 2 })
        ));
    }

    #[test]
    fn perfect_tracking() {
        let r = evaluate(&gt10(), &gt10(), EvalOptions::default()).unwrap();
        let c = r.class(ObjectClass::Car);
        assert_eq!((c.tp, c.fp, c.fn_, c.ids, c.fm), (10, 0, 0, 0, 0));
        assert_eq!(c.motsa(), 100.0);
        assert_eq!(c.smotsa(), 100.0);
    }

    #[test]
    fn one_id_switch_gives_motsa_90() {
        let hyp: Vec<ResultRecord> = gt10()
            .into_iter()
            .map(|mut r| {
                if r.frame >= 5 {
                    r.object_id = 1002;
                }
                r
            })
            .collect();
        let c = evaluate(&gt10(), &hyp, EvalOptions::default()).unwrap().class(ObjectClass::Car);
        assert_eq!((c.tp, c.ids, c.fm), (10, 1, 0));
        assert_eq!(c.motsa(), 90.0);
    }

    #[test]
    fn missed_middle_frame_is_one_fragmentation() {
        let hyp: Vec<ResultRecord> = gt10().into_iter().filter(|r| r.frame != 4).collect();
        let c = evaluate(&gt10(), &hyp, EvalOptions::default()).unwrap().class(ObjectClass::Car);
        assert_eq!((c.tp, c.fn_, c.fm, c.ids), (9, 1, 1, 0));
        assert_eq!(c.motsa(), 90.0);
    }

    #[test]
    fn strict_ids_across_gaps() {
        // id changes while the object is unmatched: still a switch
        let hyp: Vec<ResultRecord> = gt10()
            .into_iter()
            .filter(|r| r.frame != 4)
            .map(|mut r| {
                if r.frame > 4 {
                    r.object_id = 1007;
                }
                r
            })
            .collect();
        let c = evaluate(&gt10(), &hyp, EvalOptions::default()).unwrap().class(ObjectClass::Car);
        assert_eq!((c.ids, c.fm), (1, 1));
    }

    #[test]
    fn empty_hypotheses_score_zero() {
        let c = evaluate(&gt10(), &[], EvalOptions::default()).unwrap().class(ObjectClass::Car);
        assert_eq!((c.tp, c.fp, c.ids, c.fn_), (0, 0, 0, 10));
        assert_eq!(c.motsa(), 0.0);
        assert_eq!(c.smotsa(), 0.0);
        let none = evaluate(&[], &[], EvalOptions::default()).unwrap();
        assert_eq!(none.overall().motsa(), 0.0);
    }

    #[test]
    fn duplicates_add_false_positives_only() {
        let mut hyp = gt10();
        hyp.extend(gt10().into_iter().map(|mut r| {
            r.object_id += 50;
            r
        }));
        let base = evaluate(&gt10(), &gt10(), EvalOptions::default()).unwrap().class(ObjectClass::Car);
        let dup = evaluate(&gt10(), &hyp, EvalOptions::default()).unwrap().class(ObjectClass::Car);
        assert_eq!(dup.tp, base.tp);
        assert_eq!(dup.fp, base.fp + 10);
        assert_eq!(dup.ids, 0);
    }

    #[test]
    fn relabeling_hypotheses_changes_nothing() {
        let mut hyp = gt10();
        for r in hyp.iter_mut().skip(6) {
            r.object_id = 1003;
        }
        let a = evaluate(&gt10(), &hyp, EvalOptions::default()).unwrap();
        for r in hyp.iter_mut() {
            r.object_id = if r.object_id == 1003 { 1500 } else { 1100 };
        }
        let b = evaluate(&gt10(), &hyp, EvalOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn soft_tp_below_hard_tp() {
        let hyp: Vec<ResultRecord> = (0..10).map(|f| rec(f, 1001, 1, &rect(f, 2, 4, 3))).collect();
        let c = evaluate(&gt10(), &hyp, EvalOptions::default()).unwrap().class(ObjectClass::Car);
        assert_eq!(c.tp, 10);
        assert!((c.soft_tp - 7.5).abs() < 1e-12);
        assert!(c.smotsa() < c.motsa());
    }

    #[test]
    fn ignore_regions_suppress_false_positives() {
        let gt = vec![rec(0, 10000, IGNORE_CLASS, &rect(10, 0, 10, 10))];
        let hyp = vec![rec(0, 1001, 1, &rect(12, 2, 3, 3)), rec(0, 1002, 1, &rect(0, 0, 3, 3))];
        let on = evaluate(&gt, &hyp, EvalOptions::default()).unwrap().class(ObjectClass::Car);
        assert_eq!(on.fp, 1);
        let off = evaluate(&gt, &hyp, EvalOptions { use_ignore_regions: false }).unwrap();
        assert_eq!(off.class(ObjectClass::Car).fp, 2);
    }

    #[test]
    fn classes_are_scored_separately() {
        let gt = vec![rec(0, 2001, 2, &rect(0, 0, 4, 4))];
        let hyp = vec![rec(0, 1001, 1, &rect(0, 0, 4, 4))];
        let r = evaluate(&gt, &hyp, EvalOptions::default()).unwrap();
        assert_eq!(r.class(ObjectClass::Pedestrian).fn_, 1);
        assert_eq!(r.class(ObjectClass::Car).fp, 1);
        let kv = r.to_key_values();
        assert!(kv.contains("car.fp = 1") && kv.contains("all.fn = 1"), "{kv}");
        assert!(r.to_text().contains("pedestrian"));
    }

    #[test]
    fn merge_sums_counts() {
        let a = evaluate(&gt10(), &gt10(), EvalOptions::default()).unwrap();
        let mut m = a.clone();
        m.merge(&a);
        assert_eq!(m.class(ObjectClass::Car).tp, 20);
        assert_eq!(m.overall().smotsa(), 100.0);
    }
}
