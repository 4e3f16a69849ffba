//! Tracking metrics: CLEAR MOTA, identity F1 and HOTA with its DetA/AssA parts.
//!
//! Conventions: per-frame matching maximizes the number of matched pairs with
//! IoU >= α and then their total IoU. MOTA and IDF1 use α = 0.5. HOTA averages
//! over α ∈ {0.05, 0.10, …, 0.95}. AssA is 0 when there are no true positives.
//! When both ground truth and predictions are empty every score is 1.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::assignment::{solve, CostMatrix};
use crate::exec::Execution;
use crate::geometry::{iou, BoundingBox};
use crate::tracklet::Tracklet;

pub const CLEAR_ALPHA: f64 = 0.5;

/// The 19 localization thresholds HOTA integrates over.
pub fn hota_alphas() -> Vec<f64> {
    (1..=19).map(|i| f64::from(i) / 20.0).collect()
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnnotationError {
    #[error("identity {id} appears twice in frame {frame}")]
    DuplicateIdentity { frame: u32, id: u32 },
}

/// Per-frame `(identity, box)` lists, for ground truth or predictions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameAnnotations {
    frames: BTreeMap<u32, Vec<(u32, BoundingBox)>>,
}

impl FrameAnnotations {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, frame: u32, id: u32, bbox: BoundingBox) -> Result<(), AnnotationError> {
        let entries = self.frames.entry(frame).or_default();
        if entries.iter().any(|(i, _)| *i == id) {
            return Err(AnnotationError::DuplicateIdentity { frame, id });
        }
        entries.push((id, bbox));
        Ok(())
    }

    pub fn from_tracklets(tracklets: &[Tracklet]) -> Result<Self, AnnotationError> {
        let mut out = Self::new();
        for t in tracklets {
            for o in t.observations() {
                out.insert(o.frame, t.id(), o.bbox)?;
            }
        }
        Ok(out)
    }

    pub fn frame(&self, frame: u32) -> &[(u32, BoundingBox)] {
        self.frames.get(&frame).map_or(&[], Vec::as_slice)
    }

    pub fn frames(&self) -> impl Iterator<Item = (u32, &[(u32, BoundingBox)])> {
        self.frames.iter().map(|(f, v)| (*f, v.as_slice()))
    }

    pub fn num_boxes(&self) -> usize {
        self.frames.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.num_boxes() == 0
    }

    /// All boxes moved by `(dx, dy)`.
    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let frames = self
            .frames
            .iter()
            .map(|(f, v)| (*f, v.iter().map(|(id, b)| (*id, b.translated(dx, dy))).collect()))
            .collect();
        Self { frames }
    }

    /// Identities renamed through `map`; ids missing from `map` are kept.
    pub fn relabeled(&self, map: &HashMap<u32, u32>) -> Self {
        let frames = self
            .frames
            .iter()
            .map(|(f, v)| {
                (
                    *f,
                    v.iter()
                        .map(|(id, b)| (*map.get(id).unwrap_or(id), *b))
                        .collect(),
                )
            })
            .collect();
        Self { frames }
    }

    fn frame_union<'a>(&'a self, other: &'a Self) -> impl Iterator<Item = u32> + 'a {
        let mut keys: Vec<u32> = self.frames.keys().chain(other.frames.keys()).copied().collect();
        keys.sort_unstable();
        keys.dedup();
        keys.into_iter()
    }

    fn counts_by_id(&self) -> HashMap<u32, usize> {
        let mut counts = HashMap::new();
        for v in self.frames.values() {
            for (id, _) in v {
                *counts.entry(*id).or_insert(0) += 1;
            }
        }
        counts
    }
}

/// Matching of one frame. `pairs` holds `(gt index, pred index, iou)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameMatch {
    pub pairs: Vec<(usize, usize, f64)>,
    pub false_positives: usize,
    pub false_negatives: usize,
}

pub fn match_frame(gt: &[(u32, BoundingBox)], pred: &[(u32, BoundingBox)], alpha: f64) -> FrameMatch {
    let costs = CostMatrix::from_fn(gt.len(), pred.len(), |g, p| {
        let v = iou(&gt[g].1, &pred[p].1);
        (v >= alpha).then_some(1.0 - v)
    });
    let result = solve(&costs);
    FrameMatch {
        pairs: result
            .matches
            .iter()
            .map(|&(g, p)| (g, p, iou(&gt[g].1, &pred[p].1)))
            .collect(),
        false_positives: result.unmatched_cols.len(),
        false_negatives: result.unmatched_rows.len(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClearCounts {
    pub true_positives: usize,
    pub false_positives: usize,
    pub false_negatives: usize,
    pub id_switches: usize,
    pub num_gt: usize,
}

impl ClearCounts {
    pub fn mota(&self) -> f64 {
        let errors = self.false_negatives + self.false_positives + self.id_switches;
        1.0 - errors as f64 / self.num_gt.max(1) as f64
    }
}

/// CLEAR counts; an id switch is a change of a ground-truth identity's
/// matched prediction id between its consecutive matched frames.
pub fn clear_counts(gt: &FrameAnnotations, pred: &FrameAnnotations, alpha: f64) -> ClearCounts {
    let mut counts = ClearCounts {
        num_gt: gt.num_boxes(),
        ..ClearCounts::default()
    };
    let mut last_match: HashMap<u32, u32> = HashMap::new();
    for frame in gt.frame_union(pred) {
        let (g, p) = (gt.frame(frame), pred.frame(frame));
        let m = match_frame(g, p, alpha);
        counts.true_positives += m.pairs.len();
        counts.false_positives += m.false_positives;
        counts.false_negatives += m.false_negatives;
        for &(gi, pi, _) in &m.pairs {
            let (gid, pid) = (g[gi].0, p[pi].0);
            if let Some(prev) = last_match.insert(gid, pid) {
                if prev != pid {
                    counts.id_switches += 1;
                }
            }
        }
    }
    counts
}

pub fn mota(gt: &FrameAnnotations, pred: &FrameAnnotations, alpha: f64) -> f64 {
    clear_counts(gt, pred, alpha).mota()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IdentityCounts {
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
}

impl IdentityCounts {
    pub fn idf1(&self) -> f64 {
        let denom = 2 * self.idtp + self.idfp + self.idfn;
        if denom == 0 {
            1.0
        } else {
            2.0 * self.idtp as f64 / denom as f64
        }
    }
}

/// Co-occurrence counts `(gt id, pred id) -> frames with IoU >= alpha`.
pub fn identity_overlaps(gt: &FrameAnnotations, pred: &FrameAnnotations, alpha: f64) -> BTreeMap<(u32, u32), usize> {
    let mut overlaps = BTreeMap::new();
    for (frame, g) in gt.frames() {
        let p = pred.frame(frame);
        for (gid, gb) in g {
            for (pid, pb) in p {
                if iou(gb, pb) >= alpha {
                    *overlaps.entry((*gid, *pid)).or_insert(0) += 1;
                }
            }
        }
    }
    overlaps
}

/// Identity counts under the bijection between gt and predicted ids that
/// maximizes IDTP.
pub fn identity_counts(gt: &FrameAnnotations, pred: &FrameAnnotations, alpha: f64) -> IdentityCounts {
    let num_gt = gt.num_boxes();
    let num_pred = pred.num_boxes();
    let overlaps = identity_overlaps(gt, pred, alpha);

    let mut gt_ids: Vec<u32> = gt.counts_by_id().into_keys().collect();
    let mut pred_ids: Vec<u32> = pred.counts_by_id().into_keys().collect();
    gt_ids.sort_unstable();
    pred_ids.sort_unstable();

    let max = overlaps.values().copied().max().unwrap_or(0) as f64;
    let costs = CostMatrix::from_fn(gt_ids.len(), pred_ids.len(), |g, p| {
        let w = overlaps.get(&(gt_ids[g], pred_ids[p])).copied().unwrap_or(0);
        Some(max - w as f64)
    });
    let idtp: usize = solve(&costs)
        .matches
        .iter()
        .map(|&(g, p)| overlaps.get(&(gt_ids[g], pred_ids[p])).copied().unwrap_or(0))
        .sum();
    IdentityCounts {
        idtp,
        idfp: num_pred - idtp,
        idfn: num_gt - idtp,
    }
}

pub fn idf1(gt: &FrameAnnotations, pred: &FrameAnnotations, alpha: f64) -> f64 {
    identity_counts(gt, pred, alpha).idf1()
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HotaScores {
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
}

/// HOTA, DetA and AssA at one threshold.
pub fn hota_at(gt: &FrameAnnotations, pred: &FrameAnnotations, alpha: f64) -> HotaScores {
    let num_gt = gt.num_boxes();
    let num_pred = pred.num_boxes();
    if num_gt == 0 && num_pred == 0 {
        return HotaScores {
            hota: 1.0,
            deta: 1.0,
            assa: 1.0,
        };
    }
    let mut pair_tp: HashMap<(u32, u32), usize> = HashMap::new();
    let mut tp = 0usize;
    for frame in gt.frame_union(pred) {
        let (g, p) = (gt.frame(frame), pred.frame(frame));
        for (gi, pi, _) in match_frame(g, p, alpha).pairs {
            *pair_tp.entry((g[gi].0, p[pi].0)).or_insert(0) += 1;
            tp += 1;
        }
    }
    let deta = tp as f64 / (num_gt + num_pred - tp) as f64;
    let assa = if tp == 0 {
        0.0
    } else {
        let gt_counts = gt.counts_by_id();
        let pred_counts = pred.counts_by_id();
        // Every TP of pair c has the same A(c); weight by the pair's TP count.
        // Terms are summed in value order so relabeling cannot change the result.
        let mut terms: Vec<f64> = pair_tp
            .iter()
            .map(|(&(g, p), &n)| {
                let tpa = n as f64;
                let denom = (gt_counts[&g] + pred_counts[&p] - n) as f64;
                tpa * tpa / denom
            })
            .collect();
        terms.sort_by(f64::total_cmp);
        let total: f64 = terms.iter().sum();
        total / tp as f64
    };
    HotaScores {
        hota: (deta * assa).sqrt(),
        deta,
        assa,
    }
}

/// HOTA scores averaged over [`hota_alphas`].
pub fn hota(gt: &FrameAnnotations, pred: &FrameAnnotations, exec: Execution) -> HotaScores {
    let alphas = hota_alphas();
    let per_alpha = exec.map(&alphas, |&a| hota_at(gt, pred, a));
    let n = per_alpha.len() as f64;
    let sum = per_alpha.iter().fold(HotaScores::default(), |acc, s| HotaScores {
        hota: acc.hota + s.hota,
        deta: acc.deta + s.deta,
        assa: acc.assa + s.assa,
    });
    HotaScores {
        hota: sum.hota / n,
        deta: sum.deta / n,
        assa: sum.assa / n,
    }
}

/// Every metric for one sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub mota: f64,
    pub idf1: f64,
    pub clear: ClearCounts,
    pub identity: IdentityCounts,
}

impl MetricReport {
    /// Table with percentages to one decimal.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:>6} {:>6} {:>6} {:>6} {:>6}", "HOTA", "DetA", "AssA", "MOTA", "IDF1");
        let _ = writeln!(
            s,
            "{:>6.1} {:>6.1} {:>6.1} {:>6.1} {:>6.1}",
            self.hota * 100.0,
            self.deta * 100.0,
            self.assa * 100.0,
            self.mota * 100.0,
            self.idf1 * 100.0
        );
        let _ = writeln!(
            s,
            "TP {}  FP {}  FN {}  IDSW {}",
            self.clear.true_positives,
            self.clear.false_positives,
            self.clear.false_negatives,
            self.clear.id_switches
        );
        s
    }

    /// One `key=value` per line.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        for (k, v) in [
            ("hota", self.hota),
            ("deta", self.deta),
            ("assa", self.assa),
            ("mota", self.mota),
            ("idf1", self.idf1),
        ] {
            let _ = writeln!(s, "{k}={v:.6}");
        }
        for (k, v) in [
            ("tp", self.clear.true_positives),
            ("fp", self.clear.false_positives),
            ("fn", self.clear.false_negatives),
            ("idsw", self.clear.id_switches),
            ("idtp", self.identity.idtp),
            ("idfp", self.identity.idfp),
            ("idfn", self.identity.idfn),
        ] {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }
}

pub fn evaluate(gt: &FrameAnnotations, pred: &FrameAnnotations, exec: Execution) -> MetricReport {
    let clear = clear_counts(gt, pred, CLEAR_ALPHA);
    let identity = identity_counts(gt, pred, CLEAR_ALPHA);
    let h = hota(gt, pred, exec);
    MetricReport {
        hota: h.hota,
        deta: h.deta,
        assa: h.assa,
        mota: clear.mota(),
        idf1: identity.idf1(),
        clear,
        identity,
    }
}
