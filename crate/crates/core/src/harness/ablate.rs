//! Unified-framework comparison of association scores, cascade and motion.

use std::fmt::Write as _;

use crate::exec::Execution;
use crate::geometry::Similarity;
use crate::harness::tune::check_ground_truth;
use crate::harness::{HarnessError, Sequence};
use crate::metrics::{evaluate, FrameAnnotations, MetricReport};
use crate::tracker::{run_sequence, TrackerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Variant {
    pub name: &'static str,
    pub similarity: Similarity,
    pub cascade: bool,
    pub motion: bool,
}

impl Variant {
    pub fn apply(&self, base: &TrackerConfig) -> TrackerConfig {
        TrackerConfig {
            similarity: self.similarity,
            cascade: self.cascade,
            motion: self.motion,
            ..base.clone()
        }
    }
}

/// Table rows in order: four single-round trackers without motion, then
/// cascaded BIoU without and with motion.
pub const VARIANTS: [Variant; 6] = [
    Variant {
        name: "IoU",
        similarity: Similarity::Iou,
        cascade: false,
        motion: false,
    },
    Variant {
        name: "GIoU",
        similarity: Similarity::Giou,
        cascade: false,
        motion: false,
    },
    Variant {
        name: "DIoU",
        similarity: Similarity::Diou,
        cascade: false,
        motion: false,
    },
    Variant {
        name: "BIoU",
        similarity: Similarity::Buffered,
        cascade: false,
        motion: false,
    },
    Variant {
        name: "C-BIoU",
        similarity: Similarity::Buffered,
        cascade: true,
        motion: false,
    },
    Variant {
        name: "C-BIoU+Mo",
        similarity: Similarity::Buffered,
        cascade: true,
        motion: true,
    },
];

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    pub variant: Variant,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationTable {
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, name: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant.name == name)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:<10} {:>4} {:>4} {:>6} {:>6} {:>6} {:>6} {:>6}",
            "Tracker", "C.M.", "Mo.", "HOTA", "DetA", "AssA", "MOTA", "IDF1"
        );
        let mark = |b: bool| if b { "y" } else { "n" };
        for r in &self.rows {
            let m = &r.report;
            let _ = writeln!(
                s,
                "{:<10} {:>4} {:>4} {:>6.1} {:>6.1} {:>6.1} {:>6.1} {:>6.1}",
                r.variant.name,
                mark(r.variant.cascade),
                mark(r.variant.motion),
                m.hota * 100.0,
                m.deta * 100.0,
                m.assa * 100.0,
                m.mota * 100.0,
                m.idf1 * 100.0
            );
        }
        s
    }
}

/// Evaluates every variant of [`VARIANTS`] on one sequence. Buffers and
/// lifecycle settings come from `base`.
pub fn ablate(sequence: &Sequence, base: &TrackerConfig, exec: Execution) -> Result<AblationTable, HarnessError> {
    check_ground_truth(std::slice::from_ref(sequence))?;
    base.validate()?;
    let rows = exec.map(&VARIANTS, |v| -> Result<AblationRow, HarnessError> {
        let tracklets = run_sequence(&sequence.detections, &v.apply(base))?;
        let pred = FrameAnnotations::from_tracklets(&tracklets)?;
        Ok(AblationRow {
            variant: *v,
            report: evaluate(&sequence.ground_truth, &pred, Execution::Sequential),
        })
    });
    Ok(AblationTable {
        rows: rows.into_iter().collect::<Result<_, _>>()?,
    })
}
