//! Grid search over the buffer pair `(b1, b2)` with `b1 < b2`.

use std::fmt::Write as _;

use crate::exec::Execution;
use crate::geometry::BufferScale;
use crate::harness::{HarnessError, Sequence};
use crate::metrics::{evaluate, FrameAnnotations, MetricReport};
use crate::tracker::{run_sequence, TrackerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Objective {
    #[default]
    Hota,
    Idf1,
    Mota,
}

impl Objective {
    pub fn of(self, report: &MetricReport) -> f64 {
        match self {
            Objective::Hota => report.hota,
            Objective::Idf1 => report.idf1,
            Objective::Mota => report.mota,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Objective::Hota => "HOTA",
            Objective::Idf1 => "IDF1",
            Objective::Mota => "MOTA",
        }
    }
}

impl std::str::FromStr for Objective {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "hota" => Ok(Objective::Hota),
            "idf1" => Ok(Objective::Idf1),
            "mota" => Ok(Objective::Mota),
            _ => Err(format!("unknown objective `{s}` (hota, idf1, mota)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchSpec {
    pub values: Vec<f64>,
    pub objective: Objective,
}

impl Default for GridSearchSpec {
    /// `b ∈ {0.1, …, 0.7}`: 21 admissible pairs.
    fn default() -> Self {
        Self {
            values: (1..=7).map(|i| f64::from(i) / 10.0).collect(),
            objective: Objective::Hota,
        }
    }
}

impl GridSearchSpec {
    /// All pairs with `b1 < b2`, ordered by `(b1, b2)`.
    pub fn combinations(&self) -> Vec<(f64, f64)> {
        let mut values = self.values.clone();
        values.sort_by(f64::total_cmp);
        values.dedup();
        let mut out = Vec::new();
        for (i, &b1) in values.iter().enumerate() {
            for &b2 in &values[i + 1..] {
                out.push((b1, b2));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneRow {
    pub b1: f64,
    pub b2: f64,
    /// Objective averaged over sequences.
    pub score: f64,
    pub hota: f64,
    pub idf1: f64,
    pub mota: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult {
    pub objective: Objective,
    pub rows: Vec<TuneRow>,
    pub best: usize,
}

impl TuneResult {
    pub fn best_pair(&self) -> (f64, f64) {
        let r = &self.rows[self.best];
        (r.b1, r.b2)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "{:>4} {:>4} {:>7} {:>6} {:>6} {:>6}",
            "b1",
            "b2",
            self.objective.name(),
            "HOTA",
            "IDF1",
            "MOTA"
        );
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{:>4.1} {:>4.1} {:>7.1} {:>6.1} {:>6.1} {:>6.1}",
                r.b1,
                r.b2,
                r.score * 100.0,
                r.hota * 100.0,
                r.idf1 * 100.0,
                r.mota * 100.0
            );
        }
        let (b1, b2) = self.best_pair();
        let _ = writeln!(
            s,
            "best b1={b1:.1} b2={b2:.1} {}={:.1}",
            self.objective.name().to_ascii_lowercase(),
            self.rows[self.best].score * 100.0
        );
        s
    }
}

/// Index of the highest score; the first row wins ties, so with rows in
/// `(b1, b2)` order ties go to the smaller pair.
pub fn select_best(scores: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best
}

pub(crate) fn check_ground_truth(sequences: &[Sequence]) -> Result<(), HarnessError> {
    if sequences.is_empty() {
        return Err(HarnessError::NoGroundTruth("no sequences".into()));
    }
    if let Some(s) = sequences.iter().find(|s| s.ground_truth.is_empty()) {
        return Err(HarnessError::NoGroundTruth(s.name.clone()));
    }
    Ok(())
}

fn mean_reports(reports: &[MetricReport]) -> (f64, f64, f64) {
    let n = reports.len() as f64;
    let sum = |f: fn(&MetricReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
    (sum(|r| r.hota), sum(|r| r.idf1), sum(|r| r.mota))
}

/// Runs the tracker for every admissible pair on every sequence and picks the
/// pair with the best mean objective. Only `b1`/`b2` of `base` are varied.
pub fn tune(
    sequences: &[Sequence],
    spec: &GridSearchSpec,
    base: &TrackerConfig,
    exec: Execution,
) -> Result<TuneResult, HarnessError> {
    check_ground_truth(sequences)?;
    let combos = spec.combinations();
    if combos.is_empty() {
        return Err(HarnessError::EmptyGrid);
    }
    let rows = exec.map(&combos, |&(b1, b2)| -> Result<TuneRow, HarnessError> {
        let config = TrackerConfig {
            b1: BufferScale::new(b1)?,
            b2: BufferScale::new(b2)?,
            ..base.clone()
        };
        let mut reports = Vec::with_capacity(sequences.len());
        for seq in sequences {
            let tracklets = run_sequence(&seq.detections, &config)?;
            let pred = FrameAnnotations::from_tracklets(&tracklets)?;
            reports.push(evaluate(&seq.ground_truth, &pred, Execution::Sequential));
        }
        let score = reports.iter().map(|r| spec.objective.of(r)).sum::<f64>() / reports.len() as f64;
        let (hota, idf1, mota) = mean_reports(&reports);
        Ok(TuneRow {
            b1,
            b2,
            score,
            hota,
            idf1,
            mota,
        })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>, _>>()?;
    let scores: Vec<f64> = rows.iter().map(|r| r.score).collect();
    let best = select_best(&scores).expect("non-empty grid");
    Ok(TuneResult {
        objective: spec.objective,
        rows,
        best,
    })
}
