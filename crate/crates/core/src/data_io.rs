//! MOTChallenge-style text formats and detection merging.
//!
//! * detections: `frame,-1,x,y,w,h,score[,...]`
//! * ground truth: `frame,id,x,y,w,h[,flag,...]`, rows with `flag == 0` are ignored
//! * results: `frame,id,x,y,w,h,score,-1,-1,-1`
//! * embeddings: header `d=<dim>`, then `frame,index,v1,...,vd`
//!
//! LF and CRLF are accepted, LF is written. Coordinates are written with two
//! decimals and scores with four.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{self, BufRead, BufReader};
use std::path::Path;

use thiserror::Error;

use crate::geometry::{iou, BoundingBox};
use crate::metrics::{AnnotationError, FrameAnnotations};
use crate::tracker::{Detection, DetectionsByFrame};
use crate::tracklet::{Observation, Tracklet, TrackletError};

pub const DEFAULT_NMS_IOU: f64 = 0.7;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("no embedding for frame {frame}, index {index}")]
    MissingEmbedding { frame: u32, index: u32 },
    #[error(transparent)]
    Tracklet(#[from] TrackletError),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
}

impl DataError {
    fn parse(line: usize, reason: impl Into<String>) -> Self {
        DataError::Parse {
            line,
            reason: reason.into(),
        }
    }
}

fn open(path: &Path) -> Result<BufReader<std::fs::File>, DataError> {
    std::fs::File::open(path)
        .map(BufReader::new)
        .map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })
}

/// Non-empty lines split on commas, with 1-based line numbers.
fn records<R: BufRead>(reader: R) -> impl Iterator<Item = Result<(usize, Vec<String>), DataError>> {
    reader.lines().enumerate().filter_map(|(i, line)| {
        let line_no = i + 1;
        match line {
            Err(e) => Some(Err(DataError::parse(line_no, e.to_string()))),
            Ok(l) => {
                let l = l.trim();
                if l.is_empty() {
                    None
                } else {
                    Some(Ok((line_no, l.split(',').map(|f| f.trim().to_string()).collect())))
                }
            }
        }
    })
}

fn field<T: std::str::FromStr>(fields: &[String], idx: usize, name: &str, line: usize) -> Result<T, DataError> {
    let raw = fields
        .get(idx)
        .ok_or_else(|| DataError::parse(line, format!("missing field `{name}`")))?;
    raw.parse()
        .map_err(|_| DataError::parse(line, format!("invalid {name} `{raw}`")))
}

fn frame_field(fields: &[String], line: usize) -> Result<u32, DataError> {
    let frame: u32 = field(fields, 0, "frame", line)?;
    if frame == 0 {
        return Err(DataError::parse(line, "frame must be >= 1"));
    }
    Ok(frame)
}

fn id_field(fields: &[String], line: usize) -> Result<u32, DataError> {
    let raw: f64 = field(fields, 1, "id", line)?;
    if raw < 1.0 || raw.fract() != 0.0 || raw > f64::from(u32::MAX) {
        return Err(DataError::parse(line, format!("id must be a positive integer, got {raw}")));
    }
    Ok(raw as u32)
}

fn box_fields(fields: &[String], line: usize) -> Result<BoundingBox, DataError> {
    let x: f64 = field(fields, 2, "x", line)?;
    let y: f64 = field(fields, 3, "y", line)?;
    let w: f64 = field(fields, 4, "w", line)?;
    let h: f64 = field(fields, 5, "h", line)?;
    BoundingBox::new(x, y, w, h).map_err(|e| DataError::parse(line, e.to_string()))
}

/// Reads a detection file, grouping by frame. Within a frame the file order
/// is kept.
pub fn parse_detections<R: BufRead>(reader: R) -> Result<DetectionsByFrame, DataError> {
    let mut out = DetectionsByFrame::new();
    for rec in records(reader) {
        let (line, fields) = rec?;
        let frame = frame_field(&fields, line)?;
        let bbox = box_fields(&fields, line)?;
        let score: f64 = field(&fields, 6, "score", line)?;
        if !score.is_finite() {
            return Err(DataError::parse(line, "score must be finite"));
        }
        out.entry(frame).or_default().push(Detection::new(frame, bbox, score));
    }
    Ok(out)
}

pub fn read_detections(path: &Path) -> Result<DetectionsByFrame, DataError> {
    parse_detections(open(path)?)
}

pub fn format_detections(detections: &DetectionsByFrame) -> String {
    let mut s = String::new();
    for (frame, dets) in detections {
        for d in dets {
            let [x, y, w, h] = d.bbox.to_xywh();
            let _ = writeln!(s, "{frame},-1,{x:.2},{y:.2},{w:.2},{h:.2},{:.4}", d.score);
        }
    }
    s
}

pub fn parse_ground_truth<R: BufRead>(reader: R) -> Result<FrameAnnotations, DataError> {
    let mut out = FrameAnnotations::new();
    for rec in records(reader) {
        let (line, fields) = rec?;
        let frame = frame_field(&fields, line)?;
        let id = id_field(&fields, line)?;
        let bbox = box_fields(&fields, line)?;
        if let Some(flag) = fields.get(6) {
            let flag: f64 = flag
                .parse()
                .map_err(|_| DataError::parse(line, format!("invalid flag `{flag}`")))?;
            if flag == 0.0 {
                continue;
            }
        }
        out.insert(frame, id, bbox)
            .map_err(|e| DataError::parse(line, e.to_string()))?;
    }
    Ok(out)
}

pub fn read_ground_truth(path: &Path) -> Result<FrameAnnotations, DataError> {
    parse_ground_truth(open(path)?)
}

pub fn format_ground_truth(gt: &FrameAnnotations) -> String {
    let mut s = String::new();
    for (frame, entries) in gt.frames() {
        let mut entries = entries.to_vec();
        entries.sort_by_key(|(id, _)| *id);
        for (id, b) in entries {
            let [x, y, w, h] = b.to_xywh();
            let _ = writeln!(s, "{frame},{id},{x:.2},{y:.2},{w:.2},{h:.2},1,1,1");
        }
    }
    s
}

/// Reads a result file into tracklets sorted by id.
pub fn parse_results<R: BufRead>(reader: R) -> Result<Vec<Tracklet>, DataError> {
    let mut by_id: BTreeMap<u32, Vec<Observation>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for rec in records(reader) {
        let (line, fields) = rec?;
        let frame = frame_field(&fields, line)?;
        let id = id_field(&fields, line)?;
        let bbox = box_fields(&fields, line)?;
        let score: f64 = match fields.get(6) {
            Some(_) => field(&fields, 6, "score", line)?,
            None => 1.0,
        };
        if !seen.insert((frame, id)) {
            return Err(DataError::parse(line, format!("duplicate (frame {frame}, id {id})")));
        }
        by_id.entry(id).or_default().push(Observation { frame, bbox, score });
    }
    by_id
        .into_iter()
        .map(|(id, mut obs)| {
            obs.sort_by_key(|o| o.frame);
            Ok(Tracklet::new(id, obs)?)
        })
        .collect()
}

pub fn read_results(path: &Path) -> Result<Vec<Tracklet>, DataError> {
    parse_results(open(path)?)
}

/// Result file text, ordered by frame then id. Only observed frames are
/// written; gaps stay empty.
pub fn format_results(tracklets: &[Tracklet]) -> String {
    let mut rows: Vec<(u32, u32, &Observation)> = tracklets
        .iter()
        .flat_map(|t| t.observations().iter().map(move |o| (o.frame, t.id(), o)))
        .collect();
    rows.sort_by_key(|(f, id, _)| (*f, *id));
    let mut s = String::new();
    for (frame, id, o) in rows {
        let [x, y, w, h] = o.bbox.to_xywh();
        let _ = writeln!(
            s,
            "{frame},{id},{x:.2},{y:.2},{w:.2},{h:.2},{:.4},-1,-1,-1",
            o.score
        );
    }
    s
}

/// Appearance vectors keyed by `(frame, index)`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Embeddings {
    dim: usize,
    vectors: BTreeMap<(u32, u32), Vec<f64>>,
}

impl Embeddings {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            vectors: BTreeMap::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn insert(&mut self, frame: u32, index: u32, vector: Vec<f64>) {
        assert_eq!(vector.len(), self.dim, "embedding dimension");
        self.vectors.insert((frame, index), vector);
    }

    pub fn get(&self, frame: u32, index: u32) -> Option<&[f64]> {
        self.vectors.get(&(frame, index)).map(Vec::as_slice)
    }
}

pub fn parse_embeddings<R: BufRead>(reader: R) -> Result<Embeddings, DataError> {
    let mut recs = records(reader);
    let Some(header) = recs.next() else {
        return Ok(Embeddings::default());
    };
    let (line, header) = header?;
    let dim: usize = match header.as_slice() {
        [h] => h.strip_prefix("d=").and_then(|d| d.trim().parse().ok()),
        _ => None,
    }
    .filter(|&d| d > 0)
    .ok_or_else(|| DataError::parse(line, "expected header `d=<dim>`"))?;

    let mut out = Embeddings::new(dim);
    for rec in recs {
        let (line, fields) = rec?;
        let frame = frame_field(&fields, line)?;
        let index: u32 = field(&fields, 1, "index", line)?;
        if fields.len() != dim + 2 {
            return Err(DataError::parse(
                line,
                format!("expected {dim} values, found {}", fields.len().saturating_sub(2)),
            ));
        }
        let vector = fields[2..]
            .iter()
            .map(|v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
            .collect::<Option<Vec<f64>>>()
            .ok_or_else(|| DataError::parse(line, "invalid vector component"))?;
        if vector.iter().all(|&v| v == 0.0) {
            return Err(DataError::parse(line, "zero embedding vector"));
        }
        out.vectors.insert((frame, index), vector);
    }
    Ok(out)
}

pub fn read_embeddings(path: &Path) -> Result<Embeddings, DataError> {
    parse_embeddings(open(path)?)
}

pub fn format_embeddings(e: &Embeddings) -> String {
    let mut s = format!("d={}\n", e.dim);
    for ((frame, index), v) in &e.vectors {
        let _ = write!(s, "{frame},{index}");
        for x in v {
            let _ = write!(s, ",{x}");
        }
        s.push('\n');
    }
    s
}

/// Attaches per-frame features to result tracklets, looking embeddings up by
/// `(frame, tracklet id)`.
pub fn attach_features(tracklets: Vec<Tracklet>, embeddings: &Embeddings) -> Result<Vec<Tracklet>, DataError> {
    tracklets
        .into_iter()
        .map(|t| {
            let features = t
                .observations()
                .iter()
                .map(|o| {
                    embeddings
                        .get(o.frame, t.id())
                        .map(<[f64]>::to_vec)
                        .ok_or(DataError::MissingEmbedding {
                            frame: o.frame,
                            index: t.id(),
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            Ok(t.with_features(features)?)
        })
        .collect()
}

/// Pools detections from several sources per frame and applies greedy NMS:
/// by descending score, a detection is kept unless its IoU with an already
/// kept one exceeds `iou_threshold`. Equal scores keep source order.
pub fn nms_merge(sources: &[DetectionsByFrame], iou_threshold: f64) -> DetectionsByFrame {
    let mut pooled: DetectionsByFrame = BTreeMap::new();
    for src in sources {
        for (frame, dets) in src {
            pooled.entry(*frame).or_default().extend_from_slice(dets);
        }
    }
    pooled
        .into_iter()
        .map(|(frame, mut dets)| {
            dets.sort_by(|a, b| b.score.total_cmp(&a.score));
            let mut kept: Vec<Detection> = Vec::with_capacity(dets.len());
            for d in dets {
                if kept.iter().all(|k| iou(&k.bbox, &d.bbox) <= iou_threshold) {
                    kept.push(d);
                }
            }
            (frame, kept)
        })
        .collect()
}
