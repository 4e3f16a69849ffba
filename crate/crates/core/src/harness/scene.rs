//! Scripted synthetic scenes with exact ground truth.
//!
//! Scene files are `key=value` lines plus object scripts:
//!
//! ```text
//! seed=1
//! frames=60
//! jitter=0        # detector noise sigma, pixels
//! drop=0          # per-detection drop probability
//! score=1         # detection confidence
//! object 1 box: 0 100 20 40
//! object 1: 1..30 24 0 0 0     # frames a..b, per-frame vx vy vw vh
//! ```
//!
//! An object exists on the frames its segments cover. Its first frame shows
//! the `box:` line; every later covered frame adds the velocity of the
//! segment containing it.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::geometry::BoundingBox;
use crate::metrics::FrameAnnotations;
use crate::tracker::{Detection, DetectionsByFrame};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("scene line {line}: {reason}")]
    Syntax { line: usize, reason: String },
    #[error("object {0} has segments but no `box:` line")]
    MissingBox(u32),
    #[error("object {0} has a `box:` line but no segments")]
    NoSegments(u32),
    #[error("object {id}: segments overlap at frame {frame}")]
    OverlappingSegments { id: u32, frame: u32 },
    #[error("object {id} degenerates at frame {frame}")]
    DegenerateBox { id: u32, frame: u32 },
    #[error("unknown scene `{0}`")]
    UnknownScene(String),
}

/// Object id to `(frame, [x, y, w, h])` rows.
type Trajectories = BTreeMap<u32, Vec<(u32, [f64; 4])>>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub first: u32,
    pub last: u32,
    pub velocity: [f64; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectScript {
    pub id: u32,
    pub initial: [f64; 4],
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub name: String,
    pub seed: u64,
    pub frames: u32,
    pub jitter: f64,
    pub drop: f64,
    pub score: f64,
    pub objects: Vec<ObjectScript>,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            name: "scene".into(),
            seed: 0,
            frames: 0,
            jitter: 0.0,
            drop: 0.0,
            score: 1.0,
            objects: Vec::new(),
        }
    }
}

const BUILTIN: &[(&str, &str)] = &[
    ("teleport", include_str!("../../scenes/teleport.scene")),
    ("mixed", include_str!("../../scenes/mixed.scene")),
    ("fragment", include_str!("../../scenes/fragment.scene")),
    ("dancer", include_str!("../../scenes/dancer.scene")),
    ("static", include_str!("../../scenes/static.scene")),
];

pub fn builtin_names() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(n, _)| *n)
}

pub fn builtin(name: &str) -> Result<SceneSpec, SceneError> {
    let (_, text) = BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| SceneError::UnknownScene(name.to_string()))?;
    SceneSpec::parse(text)
}

fn syntax(line: usize, reason: impl Into<String>) -> SceneError {
    SceneError::Syntax {
        line,
        reason: reason.into(),
    }
}

fn numbers<const N: usize>(text: &str, line: usize) -> Result<[f64; N], SceneError> {
    let values: Vec<f64> = text
        .split_whitespace()
        .map(|t| t.parse::<f64>().ok().filter(|v| v.is_finite()))
        .collect::<Option<_>>()
        .ok_or_else(|| syntax(line, format!("invalid number in `{text}`")))?;
    values
        .try_into()
        .map_err(|v: Vec<f64>| syntax(line, format!("expected {N} numbers, found {}", v.len())))
}

impl SceneSpec {
    pub fn parse(text: &str) -> Result<Self, SceneError> {
        let mut spec = SceneSpec::default();
        let mut boxes: BTreeMap<u32, [f64; 4]> = BTreeMap::new();
        let mut segments: BTreeMap<u32, Vec<Segment>> = BTreeMap::new();

        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix("object") {
                let (head, body) = rest
                    .split_once(':')
                    .ok_or_else(|| syntax(line, "object line needs `:`"))?;
                let mut head = head.split_whitespace();
                let id: u32 = head
                    .next()
                    .and_then(|t| t.parse().ok())
                    .ok_or_else(|| syntax(line, "object id must be an integer"))?;
                match head.next() {
                    Some("box") => {
                        let b = numbers::<4>(body, line)?;
                        if b[2] <= 0.0 || b[3] <= 0.0 {
                            return Err(syntax(line, "box extent must be positive"));
                        }
                        boxes.insert(id, b);
                    }
                    None => {
                        let body = body.trim();
                        let (range, vel) = body
                            .split_once(char::is_whitespace)
                            .ok_or_else(|| syntax(line, "segment needs `a..b vx vy vw vh`"))?;
                        let (a, b) = range
                            .split_once("..")
                            .and_then(|(a, b)| Some((a.parse::<u32>().ok()?, b.parse::<u32>().ok()?)))
                            .ok_or_else(|| syntax(line, format!("invalid frame range `{range}`")))?;
                        if a == 0 || b < a {
                            return Err(syntax(line, format!("invalid frame range `{range}`")));
                        }
                        segments.entry(id).or_default().push(Segment {
                            first: a,
                            last: b,
                            velocity: numbers::<4>(vel, line)?,
                        });
                    }
                    Some(other) => return Err(syntax(line, format!("unknown object field `{other}`"))),
                }
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| syntax(line, "expected key=value"))?;
            let (key, value) = (key.trim(), value.trim());
            let bad = || syntax(line, format!("invalid value for `{key}`: `{value}`"));
            match key {
                "name" => spec.name = value.to_string(),
                "seed" => spec.seed = value.parse().map_err(|_| bad())?,
                "frames" => spec.frames = value.parse().map_err(|_| bad())?,
                "jitter" => {
                    spec.jitter = value.parse().ok().filter(|v: &f64| v.is_finite() && *v >= 0.0).ok_or_else(bad)?
                }
                "drop" => {
                    spec.drop = value.parse().ok().filter(|v: &f64| (0.0..=1.0).contains(v)).ok_or_else(bad)?
                }
                "score" => {
                    spec.score = value.parse().ok().filter(|v: &f64| (0.0..=1.0).contains(v)).ok_or_else(bad)?
                }
                _ => return Err(syntax(line, format!("unknown key `{key}`"))),
            }
        }

        for id in segments.keys() {
            if !boxes.contains_key(id) {
                return Err(SceneError::MissingBox(*id));
            }
        }
        for (id, initial) in boxes {
            let mut segs = segments.remove(&id).ok_or(SceneError::NoSegments(id))?;
            segs.sort_by_key(|s| s.first);
            for w in segs.windows(2) {
                if w[1].first <= w[0].last {
                    return Err(SceneError::OverlappingSegments { id, frame: w[1].first });
                }
            }
            spec.objects.push(ObjectScript {
                id,
                initial,
                segments: segs,
            });
        }
        Ok(spec)
    }

    /// Ground-truth boxes of every object, frame by frame, before quantization.
    fn trajectories(&self) -> Result<Trajectories, SceneError> {
        let mut out = BTreeMap::new();
        for obj in &self.objects {
            let mut boxes = Vec::new();
            let mut current: Option<[f64; 4]> = None;
            for seg in &obj.segments {
                for frame in seg.first..=seg.last.min(self.frames) {
                    let next = match current {
                        None => obj.initial,
                        Some(c) => std::array::from_fn(|k| c[k] + seg.velocity[k]),
                    };
                    if next[2] <= 0.0 || next[3] <= 0.0 {
                        return Err(SceneError::DegenerateBox { id: obj.id, frame });
                    }
                    current = Some(next);
                    boxes.push((frame, next));
                }
            }
            out.insert(obj.id, boxes);
        }
        Ok(out)
    }
}

fn quantize(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

fn to_box(v: [f64; 4]) -> BoundingBox {
    BoundingBox::new(quantize(v[0]), quantize(v[1]), quantize(v[2]).max(0.01), quantize(v[3]).max(0.01))
        .expect("finite positive box")
}

/// A generated scene: noisy detections plus exact ground truth. All
/// coordinates are rounded to 0.01 px so the text formats reproduce them.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub spec: SceneSpec,
    pub detections: DetectionsByFrame,
    pub ground_truth: FrameAnnotations,
}

pub fn generate_scene(spec: &SceneSpec) -> Result<SyntheticScene, SceneError> {
    let trajectories = spec.trajectories()?;
    let mut by_frame: BTreeMap<u32, Vec<(u32, [f64; 4])>> = BTreeMap::new();
    for (id, boxes) in &trajectories {
        for &(frame, b) in boxes {
            by_frame.entry(frame).or_default().push((*id, b));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.jitter.max(f64::MIN_POSITIVE)).expect("valid sigma");
    let mut detections = DetectionsByFrame::new();
    let mut ground_truth = FrameAnnotations::new();

    for (frame, objects) in by_frame {
        for (id, b) in objects {
            ground_truth
                .insert(frame, id, to_box(b))
                .expect("object ids are unique");
            let dropped = rng.random::<f64>() < spec.drop;
            let jitter: [f64; 4] = std::array::from_fn(|_| {
                if spec.jitter > 0.0 {
                    noise.sample(&mut rng)
                } else {
                    0.0
                }
            });
            if dropped {
                continue;
            }
            let noisy: [f64; 4] = std::array::from_fn(|k| b[k] + jitter[k]);
            let noisy = [noisy[0], noisy[1], noisy[2].max(1.0), noisy[3].max(1.0)];
            detections
                .entry(frame)
                .or_default()
                .push(Detection::new(frame, to_box(noisy), spec.score));
        }
    }
    Ok(SyntheticScene {
        spec: spec.clone(),
        detections,
        ground_truth,
    })
}
