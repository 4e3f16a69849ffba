//! Online cascaded buffered-IoU tracker.
//!
//! Each frame, alive tracks are extrapolated with the averaged-motion model
//! and matched to detections in two rounds: first with the small buffer `b1`,
//! then the leftovers with the large buffer `b2`. Track management follows
//! SORT: unmatched detections start tracks, tracks unmatched for more than
//! `max_age` frames are terminated.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::assignment::{similarity_costs, solve};
use crate::geometry::{BoundingBox, BufferScale, GeometryError, Similarity};
use crate::motion::{average_motion, predict_state, BoxDelta, MotionError, MotionWindow};
use crate::tracklet::{Observation, Tracklet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("small buffer b1={b1} must not exceed large buffer b2={b2}")]
    BufferOrder { b1: f64, b2: f64 },
    #[error(transparent)]
    Buffer(#[from] GeometryError),
    #[error(transparent)]
    Motion(#[from] MotionError),
    #[error("max_age must be at least 1")]
    MaxAge,
    #[error("min_hits must be at least 1")]
    MinHits,
    #[error("match floor {0} outside [0, 1)")]
    MatchFloor(f64),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackError {
    #[error("frame {got} does not follow frame {last}")]
    OutOfOrderFrame { last: u32, got: u32 },
    #[error("detection for frame {detection} passed at frame {frame}")]
    FrameMismatch { frame: u32, detection: u32 },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub frame: u32,
    pub bbox: BoundingBox,
    pub score: f64,
}

impl Detection {
    pub fn new(frame: u32, bbox: BoundingBox, score: f64) -> Self {
        Self { frame, bbox, score }
    }
}

/// Detections keyed by frame index.
pub type DetectionsByFrame = BTreeMap<u32, Vec<Detection>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Terminated,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerConfig {
    pub b1: BufferScale,
    pub b2: BufferScale,
    pub motion_cap: usize,
    pub max_age: u32,
    pub min_hits: u32,
    pub match_floor: f64,
    /// Association score. `Buffered` is the C-BIoU tracker; the others exist
    /// for ablation.
    pub similarity: Similarity,
    /// Two matching rounds (`b1` then `b2`). When off, a single round at `b2`.
    pub cascade: bool,
    /// Averaged-motion extrapolation. When off, tracks are predicted static.
    pub motion: bool,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            b1: BufferScale::new(0.3).unwrap(),
            b2: BufferScale::new(0.4).unwrap(),
            motion_cap: 3,
            max_age: 30,
            min_hits: 1,
            match_floor: 0.0,
            similarity: Similarity::Buffered,
            cascade: true,
            motion: true,
        }
    }
}

impl TrackerConfig {
    /// C-BIoU with the given buffers and default everything else.
    pub fn with_buffers(b1: f64, b2: f64) -> Result<Self, ConfigError> {
        let config = Self {
            b1: BufferScale::new(b1)?,
            b2: BufferScale::new(b2)?,
            ..Self::default()
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.b1 > self.b2 {
            return Err(ConfigError::BufferOrder {
                b1: self.b1.value(),
                b2: self.b2.value(),
            });
        }
        MotionWindow::new(self.motion_cap)?;
        if self.max_age < 1 {
            return Err(ConfigError::MaxAge);
        }
        if self.min_hits < 1 {
            return Err(ConfigError::MinHits);
        }
        if !(0.0..1.0).contains(&self.match_floor) {
            return Err(ConfigError::MatchFloor(self.match_floor));
        }
        Ok(())
    }

    fn rounds(&self) -> Vec<BufferScale> {
        if self.cascade {
            vec![self.b1, self.b2]
        } else {
            vec![self.b2]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    id: u32,
    state: BoundingBox,
    window: MotionWindow,
    delta: BoxDelta,
    misses: u32,
    hits: u32,
    status: TrackStatus,
    was_confirmed: bool,
    observations: Vec<Observation>,
    emitted: usize,
}

impl Track {
    fn start(id: u32, det: &Detection, cap: usize) -> Self {
        let mut window = MotionWindow::new(cap).expect("cap validated with config");
        window.push(det.frame, det.bbox).expect("empty window");
        Self {
            id,
            state: det.bbox,
            window,
            delta: BoxDelta::ZERO,
            misses: 0,
            hits: 1,
            status: TrackStatus::Tentative,
            was_confirmed: false,
            observations: vec![Observation {
                frame: det.frame,
                bbox: det.bbox,
                score: det.score,
            }],
            emitted: 0,
        }
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn state(&self) -> &BoundingBox {
        &self.state
    }

    pub fn misses(&self) -> u32 {
        self.misses
    }

    pub fn hits(&self) -> u32 {
        self.hits
    }

    pub fn status(&self) -> TrackStatus {
        self.status
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    fn last_matched_frame(&self) -> u32 {
        self.observations.last().expect("tracks start with one observation").frame
    }

    fn last_box(&self) -> BoundingBox {
        self.observations.last().expect("tracks start with one observation").bbox
    }

    /// State extrapolated to `frame` from the last matched box.
    pub fn predict(&self, frame: u32) -> BoundingBox {
        predict_state(&self.last_box(), &self.delta, frame - self.last_matched_frame())
    }

    fn update(&mut self, det: &Detection, config: &TrackerConfig) {
        self.observations.push(Observation {
            frame: det.frame,
            bbox: det.bbox,
            score: det.score,
        });
        self.window
            .push(det.frame, det.bbox)
            .expect("frames are strictly increasing");
        self.delta = if config.motion {
            average_motion(&self.window).unwrap_or(BoxDelta::ZERO)
        } else {
            BoxDelta::ZERO
        };
        self.state = det.bbox;
        self.misses = 0;
        self.hits += 1;
    }

    /// Promotes to `Confirmed` once `min_hits` is reached and returns the
    /// observations not yet emitted.
    fn drain_confirmed(&mut self, min_hits: u32) -> &[Observation] {
        if self.status == TrackStatus::Tentative && self.hits >= min_hits {
            self.status = TrackStatus::Confirmed;
            self.was_confirmed = true;
        }
        if self.status != TrackStatus::Confirmed {
            return &[];
        }
        let start = self.emitted;
        self.emitted = self.observations.len();
        &self.observations[start..]
    }

    fn into_tracklet(self) -> Tracklet {
        Tracklet::new(self.id, self.observations).expect("observations increase by construction")
    }
}

/// One output row: track `id` observed at `frame`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackOutput {
    pub frame: u32,
    pub id: u32,
    pub bbox: BoundingBox,
    pub score: f64,
}

/// Per-sequence tracker state. `step` must be called with increasing frames.
#[derive(Debug, Clone)]
pub struct TrackerState {
    config: TrackerConfig,
    alive: Vec<Track>,
    finished: Vec<Track>,
    next_id: u32,
    last_frame: Option<u32>,
}

/// Matches produced by one frame, for inspection in tests.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FrameMatches {
    /// `(round, track id, detection index)`
    pub pairs: Vec<(usize, u32, usize)>,
}

impl TrackerState {
    pub fn new(config: TrackerConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(Self {
            config,
            alive: Vec::new(),
            finished: Vec::new(),
            next_id: 1,
            last_frame: None,
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn alive(&self) -> &[Track] {
        &self.alive
    }

    pub fn step(&mut self, frame: u32, detections: &[Detection]) -> Result<Vec<TrackOutput>, TrackError> {
        self.step_detailed(frame, detections).map(|(out, _)| out)
    }

    pub fn step_detailed(
        &mut self,
        frame: u32,
        detections: &[Detection],
    ) -> Result<(Vec<TrackOutput>, FrameMatches), TrackError> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(TrackError::OutOfOrderFrame { last, got: frame });
            }
        }
        if let Some(d) = detections.iter().find(|d| d.frame != frame) {
            return Err(TrackError::FrameMismatch {
                frame,
                detection: d.frame,
            });
        }
        self.last_frame = Some(frame);

        let predicted: Vec<BoundingBox> = self.alive.iter().map(|t| t.predict(frame)).collect();

        let mut free_tracks: Vec<usize> = (0..self.alive.len()).collect();
        let mut free_dets: Vec<usize> = (0..detections.len()).collect();
        let mut track_match: Vec<Option<usize>> = vec![None; self.alive.len()];
        let mut matches = FrameMatches::default();

        for (round, buffer) in self.config.rounds().into_iter().enumerate() {
            if free_tracks.is_empty() || free_dets.is_empty() {
                break;
            }
            let costs = similarity_costs(
                free_tracks.len(),
                free_dets.len(),
                self.config.match_floor,
                |r, c| {
                    self.config.similarity.score(
                        &predicted[free_tracks[r]],
                        &detections[free_dets[c]].bbox,
                        buffer,
                    )
                },
            );
            let result = solve(&costs);
            for &(r, c) in &result.matches {
                let (ti, di) = (free_tracks[r], free_dets[c]);
                track_match[ti] = Some(di);
                matches.pairs.push((round, self.alive[ti].id, di));
            }
            free_tracks = result.unmatched_rows.iter().map(|&r| free_tracks[r]).collect();
            free_dets = result.unmatched_cols.iter().map(|&c| free_dets[c]).collect();
        }

        let mut output = Vec::new();
        let min_hits = self.config.min_hits;
        let mut survivors = Vec::with_capacity(self.alive.len() + free_dets.len());
        for (i, mut track) in std::mem::take(&mut self.alive).into_iter().enumerate() {
            match track_match[i] {
                Some(di) => {
                    track.update(&detections[di], &self.config);
                    emit(&mut output, &mut track, min_hits);
                    survivors.push(track);
                }
                None => {
                    track.misses = frame - track.last_matched_frame();
                    track.state = predicted[i];
                    if track.misses > self.config.max_age {
                        track.status = TrackStatus::Terminated;
                        self.finished.push(track);
                    } else {
                        survivors.push(track);
                    }
                }
            }
        }
        for &di in &free_dets {
            let mut track = Track::start(self.next_id, &detections[di], self.config.motion_cap);
            self.next_id += 1;
            emit(&mut output, &mut track, min_hits);
            survivors.push(track);
        }
        self.alive = survivors;

        output.sort_by_key(|o| (o.frame, o.id));
        Ok((output, matches))
    }

    /// Ends the sequence and returns every track that was ever confirmed,
    /// sorted by id.
    pub fn finish(self) -> Vec<Tracklet> {
        let mut tracks: Vec<Track> = self
            .finished
            .into_iter()
            .chain(self.alive)
            .filter(|t| t.was_confirmed)
            .collect();
        tracks.sort_by_key(|t| t.id);
        tracks.into_iter().map(Track::into_tracklet).collect()
    }
}

fn emit(output: &mut Vec<TrackOutput>, track: &mut Track, min_hits: u32) {
    let id = track.id;
    output.extend(track.drain_confirmed(min_hits).iter().map(|o| TrackOutput {
        frame: o.frame,
        id,
        bbox: o.bbox,
        score: o.score,
    }));
}

/// Tracks a whole sequence. Every frame between the first and last
/// detection frame is stepped, so frames without detections still age tracks.
pub fn run_sequence(detections: &DetectionsByFrame, config: &TrackerConfig) -> Result<Vec<Tracklet>, TrackError> {
    let mut state = TrackerState::new(config.clone())?;
    let (Some(&first), Some(&last)) = (detections.keys().next(), detections.keys().next_back()) else {
        return Ok(Vec::new());
    };
    for frame in first..=last {
        let dets = detections.get(&frame).map_or(&[][..], Vec::as_slice);
        state.step(frame, dets)?;
    }
    Ok(state.finish())
}
