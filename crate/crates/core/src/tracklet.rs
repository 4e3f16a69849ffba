use thiserror::Error;

use crate::geometry::BoundingBox;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrackletError {
    #[error("tracklet {id}: frame {frame} does not follow frame {prev}")]
    NonIncreasingFrames { id: u32, prev: u32, frame: u32 },
    #[error("tracklet {id}: {features} feature vectors for {frames} frames")]
    FeatureCount { id: u32, features: usize, frames: usize },
    #[error("tracklet {id}: feature vector at frame {frame} has zero or non-finite norm")]
    DegenerateFeature { id: u32, frame: u32 },
    #[error("tracklet {id}: feature dimension {got} differs from {expected}")]
    FeatureDimension { id: u32, expected: usize, got: usize },
}

/// One matched detection of a track.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub frame: u32,
    pub bbox: BoundingBox,
    pub score: f64,
}

/// A finished track: its observed frames, boxes and optional per-frame
/// appearance features. Frames are strictly increasing; gaps are allowed.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet {
    id: u32,
    observations: Vec<Observation>,
    features: Option<Vec<Vec<f64>>>,
}

impl Tracklet {
    pub fn new(id: u32, observations: Vec<Observation>) -> Result<Self, TrackletError> {
        for pair in observations.windows(2) {
            if pair[1].frame <= pair[0].frame {
                return Err(TrackletError::NonIncreasingFrames {
                    id,
                    prev: pair[0].frame,
                    frame: pair[1].frame,
                });
            }
        }
        Ok(Self {
            id,
            observations,
            features: None,
        })
    }

    /// Attaches one feature vector per observation.
    pub fn with_features(mut self, features: Vec<Vec<f64>>) -> Result<Self, TrackletError> {
        if features.len() != self.observations.len() {
            return Err(TrackletError::FeatureCount {
                id: self.id,
                features: features.len(),
                frames: self.observations.len(),
            });
        }
        let dim = features.first().map_or(0, Vec::len);
        for (f, obs) in features.iter().zip(&self.observations) {
            if f.len() != dim {
                return Err(TrackletError::FeatureDimension {
                    id: self.id,
                    expected: dim,
                    got: f.len(),
                });
            }
            let norm2: f64 = f.iter().map(|v| v * v).sum();
            if !(norm2.is_finite() && norm2 > 0.0) {
                return Err(TrackletError::DegenerateFeature {
                    id: self.id,
                    frame: obs.frame,
                });
            }
        }
        self.features = Some(features);
        Ok(self)
    }

    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn frames(&self) -> impl Iterator<Item = u32> + '_ {
        self.observations.iter().map(|o| o.frame)
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn first_frame(&self) -> Option<u32> {
        self.observations.first().map(|o| o.frame)
    }

    pub fn last_frame(&self) -> Option<u32> {
        self.observations.last().map(|o| o.frame)
    }

    pub fn features(&self) -> Option<&[Vec<f64>]> {
        self.features.as_deref()
    }

    /// True when the two tracklets observe at least one common frame.
    pub fn overlaps(&self, other: &Tracklet) -> bool {
        let (mut i, mut j) = (0, 0);
        let (a, b) = (&self.observations, &other.observations);
        while i < a.len() && j < b.len() {
            match a[i].frame.cmp(&b[j].frame) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => return true,
            }
        }
        false
    }

    pub(crate) fn into_parts(self) -> (u32, Vec<Observation>, Option<Vec<Vec<f64>>>) {
        (self.id, self.observations, self.features)
    }
}
