//! Kalman-free motion model.
//!
//! A track keeps its last few matched observations. The per-frame motion is
//! the mean of the most recent displacements, and the state after a gap of
//! `Δ` frames is the last observation moved by `Δ` times that mean.

use std::collections::VecDeque;

use thiserror::Error;

use crate::geometry::BoundingBox;

/// Smallest width/height an extrapolated box may shrink to.
pub const MIN_EXTENT: f64 = 1e-3;

pub const MIN_MOTION_CAP: usize = 2;
pub const MAX_MOTION_CAP: usize = 5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MotionError {
    #[error("need at least two observations to estimate motion, have {0}")]
    InsufficientHistory(usize),
    #[error("motion window size {0} outside [2, 5]")]
    InvalidCap(usize),
    #[error("observation at frame {new} does not follow frame {last}")]
    NonIncreasingFrame { last: u32, new: u32 },
}

/// Per-frame displacement of the four box components.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BoxDelta {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoxDelta {
    pub const ZERO: BoxDelta = BoxDelta {
        x: 0.0,
        y: 0.0,
        w: 0.0,
        h: 0.0,
    };
}

/// Recent matched observations of one track, oldest first.
///
/// Holds at most `cap + 1` boxes, enough for `cap` displacements.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionWindow {
    cap: usize,
    history: VecDeque<(u32, BoundingBox)>,
}

impl MotionWindow {
    pub fn new(cap: usize) -> Result<Self, MotionError> {
        if !(MIN_MOTION_CAP..=MAX_MOTION_CAP).contains(&cap) {
            return Err(MotionError::InvalidCap(cap));
        }
        Ok(Self {
            cap,
            history: VecDeque::with_capacity(cap + 1),
        })
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn len(&self) -> usize {
        self.history.len()
    }

    pub fn is_empty(&self) -> bool {
        self.history.is_empty()
    }

    pub fn last(&self) -> Option<&(u32, BoundingBox)> {
        self.history.back()
    }

    pub fn iter(&self) -> impl Iterator<Item = &(u32, BoundingBox)> {
        self.history.iter()
    }

    pub fn push(&mut self, frame: u32, bbox: BoundingBox) -> Result<(), MotionError> {
        if let Some(&(last, _)) = self.history.back() {
            if frame <= last {
                return Err(MotionError::NonIncreasingFrame { last, new: frame });
            }
        }
        self.history.push_back((frame, bbox));
        while self.history.len() > self.cap + 1 {
            self.history.pop_front();
        }
        Ok(())
    }
}

/// Mean per-frame displacement over the most recent `min(cap, len - 1)`
/// displacements. Displacements between non-adjacent matches are divided by
/// their frame gap.
pub fn average_motion(window: &MotionWindow) -> Result<BoxDelta, MotionError> {
    let len = window.history.len();
    if len < 2 {
        return Err(MotionError::InsufficientHistory(len));
    }
    let n = (len - 1).min(window.cap);
    let mut sum = BoxDelta::ZERO;
    let recent = window.history.range(len - n - 1..);
    for ((f0, a), (f1, c)) in recent.clone().zip(recent.skip(1)) {
        let gap = f64::from(f1 - f0);
        sum.x += (c.x - a.x) / gap;
        sum.y += (c.y - a.y) / gap;
        sum.w += (c.w - a.w) / gap;
        sum.h += (c.h - a.h) / gap;
    }
    let n = n as f64;
    Ok(BoxDelta {
        x: sum.x / n,
        y: sum.y / n,
        w: sum.w / n,
        h: sum.h / n,
    })
}

/// Extrapolates `last` by `gap` frames of `delta`. Width and height are
/// floored at [`MIN_EXTENT`].
pub fn predict_state(last: &BoundingBox, delta: &BoxDelta, gap: u32) -> BoundingBox {
    if gap == 0 {
        return *last;
    }
    let g = f64::from(gap);
    BoundingBox {
        x: last.x + g * delta.x,
        y: last.y + g * delta.y,
        w: (last.w + g * delta.w).max(MIN_EXTENT),
        h: (last.h + g * delta.h).max(MIN_EXTENT),
    }
}
