//! Multi-object tracking by detection with cascaded buffered-IoU association.
//!
//! The online stage ([`tracker`]) links per-frame detections into short
//! tracklets using IoU of proportionally enlarged boxes ([`geometry`]) and an
//! averaged-motion predictor ([`motion`]). The offline stage ([`refine`])
//! merges tracklets by appearance. [`metrics`] scores results, [`data_io`]
//! reads and writes MOTChallenge-style files, and [`harness`] provides
//! synthetic scenes, buffer tuning, ablation and the `cbiou` command line.

pub mod assignment;
pub mod data_io;
pub mod exec;
pub mod geometry;
pub mod harness;
pub mod metrics;
pub mod motion;
pub mod refine;
pub mod tracker;
pub mod tracklet;

pub use exec::Execution;
pub use geometry::{biou, buffer_box, diou, giou, iou, BoundingBox, BufferScale, Similarity};
pub use metrics::{evaluate, FrameAnnotations, MetricReport};
pub use motion::{average_motion, predict_state, BoxDelta, MotionWindow};
pub use tracker::{run_sequence, Detection, DetectionsByFrame, TrackerConfig, TrackerState};
pub use tracklet::{Observation, Tracklet};
