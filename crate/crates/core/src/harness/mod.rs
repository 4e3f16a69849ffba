//! Synthetic scenes, buffer tuning, ablation and the command line.

pub mod ablate;
pub mod cli;
pub mod scene;
pub mod tune;

use thiserror::Error;

use crate::data_io::DataError;
use crate::geometry::GeometryError;
use crate::metrics::{AnnotationError, FrameAnnotations};
use crate::refine::RefineError;
use crate::tracker::{ConfigError, DetectionsByFrame, TrackError};

pub use ablate::{ablate, AblationRow, AblationTable, Variant, VARIANTS};
pub use scene::{generate_scene, SceneError, SceneSpec, SyntheticScene};
pub use tune::{select_best, tune, GridSearchSpec, Objective, TuneResult, TuneRow};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("no ground truth for {0}")]
    NoGroundTruth(String),
    #[error("grid search has no admissible (b1 < b2) pair")]
    EmptyGrid,
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Annotation(#[from] AnnotationError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Scene(#[from] SceneError),
    #[error(transparent)]
    Refine(#[from] RefineError),
}

/// Detections of one video with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub name: String,
    pub detections: DetectionsByFrame,
    pub ground_truth: FrameAnnotations,
}

impl From<SyntheticScene> for Sequence {
    fn from(scene: SyntheticScene) -> Self {
        Self {
            name: scene.spec.name,
            detections: scene.detections,
            ground_truth: scene.ground_truth,
        }
    }
}
