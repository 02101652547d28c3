//! Batch orchestration: per-video estimation chain, run modes and reports.

mod config;
mod report;
mod run;

pub use config::*;
pub use report::*;
pub use run::*;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calib::estimate_pose;
use crate::camera::{BoardUpAxis, CameraError, CameraIntrinsics, CornerSet, MotionPlane};
use crate::fit::FitDiagnostics;
use crate::ingest::{lift_track, track_from_masks, IngestError, MaskSequence, Track3D, VideoMeta};
use crate::metrics::MetricsError;
use crate::physics::{self, ExperimentSpec, PhysicsError, Quantity, RegimeOptions};
use crate::synth::SynthError;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    Physics(#[from] PhysicsError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("{0}")]
    Input(String),
}

impl PipelineError {
    /// True when the failure is a file that does not exist.
    pub fn is_missing(&self) -> bool {
        let io = match self {
            PipelineError::Ingest(e) | PipelineError::Synth(SynthError::Ingest(e)) | PipelineError::Metrics(MetricsError::Ingest(e)) => e,
            _ => return false,
        };
        matches!(io, IngestError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound)
    }
}

/// Everything the estimation chain reads for one object in one video.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoInput {
    pub meta: VideoMeta,
    pub masks: MaskSequence,
    pub corners: CornerSet,
    pub intrinsics: CameraIntrinsics,
    pub up_axis: BoardUpAxis,
}

impl VideoInput {
    /// Reads `meta.json`, `corners.json`, `masks/<object>.json` and the
    /// intrinsics (default `intrinsics.json`) from a bundle directory.
    pub fn load(
        dir: &Path,
        object_id: Option<&str>,
        intrinsics: Option<&Path>,
        up_axis: BoardUpAxis,
    ) -> Result<Self, PipelineError> {
        let meta = VideoMeta::load(&dir.join("meta.json"))?;
        let corners: CornerSet = crate::ingest::read_json(&dir.join("corners.json"))?;
        let mask_path = match object_id {
            Some(id) => dir.join("masks").join(format!("{id}.json")),
            None => sole_mask_file(&dir.join("masks"))?,
        };
        let masks = MaskSequence::load(&mask_path)?;
        let intr_path = intrinsics.map(Path::to_path_buf).unwrap_or_else(|| dir.join("intrinsics.json"));
        let intrinsics: CameraIntrinsics = crate::ingest::read_json(&intr_path)?;
        Ok(Self { meta, masks, corners, intrinsics, up_axis })
    }
}

fn sole_mask_file(dir: &Path) -> Result<std::path::PathBuf, PipelineError> {
    let entries = std::fs::read_dir(dir).map_err(|source| IngestError::Io { path: dir.display().to_string(), source })?;
    let mut files: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    match files.len() {
        1 => Ok(files.remove(0)),
        n => Err(PipelineError::Input(format!("{} holds {n} mask files; name the object", dir.display()))),
    }
}

/// Result of the estimation chain for one video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoEstimate {
    pub quantity: Quantity,
    pub value: f64,
    pub pose_rms_px: f64,
    pub n_samples: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizontal_acceleration: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceleration: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub negative_friction: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub terminal_velocity: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regime: Option<FitDiagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regime_passed: Option<bool>,
}

/// corners → pose → masks → centroids → lift → fit → parameter.
pub fn lift_video(input: &VideoInput) -> Result<(Track3D, f64), PipelineError> {
    input.meta.validate()?;
    if input.masks.len() != input.meta.frame_count {
        return Err(IngestError::FrameCountMismatch { expected: input.meta.frame_count, got: input.masks.len() }.into());
    }
    let pose = estimate_pose(&input.corners, &input.corners.board, &input.intrinsics)?;
    let plane = MotionPlane::from_extrinsics(&pose.extrinsics, input.up_axis);
    let track = track_from_masks(&input.masks, &input.meta)?;
    let lifted = lift_track(&track, input.meta.depth_m, &input.intrinsics, Some(&pose.extrinsics), plane);
    Ok((lifted, pose.rms))
}

pub fn estimate_video(input: &VideoInput, spec: &ExperimentSpec, regime: RegimeOptions) -> Result<VideoEstimate, PipelineError> {
    let (track, pose_rms_px) = lift_video(input)?;
    estimate_track(&track, pose_rms_px, spec, regime)
}

pub fn estimate_track(
    track: &Track3D,
    pose_rms_px: f64,
    spec: &ExperimentSpec,
    regime: RegimeOptions,
) -> Result<VideoEstimate, PipelineError> {
    let quantity = spec.kind.quantity();
    let mut out = VideoEstimate {
        quantity,
        value: f64::NAN,
        pose_rms_px,
        n_samples: track.samples.len(),
        horizontal_acceleration: None,
        acceleration: None,
        negative_friction: None,
        terminal_velocity: None,
        regime: None,
        regime_passed: None,
    };
    match quantity {
        Quantity::Gravity => {
            let g = physics::gravity_from_track(track, spec)?;
            out.value = g.g;
            out.horizontal_acceleration = g.horizontal_acceleration;
        }
        Quantity::Friction => {
            let f = physics::friction_from_track(track, spec)?;
            out.value = f.mu;
            out.acceleration = Some(f.acceleration);
            out.negative_friction = Some(f.negative);
        }
        Quantity::Viscosity => {
            let v = physics::viscosity_from_track(track, spec, regime)?;
            out.value = v.eta;
            out.terminal_velocity = Some(v.terminal_velocity);
            out.regime = Some(v.regime);
            out.regime_passed = Some(v.regime_passed);
        }
    }
    Ok(out)
}
