//! Closed-form kinematics, rasterization and checkerboard generation used as
//! the ground-truth oracle for the estimation pipeline.

mod config;
mod demo;
mod rng;
mod scenes;
mod sim;

pub use config::*;
pub use demo::*;
pub use rng::SimRng;
pub use scenes::*;
pub use sim::*;

use thiserror::Error;

use crate::camera::CameraError;
use crate::ingest::IngestError;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),
    #[error("expected a {expected} scenario, got {got}")]
    WrongKind { expected: &'static str, got: &'static str },
    #[error("block does not slide: μ = {mu} ≥ tan θ = {tan_theta}")]
    StaticBlock { mu: f64, tan_theta: f64 },
    #[error("object visible in only {visible} of {frames} frames")]
    NeverVisible { visible: usize, frames: usize },
    #[error("checkerboard {0} is not fully inside the image")]
    BoardClipped(String),
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}
