use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::camera::{BoardUpAxis, CameraExtrinsics, CameraIntrinsics, CheckerboardSpec, MotionPlane};

pub const STANDARD_GRAVITY: f64 = 9.81;

fn default_g() -> f64 {
    STANDARD_GRAVITY
}

fn default_true() -> bool {
    true
}

/// Closed-form motion of the tracked object within the motion plane.
/// Plane coordinates are (horizontal, up) in metres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Motion {
    GravityFreefall {
        #[serde(default = "default_g")]
        g: f64,
    },
    GravityParabolic {
        #[serde(default = "default_g")]
        g: f64,
        vx: f64,
        vy: f64,
    },
    FrictionIncline {
        #[serde(default = "default_g")]
        g: f64,
        mu: f64,
        theta_rad: f64,
    },
    ViscositySettling {
        #[serde(default = "default_g")]
        g: f64,
        eta: f64,
        sphere_radius_m: f64,
        rho_s: f64,
        rho_f: f64,
        /// Drop the transient so frame 0 is already at terminal velocity.
        #[serde(default = "default_true")]
        trimmed: bool,
    },
    TranslatingObject {
        velocity_mps: [f64; 2],
    },
    OcclusionPass {
        velocity_mps: [f64; 2],
        /// Occluder rectangle on the motion plane: centre and size (m).
        occluder_center_m: [f64; 2],
        occluder_size_m: [f64; 2],
    },
}

impl Motion {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Motion::GravityFreefall { .. } => "gravity_freefall",
            Motion::GravityParabolic { .. } => "gravity_parabolic",
            Motion::FrictionIncline { .. } => "friction_incline",
            Motion::ViscositySettling { .. } => "viscosity_settling",
            Motion::TranslatingObject { .. } => "translating_object",
            Motion::OcclusionPass { .. } => "occlusion_pass",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case", tag = "type")]
pub enum Shape {
    Disk { radius_m: f64 },
    Square { side_m: f64 },
}

/// Checkerboard placement in the camera frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct BoardPose {
    /// Board centre in camera coordinates (m).
    pub center_m: [f64; 3],
    /// Roll, pitch, yaw (rad) applied to the board frame.
    pub rotation_rad: [f64; 3],
}

impl BoardPose {
    pub fn extrinsics(&self, board: &CheckerboardSpec) -> CameraExtrinsics {
        let [r, p, y] = self.rotation_rad;
        let rot: Matrix3<f64> = Rotation3::from_euler_angles(r, p, y).into_inner();
        let t = Vector3::from(self.center_m) - rot * board.center().coords;
        CameraExtrinsics { rotation: rot, translation: t }
    }
}

/// Everything needed to synthesize one video of one object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct ScenarioConfig {
    #[serde(default = "default_object_id")]
    pub object_id: String,
    pub motion: Motion,
    #[serde(default = "default_camera")]
    pub camera: CameraIntrinsics,
    #[serde(default = "default_board")]
    pub board: CheckerboardSpec,
    #[serde(default = "default_board_pose")]
    pub board_pose: BoardPose,
    #[serde(default)]
    pub up_axis: BoardUpAxis,
    #[serde(default = "default_fps")]
    pub fps: f64,
    pub frame_count: usize,
    pub depth_m: f64,
    #[serde(default)]
    pub noise_px: f64,
    #[serde(default)]
    pub seed: u64,
    pub shape: Shape,
    /// Object position at motion start, plane coordinates relative to the
    /// point where the optical axis meets the motion plane (m).
    #[serde(default)]
    pub start_m: [f64; 2],
    /// Frames between motion start and the first retained frame.
    #[serde(default)]
    pub preroll_frames: usize,
    #[serde(default = "default_conditioning")]
    pub conditioning_frames: usize,
}

fn default_object_id() -> String {
    "object".into()
}

fn default_fps() -> f64 {
    240.0
}

fn default_conditioning() -> usize {
    9
}

/// 1920×1080 camera with a 1500 px focal length.
pub fn default_camera() -> CameraIntrinsics {
    CameraIntrinsics { fx: 1500.0, fy: 1500.0, cx: 960.0, cy: 540.0, skew: 0.0, width: 1920, height: 1080 }
}

pub fn default_board() -> CheckerboardSpec {
    CheckerboardSpec { inner_rows: 7, inner_cols: 10, square_size: 0.04 }
}

/// Fronto-parallel board behind the motion plane, right of centre.
pub fn default_board_pose() -> BoardPose {
    BoardPose { center_m: [0.35, 0.0, 2.5], rotation_rad: [0.0, 0.0, 0.0] }
}

impl ScenarioConfig {
    /// Config with default camera/board for `motion`.
    pub fn new(motion: Motion, shape: Shape, depth_m: f64, frame_count: usize) -> Self {
        Self {
            object_id: default_object_id(),
            motion,
            camera: default_camera(),
            board: default_board(),
            board_pose: default_board_pose(),
            up_axis: BoardUpAxis::NegY,
            fps: default_fps(),
            frame_count,
            depth_m,
            noise_px: 0.0,
            seed: 0,
            shape,
            start_m: [0.0, 0.0],
            preroll_frames: 0,
            conditioning_frames: default_conditioning(),
        }
    }

    pub fn extrinsics(&self) -> CameraExtrinsics {
        self.board_pose.extrinsics(&self.board)
    }

    pub fn plane(&self) -> MotionPlane {
        MotionPlane::from_extrinsics(&self.extrinsics(), self.up_axis)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        self.camera.validate()?;
        self.board.validate()?;
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return bad("fps must be positive".into());
        }
        if !(self.noise_px >= 0.0 && self.noise_px.is_finite()) {
            return bad("noise_px must be ≥ 0".into());
        }
        if self.frame_count < 8 {
            return bad(format!("frame_count {} < 8", self.frame_count));
        }
        if !(self.depth_m > 0.0 && self.depth_m.is_finite()) {
            return bad("depth_m must be positive".into());
        }
        match self.shape {
            Shape::Disk { radius_m: s } | Shape::Square { side_m: s } if !(s > 0.0 && s.is_finite()) => {
                return bad("shape size must be positive".into());
            }
            _ => {}
        }
        let extr = self.extrinsics();
        let up_cam = extr.rotation * self.up_axis.vector();
        if up_cam.z.abs() > 1e-9 {
            return bad("board up axis must lie parallel to the image plane".into());
        }
        match &self.motion {
            Motion::GravityFreefall { g } | Motion::GravityParabolic { g, .. } if !(*g >= 0.0) => {
                bad("g must be ≥ 0".into())
            }
            Motion::FrictionIncline { g, mu, theta_rad } => {
                if !(*theta_rad > 0.0 && *theta_rad < std::f64::consts::FRAC_PI_2) {
                    return bad("theta must lie in (0, π/2)".into());
                }
                if !(*g > 0.0) || !(*mu >= 0.0) {
                    return bad("friction needs g > 0 and μ ≥ 0".into());
                }
                if *mu >= theta_rad.tan() {
                    return Err(SynthError::StaticBlock { mu: *mu, tan_theta: theta_rad.tan() });
                }
                Ok(())
            }
            Motion::ViscositySettling { g, eta, sphere_radius_m, rho_s, rho_f, .. } => {
                if !(*g > 0.0 && *eta > 0.0 && *sphere_radius_m > 0.0) {
                    return bad("settling needs g, η, r > 0".into());
                }
                if !(rho_s > rho_f) || !(*rho_f >= 0.0) {
                    return bad("sphere must be denser than the fluid".into());
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}
