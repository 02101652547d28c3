use std::path::Path;

use nalgebra::{Point2, Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::config::{BoardPose, Motion, ScenarioConfig, Shape};
use super::rng::SimRng;
use super::SynthError;
use crate::camera::{project, CameraExtrinsics, CameraIntrinsics, CheckerboardSpec, CornerSet, MotionPlane};
use crate::ingest::{self, BinaryMask, MaskSequence, Track3D, VideoMeta};

const STREAM_TRACK: u64 = 1;
const STREAM_CORNERS: u64 = 2;
const STREAM_CALIBRATION: u64 = 3;

/// Transient time constants dropped from settling videos.
pub const SETTLING_TRIM_TAUS: f64 = 5.0;

pub fn freefall_height(h0: f64, g: f64, t: f64) -> f64 {
    h0 - 0.5 * g * t * t
}

pub fn incline_acceleration(g: f64, mu: f64, theta: f64) -> f64 {
    g * (theta.sin() - mu * theta.cos())
}

/// Stokes terminal velocity of a sphere.
pub fn stokes_terminal_velocity(g: f64, eta: f64, radius: f64, rho_s: f64, rho_f: f64) -> f64 {
    2.0 * radius * radius * (rho_s - rho_f) * g / (9.0 * eta)
}

/// Linear-drag relaxation time m / (6πηr), written via the terminal velocity.
/// Added mass is neglected.
pub fn settling_time_constant(g: f64, v_t: f64, rho_s: f64, rho_f: f64) -> f64 {
    v_t / g * rho_s / (rho_s - rho_f)
}

/// Frames dropped before the first retained frame.
pub fn trim_frames(cfg: &ScenarioConfig) -> usize {
    match cfg.motion {
        Motion::ViscositySettling { g, eta, sphere_radius_m, rho_s, rho_f, trimmed } => {
            if trimmed {
                let v_t = stokes_terminal_velocity(g, eta, sphere_radius_m, rho_s, rho_f);
                let tau = settling_time_constant(g, v_t, rho_s, rho_f);
                (SETTLING_TRIM_TAUS * tau * cfg.fps).ceil() as usize
            } else {
                0
            }
        }
        _ => cfg.preroll_frames,
    }
}

/// Displacement from the start position and velocity, in plane coordinates,
/// `t` seconds after motion start.
pub fn plane_state(motion: &Motion, t: f64) -> ([f64; 2], [f64; 2]) {
    match *motion {
        Motion::GravityFreefall { g } => ([0.0, -0.5 * g * t * t], [0.0, -g * t]),
        Motion::GravityParabolic { g, vx, vy } => ([vx * t, vy * t - 0.5 * g * t * t], [vx, vy - g * t]),
        Motion::FrictionIncline { g, mu, theta_rad } => {
            let a = incline_acceleration(g, mu, theta_rad);
            let (c, s) = (theta_rad.cos(), theta_rad.sin());
            let d = 0.5 * a * t * t;
            ([d * c, -d * s], [a * t * c, -a * t * s])
        }
        Motion::ViscositySettling { g, eta, sphere_radius_m, rho_s, rho_f, .. } => {
            let v_t = stokes_terminal_velocity(g, eta, sphere_radius_m, rho_s, rho_f);
            let tau = settling_time_constant(g, v_t, rho_s, rho_f);
            let decay = (-t / tau).exp();
            let fallen = v_t * t - v_t * tau * (1.0 - decay);
            ([0.0, -fallen], [0.0, -v_t * (1.0 - decay)])
        }
        Motion::TranslatingObject { velocity_mps: v } | Motion::OcclusionPass { velocity_mps: v, .. } => {
            ([v[0] * t, v[1] * t], v)
        }
    }
}

/// Generating parameters and the quantities the estimators should recover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Truth {
    pub kind: String,
    pub motion: Motion,
    pub intrinsics: CameraIntrinsics,
    pub extrinsics: CameraExtrinsics,
    pub plane: MotionPlane,
    /// Signed acceleration along the motion direction (m/s²), when constant.
    pub acceleration: Option<f64>,
    pub terminal_velocity: Option<f64>,
    pub time_constant: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBundle {
    pub config: ScenarioConfig,
    pub meta: VideoMeta,
    pub tracks_3d: Vec<Track3D>,
    pub masks: Vec<MaskSequence>,
    pub corners: CornerSet,
    pub truth: Truth,
    /// Noise-free projected object centres per frame.
    pub projected_centers: Vec<Point2<f64>>,
}

/// Scene geometry shared by all frames of one config.
struct Scene {
    intr: CameraIntrinsics,
    extr: CameraExtrinsics,
    plane: MotionPlane,
    up_cam: Vector3<f64>,
    horizontal_cam: Vector3<f64>,
    origin_cam: Vector3<f64>,
}

impl Scene {
    fn new(cfg: &ScenarioConfig) -> Self {
        let extr = cfg.extrinsics();
        let plane = cfg.plane();
        Scene {
            intr: cfg.camera,
            extr,
            plane,
            up_cam: extr.rotation * plane.up,
            horizontal_cam: extr.rotation * plane.horizontal,
            origin_cam: Vector3::new(0.0, 0.0, cfg.depth_m),
        }
    }

    fn camera_point(&self, hv: [f64; 2]) -> Vector3<f64> {
        self.origin_cam + self.horizontal_cam * hv[0] + self.up_cam * hv[1]
    }

    /// Plane coordinates of the ray through a pixel centre.
    fn plane_coords(&self, col: f64, row: f64, depth: f64) -> [f64; 2] {
        let pc = self.intr.backproject(&Point2::new(col, row), depth) - self.origin_cam;
        [pc.dot(&self.horizontal_cam), pc.dot(&self.up_cam)]
    }
}

/// Projected half-extents (px) of a shape at `depth`.
fn projected_half_extent(shape: &Shape, intr: &CameraIntrinsics, depth: f64) -> (f64, f64) {
    let half = match *shape {
        Shape::Disk { radius_m } => radius_m,
        Shape::Square { side_m } => side_m / 2.0,
    };
    (intr.fx * half / depth, intr.fy * half / depth)
}

/// Pixel (row i, col j) is set iff its centre (j, i) lies inside the shape.
/// Squares use half-open extents so integer-aligned edges give exact areas.
pub fn rasterize_shape(
    center: &Point2<f64>,
    shape: &Shape,
    intr: &CameraIntrinsics,
    depth: f64,
    width: usize,
    height: usize,
) -> BinaryMask {
    let mut mask = BinaryMask::empty(width, height);
    for (row, c0, c1) in shape_spans(center, shape, intr, depth, width, height, |_, _| true) {
        for col in c0..c1 {
            mask.set(row, col, true);
        }
    }
    mask
}

/// Row spans `(row, col_start, col_end)` of the shape's pixels that pass `keep`.
fn shape_spans(
    center: &Point2<f64>,
    shape: &Shape,
    intr: &CameraIntrinsics,
    depth: f64,
    width: usize,
    height: usize,
    keep: impl Fn(usize, usize) -> bool,
) -> Vec<(usize, usize, usize)> {
    let (rx, ry) = projected_half_extent(shape, intr, depth);
    let clamp_lo = |x: f64| x.floor().max(0.0) as usize;
    let c0 = clamp_lo(center.x - rx);
    let r0 = clamp_lo(center.y - ry);
    let c1 = ((center.x + rx).ceil().max(0.0) as usize).min(width.saturating_sub(1));
    let r1 = ((center.y + ry).ceil().max(0.0) as usize).min(height.saturating_sub(1));
    let mut spans = Vec::new();
    if center.x + rx < 0.0 || center.y + ry < 0.0 || c0 >= width || r0 >= height {
        return spans;
    }
    for row in r0..=r1 {
        let mut open: Option<usize> = None;
        for col in c0..=c1 {
            let (du, dv) = (col as f64 - center.x, row as f64 - center.y);
            let inside = match shape {
                Shape::Disk { .. } => (du / rx).powi(2) + (dv / ry).powi(2) <= 1.0,
                Shape::Square { .. } => (-rx..rx).contains(&du) && (-ry..ry).contains(&dv),
            } && keep(row, col);
            match (inside, open) {
                (true, None) => open = Some(col),
                (false, Some(s)) => {
                    spans.push((row, s, col));
                    open = None;
                }
                _ => {}
            }
        }
        if let Some(s) = open {
            spans.push((row, s, c1 + 1));
        }
    }
    spans
}

/// Rasterize the object at the given per-frame pixel centres.
pub fn rasterize_masks(centers: &[Point2<f64>], cfg: &ScenarioConfig) -> Result<MaskSequence, SynthError> {
    let scene = Scene::new(cfg);
    let (w, h) = (cfg.camera.width as usize, cfg.camera.height as usize);
    let occluder = match cfg.motion {
        Motion::OcclusionPass { occluder_center_m, occluder_size_m, .. } => Some((occluder_center_m, occluder_size_m)),
        _ => None,
    };
    let visible_px = |row: usize, col: usize| match occluder {
        Some((oc, os)) => {
            let p = scene.plane_coords(col as f64, row as f64, cfg.depth_m);
            !((p[0] - oc[0]).abs() <= os[0] / 2.0 && (p[1] - oc[1]).abs() <= os[1] / 2.0)
        }
        None => true,
    };
    let mut frames = Vec::with_capacity(centers.len());
    let mut visible = 0;
    for c in centers {
        let spans = shape_spans(c, &cfg.shape, &cfg.camera, cfg.depth_m, w, h, visible_px);
        visible += usize::from(!spans.is_empty());
        frames.push(ingest::runs_from_spans(&spans, w, h));
    }
    if 2 * visible < frames.len() {
        return Err(SynthError::NeverVisible { visible, frames: frames.len() });
    }
    Ok(MaskSequence { object_id: cfg.object_id.clone(), width: w, height: h, fps: cfg.fps, frames })
}

fn corners_for_pose(
    intr: &CameraIntrinsics,
    board: &CheckerboardSpec,
    extr: &CameraExtrinsics,
    noise_px: f64,
    rng: &mut SimRng,
    image_id: String,
) -> Result<CornerSet, SynthError> {
    let mut points = Vec::with_capacity(board.corner_count());
    for p in board.object_points() {
        let px = project(&p, intr, extr)?;
        let noisy = Point2::new(px.x + rng.normal(noise_px), px.y + rng.normal(noise_px));
        if !(noisy.x >= 0.0 && noisy.y >= 0.0 && noisy.x < intr.width as f64 && noisy.y < intr.height as f64) {
            return Err(SynthError::BoardClipped(image_id));
        }
        points.push(noisy);
    }
    Ok(CornerSet { image_id, board: *board, points })
}

/// Background checkerboard corners for a config, with seeded pixel noise.
pub fn gen_corners(cfg: &ScenarioConfig) -> Result<CornerSet, SynthError> {
    let mut rng = SimRng::new(cfg.seed, STREAM_CORNERS);
    corners_for_pose(&cfg.camera, &cfg.board, &cfg.extrinsics(), cfg.noise_px, &mut rng, format!("{}-board", cfg.object_id))
}

/// Board poses for a multi-view calibration: the board is tilted around a
/// cone of directions, 0.6 to 0.9 m from the camera.
pub fn calibration_poses(n_views: usize) -> Vec<BoardPose> {
    (0..n_views)
        .map(|k| {
            let phase = std::f64::consts::TAU * k as f64 / n_views as f64;
            BoardPose {
                center_m: [0.05 * phase.cos(), 0.03 * phase.sin(), 0.6 + 0.15 * (k % 3) as f64],
                rotation_rad: [0.8 * phase.cos(), 0.8 * phase.sin(), 0.1 * (2.0 * phase).sin()],
            }
        })
        .collect()
}

/// Noisy corner sets for `n_views` calibration poses.
pub fn calibration_views(
    intr: &CameraIntrinsics,
    board: &CheckerboardSpec,
    n_views: usize,
    noise_px: f64,
    seed: u64,
) -> Result<Vec<CornerSet>, SynthError> {
    let mut rng = SimRng::new(seed, STREAM_CALIBRATION);
    calibration_poses(n_views)
        .iter()
        .enumerate()
        .map(|(k, pose)| corners_for_pose(intr, board, &pose.extrinsics(board), noise_px, &mut rng, format!("calib-{k:02}")))
        .collect()
}

fn check_kind(cfg: &ScenarioConfig, expected: &'static str) -> Result<(), SynthError> {
    if cfg.motion.kind_name() != expected {
        return Err(SynthError::WrongKind { expected, got: cfg.motion.kind_name() });
    }
    Ok(())
}

pub fn simulate_freefall(cfg: &ScenarioConfig) -> Result<SyntheticBundle, SynthError> {
    check_kind(cfg, "gravity_freefall")?;
    simulate(cfg)
}

pub fn simulate_parabolic(cfg: &ScenarioConfig) -> Result<SyntheticBundle, SynthError> {
    check_kind(cfg, "gravity_parabolic")?;
    simulate(cfg)
}

pub fn simulate_incline(cfg: &ScenarioConfig) -> Result<SyntheticBundle, SynthError> {
    check_kind(cfg, "friction_incline")?;
    simulate(cfg)
}

pub fn simulate_settling(cfg: &ScenarioConfig) -> Result<SyntheticBundle, SynthError> {
    check_kind(cfg, "viscosity_settling")?;
    simulate(cfg)
}

fn truth_for(cfg: &ScenarioConfig, scene: &Scene) -> Truth {
    let (acceleration, terminal_velocity, time_constant) = match cfg.motion {
        Motion::GravityFreefall { g } | Motion::GravityParabolic { g, .. } => (Some(-g), None, None),
        Motion::FrictionIncline { g, mu, theta_rad } => (Some(incline_acceleration(g, mu, theta_rad)), None, None),
        Motion::ViscositySettling { g, eta, sphere_radius_m, rho_s, rho_f, .. } => {
            let v_t = stokes_terminal_velocity(g, eta, sphere_radius_m, rho_s, rho_f);
            (None, Some(v_t), Some(settling_time_constant(g, v_t, rho_s, rho_f)))
        }
        Motion::TranslatingObject { .. } | Motion::OcclusionPass { .. } => (Some(0.0), None, None),
    };
    Truth {
        kind: cfg.motion.kind_name().into(),
        motion: cfg.motion.clone(),
        intrinsics: cfg.camera,
        extrinsics: scene.extr,
        plane: scene.plane,
        acceleration,
        terminal_velocity,
        time_constant,
    }
}

/// Simulate any scenario kind.
pub fn simulate(cfg: &ScenarioConfig) -> Result<SyntheticBundle, SynthError> {
    cfg.validate()?;
    let scene = Scene::new(cfg);
    let offset = trim_frames(cfg);
    let mut rng = SimRng::new(cfg.seed, STREAM_TRACK);

    let mut samples = Vec::with_capacity(cfg.frame_count);
    let mut projected = Vec::with_capacity(cfg.frame_count);
    let mut noisy = Vec::with_capacity(cfg.frame_count);
    for i in 0..cfg.frame_count {
        let t_motion = (offset + i) as f64 / cfg.fps;
        let (d, _) = plane_state(&cfg.motion, t_motion);
        let hv = [cfg.start_m[0] + d[0], cfg.start_m[1] + d[1]];
        let pc = scene.camera_point(hv);
        let pw: Point3<f64> = scene.extr.to_world(&pc);
        let px = scene.intr.project_camera(&pc)?;
        samples.push([i as f64 / cfg.fps, pw.x, pw.y, pw.z]);
        projected.push(px);
        noisy.push(Point2::new(px.x + rng.normal(cfg.noise_px), px.y + rng.normal(cfg.noise_px)));
    }
    let masks = rasterize_masks(&noisy, cfg)?;
    let corners = gen_corners(cfg)?;
    let meta = VideoMeta {
        width: cfg.camera.width as usize,
        height: cfg.camera.height as usize,
        fps: cfg.fps,
        frame_count: cfg.frame_count,
        depth_m: cfg.depth_m,
        trim_offset: offset,
        conditioning_frames: cfg.conditioning_frames,
    };
    let track = Track3D { object_id: cfg.object_id.clone(), plane: scene.plane, samples };
    Ok(SyntheticBundle {
        config: cfg.clone(),
        meta,
        tracks_3d: vec![track],
        masks: vec![masks],
        corners,
        truth: truth_for(cfg, &scene),
        projected_centers: projected,
    })
}

impl SyntheticBundle {
    /// Writes `meta.json`, `corners.json`, `masks/<object>.json`,
    /// `track3d.json`, `truth.json`, plus `intrinsics.json` and `config.json`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), SynthError> {
        let io = |e: std::io::Error| ingest::IngestError::Io { path: dir.display().to_string(), source: e };
        std::fs::create_dir_all(dir.join("masks")).map_err(io)?;
        ingest::write_json(&dir.join("meta.json"), &self.meta)?;
        ingest::write_json(&dir.join("corners.json"), &self.corners)?;
        for m in &self.masks {
            m.save(&dir.join("masks").join(format!("{}.json", m.object_id)))?;
        }
        ingest::write_json(&dir.join("track3d.json"), &self.tracks_3d)?;
        ingest::write_json(&dir.join("truth.json"), &self.truth)?;
        ingest::write_json(&dir.join("intrinsics.json"), &self.truth.intrinsics)?;
        ingest::write_json(&dir.join("config.json"), &self.config)?;
        Ok(())
    }
}
