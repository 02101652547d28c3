#![allow(dead_code)]

use physbench::camera::{BoardUpAxis, CameraIntrinsics};
use physbench::physics::RegimeOptions;
use physbench::pipeline::{estimate_video, spec_for, PipelineError, VideoEstimate, VideoInput};
use physbench::synth::{simulate, Motion, ScenarioConfig, Shape, SyntheticBundle};

pub const G: f64 = 9.81;
pub const RHO_STEEL: f64 = 7850.0;

pub fn freefall(noise_px: f64, seed: u64) -> ScenarioConfig {
    let mut c = ScenarioConfig::new(Motion::GravityFreefall { g: G }, Shape::Disk { radius_m: 0.03 }, 2.0, 72);
    c.start_m = [0.0, 0.6];
    c.preroll_frames = 12;
    c.noise_px = noise_px;
    c.seed = seed;
    c
}

pub fn parabolic(noise_px: f64, seed: u64) -> ScenarioConfig {
    let motion = Motion::GravityParabolic { g: G, vx: 1.2, vy: 1.5 };
    let mut c = ScenarioConfig::new(motion, Shape::Disk { radius_m: 0.03 }, 2.0, 72);
    c.start_m = [-0.4, 0.0];
    c.noise_px = noise_px;
    c.seed = seed;
    c
}

pub fn incline(theta_rad: f64, mu: f64, noise_px: f64, seed: u64) -> ScenarioConfig {
    let motion = Motion::FrictionIncline { g: G, mu, theta_rad };
    let mut c = ScenarioConfig::new(motion, Shape::Square { side_m: 0.05 }, 2.0, 96);
    c.start_m = [-0.3, 0.3];
    c.noise_px = noise_px;
    c.seed = seed;
    c
}

pub fn settling(eta: f64, radius: f64, rho_f: f64, trimmed: bool, frames: usize) -> ScenarioConfig {
    let motion = Motion::ViscositySettling { g: G, eta, sphere_radius_m: radius, rho_s: RHO_STEEL, rho_f, trimmed };
    let mut c = ScenarioConfig::new(motion, Shape::Disk { radius_m: radius }, 1.0, frames);
    c.start_m = [0.0, 0.3];
    c
}

/// Small camera for runs that only need the metric track.
pub fn small_camera() -> CameraIntrinsics {
    CameraIntrinsics { fx: 400.0, fy: 400.0, cx: 160.0, cy: 120.0, skew: 0.0, width: 320, height: 240 }
}

pub fn input_of(b: &SyntheticBundle, intrinsics: CameraIntrinsics) -> VideoInput {
    VideoInput {
        meta: b.meta.clone(),
        masks: b.masks[0].clone(),
        corners: b.corners.clone(),
        intrinsics,
        up_axis: BoardUpAxis::NegY,
    }
}

/// Full chain: simulate, rasterize, pose, centroid, lift, fit.
pub fn run_chain(cfg: &ScenarioConfig, regime: RegimeOptions) -> Result<(VideoEstimate, f64), PipelineError> {
    let b = simulate(cfg)?;
    let (spec, truth) = spec_for(&cfg.motion).expect("physical scenario");
    Ok((estimate_video(&input_of(&b, cfg.camera), &spec, regime)?, truth))
}

pub fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

/// IoU of two w×h rectangles offset by `d` columns.
pub fn shifted_rect_iou(w: usize, d: usize) -> f64 {
    if d >= w {
        0.0
    } else {
        (w - d) as f64 / (w + d) as f64
    }
}

pub fn random_mask(rng: &mut physbench::synth::SimRng) -> physbench::ingest::BinaryMask {
    let w = 1 + (rng.next_u64() % 40) as usize;
    let h = 1 + (rng.next_u64() % 30) as usize;
    // Mix of sparse, dense and blocky masks so long runs and single pixels both occur.
    let density = rng.uniform();
    let blocky = rng.next_u64() % 2 == 0;
    let (br, bc) = (rng.next_u64() as usize % h, rng.next_u64() as usize % w);
    physbench::ingest::BinaryMask::from_fn(w, h, |r, c| {
        if blocky {
            (r >= br) ^ (c >= bc) ^ (rng.uniform() < 0.05)
        } else {
            rng.uniform() < density
        }
    })
}

pub fn random_image(rng: &mut physbench::synth::SimRng) -> physbench::ingest::RgbImage {
    let w = 1 + (rng.next_u64() % 33) as usize;
    let h = 1 + (rng.next_u64() % 17) as usize;
    let data = (0..w * h * 3).map(|_| (rng.next_u64() & 0xff) as u8).collect();
    physbench::ingest::RgbImage { width: w, height: h, data }
}
