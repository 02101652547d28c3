//! wasm-bindgen entry points for the static demo page in `www/`.
//! Every export takes and returns JSON strings.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use physbench::fit::fit_poly;
use physbench::metrics::{sequence_metrics, summarize, CurvePoint};
use physbench::physics::{friction_coefficient, RegimeOptions};
use physbench::pipeline::{estimate_track, estimate_video, spec_for, VideoInput};
use physbench::synth::{
    frozen_prediction, incline_acceleration, simulate, translating_rect_bundle, Motion, RectMotion, ScenarioConfig,
    Shape,
};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryRequest {
    /// gravity_freefall, friction_incline or viscosity_settling.
    pub kind: String,
    /// g, μ or η depending on `kind`.
    pub value: f64,
    #[serde(default)]
    pub noise_px: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_theta")]
    pub theta_deg: f64,
}

fn default_theta() -> f64 {
    60.0
}

#[derive(Debug, Serialize)]
pub struct TrajectoryResponse {
    pub truth: f64,
    pub estimate: f64,
    /// Estimate from the noise-free metric track.
    pub estimate_exact: f64,
    pub unit: String,
    /// (t, vertical position) from masks.
    pub measured: Vec<[f64; 2]>,
    /// Polynomial fitted to `measured`, sampled at the same times.
    pub fitted: Vec<[f64; 2]>,
}

fn scenario(req: &TrajectoryRequest) -> Result<ScenarioConfig, String> {
    let mut cfg = match req.kind.as_str() {
        "gravity_freefall" => {
            let mut c = ScenarioConfig::new(Motion::GravityFreefall { g: req.value }, Shape::Disk { radius_m: 0.03 }, 2.0, 72);
            c.start_m = [0.0, 0.6];
            c.preroll_frames = 12;
            c
        }
        "friction_incline" => {
            let motion = Motion::FrictionIncline { g: 9.81, mu: req.value, theta_rad: req.theta_deg.to_radians() };
            let mut c = ScenarioConfig::new(motion, Shape::Disk { radius_m: 0.03 }, 2.0, 96);
            c.start_m = [-0.3, 0.3];
            c
        }
        "viscosity_settling" => {
            let motion = Motion::ViscositySettling {
                g: 9.81,
                eta: req.value,
                sphere_radius_m: 0.005,
                rho_s: 7850.0,
                rho_f: 1260.0,
                trimmed: true,
            };
            let mut c = ScenarioConfig::new(motion, Shape::Disk { radius_m: 0.005 }, 1.0, 120);
            c.start_m = [0.0, 0.3];
            c
        }
        other => return Err(format!("unknown kind {other:?}")),
    };
    cfg.noise_px = req.noise_px;
    cfg.seed = req.seed;
    Ok(cfg)
}

pub fn trajectory(request: &str) -> Result<String, String> {
    let req: TrajectoryRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let cfg = scenario(&req)?;
    let bundle = simulate(&cfg).map_err(|e| e.to_string())?;
    let (spec, truth) = spec_for(&cfg.motion).ok_or("no physical parameter")?;
    let input = VideoInput {
        meta: bundle.meta.clone(),
        masks: bundle.masks[0].clone(),
        corners: bundle.corners.clone(),
        intrinsics: cfg.camera,
        up_axis: cfg.up_axis,
    };
    let regime = RegimeOptions { allow_transient: true, ..RegimeOptions::default() };
    let est = estimate_video(&input, &spec, regime).map_err(|e| e.to_string())?;
    let exact = estimate_track(&bundle.tracks_3d[0], 0.0, &spec, regime).map_err(|e| e.to_string())?;
    let (track, _) = physbench::pipeline::lift_video(&input).map_err(|e| e.to_string())?;
    let measured: Vec<[f64; 2]> = track.vertical().into_iter().map(|(t, v)| [t, v]).collect();
    let degree = if req.kind == "viscosity_settling" { 1 } else { 2 };
    let pairs: Vec<(f64, f64)> = measured.iter().map(|p| (p[0], p[1])).collect();
    let fit = fit_poly(&pairs, degree).map_err(|e| e.to_string())?;
    let fitted = measured.iter().map(|p| [p[0], fit.eval(p[0])]).collect();
    let resp = TrajectoryResponse {
        truth,
        estimate: est.value,
        estimate_exact: exact.value,
        unit: est.quantity.unit().into(),
        measured,
        fitted,
    };
    serde_json::to_string(&resp).map_err(|e| e.to_string())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrictionRequest {
    pub mu: f64,
    #[serde(default = "default_g")]
    pub g: f64,
}

fn default_g() -> f64 {
    9.81
}

#[derive(Debug, Serialize)]
pub struct FrictionPoint {
    pub theta_deg: f64,
    /// Zero where the block stays put (μ ≥ tan θ).
    pub acceleration: f64,
    /// μ recovered from the acceleration; absent where the block does not slide.
    pub mu_back: Option<f64>,
}

/// Acceleration down the ramp against ramp angle, and the inverse.
pub fn friction_sweep(request: &str) -> Result<String, String> {
    let req: FrictionRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    if !(req.mu >= 0.0 && req.g > 0.0) {
        return Err("need mu ≥ 0 and g > 0".into());
    }
    let points: Vec<FrictionPoint> = (1..90)
        .map(|d| {
            let theta = (d as f64).to_radians();
            let a = incline_acceleration(req.g, req.mu, theta);
            let slides = a > 0.0;
            FrictionPoint {
                theta_deg: d as f64,
                acceleration: a.max(0.0),
                mu_back: slides.then(|| friction_coefficient(a, theta, req.g)),
            }
        })
        .collect();
    serde_json::to_string(&points).map_err(|e| e.to_string())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveRequest {
    #[serde(default = "default_step")]
    pub step_px: usize,
    #[serde(default = "default_from")]
    pub freeze_from: usize,
    #[serde(default = "default_frames")]
    pub frames: usize,
}

fn default_step() -> usize {
    2
}

fn default_from() -> usize {
    9
}

fn default_frames() -> usize {
    40
}

/// mIoU over time of a prediction that freezes a translating rectangle.
pub fn frozen_curve(request: &str) -> Result<String, String> {
    let req: CurveRequest = serde_json::from_str(request).map_err(|e| e.to_string())?;
    if req.freeze_from == 0 || req.freeze_from >= req.frames {
        return Err("freeze_from must lie inside the video".into());
    }
    let motion = RectMotion { step_px: req.step_px, frames: req.frames, ..RectMotion::default() };
    let gt = translating_rect_bundle(&motion).map_err(|e| e.to_string())?;
    let series = sequence_metrics(&gt, &frozen_prediction(&gt, req.freeze_from), req.freeze_from).map_err(|e| e.to_string())?;
    let curve: Vec<CurvePoint> = summarize(&[series], "rect").map_err(|e| e.to_string())?.miou_vs_frame;
    serde_json::to_string(&curve).map_err(|e| e.to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = simulateAndEstimate)]
pub fn simulate_and_estimate(request: &str) -> Result<String, JsValue> {
    js(trajectory(request))
}

#[wasm_bindgen(js_name = frictionSweep)]
pub fn friction_sweep_js(request: &str) -> Result<String, JsValue> {
    js(friction_sweep(request))
}

#[wasm_bindgen(js_name = frozenCurve)]
pub fn frozen_curve_js(request: &str) -> Result<String, JsValue> {
    js(frozen_curve(request))
}
