//! Intuitive-physics scenario presets: randomized closed-form object paths
//! in the camera frame, rendered to flat-colour metric bundles.
//!
//! Camera frame: X right, Y down, Z forward. The floor is the plane
//! `y = floor_y`.

use std::collections::BTreeMap;

use nalgebra::{Point2, Point3};
use serde::{Deserialize, Serialize};

use super::{rasterize_shape, Shape, SimRng, SynthError};
use crate::camera::{project, CameraExtrinsics, CameraIntrinsics};
use crate::ingest::{BinaryMask, RgbImage, VideoMeta};
use crate::metrics::VideoBundle;

const G: f64 = 9.81;
const SCENE_STREAM: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    BallBounce,
    TwoObjFall,
    TwoObjPara,
    BlockObj,
    Columns,
    RaisedBlock,
    Walls,
    TwoBall,
    ObjToward,
    ObjAway,
    SphereToward,
    SphereAway,
    Dominoes,
    Ramp,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    MotionPhysics,
    ObjectPermanence,
    ScalePerspective,
    SupportRelations,
}

impl Scenario {
    /// Column order of the mIoU table.
    pub const ALL: [Scenario; 15] = [
        Scenario::BallBounce,
        Scenario::TwoObjFall,
        Scenario::TwoObjPara,
        Scenario::BlockObj,
        Scenario::Columns,
        Scenario::RaisedBlock,
        Scenario::Walls,
        Scenario::TwoBall,
        Scenario::ObjToward,
        Scenario::ObjAway,
        Scenario::SphereToward,
        Scenario::SphereAway,
        Scenario::Dominoes,
        Scenario::Ramp,
        Scenario::Table,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Scenario::BallBounce => "Ball Bounce",
            Scenario::TwoObjFall => "2 Obj Fall",
            Scenario::TwoObjPara => "2 Obj Para",
            Scenario::BlockObj => "Block/Obj",
            Scenario::Columns => "Columns",
            Scenario::RaisedBlock => "Raised Block",
            Scenario::Walls => "Walls",
            Scenario::TwoBall => "Two Ball",
            Scenario::ObjToward => "Obj Tow.",
            Scenario::ObjAway => "Obj Away",
            Scenario::SphereToward => "Sphere Tow.",
            Scenario::SphereAway => "Sphere Away",
            Scenario::Dominoes => "Dominoes",
            Scenario::Ramp => "Ramp",
            Scenario::Table => "Table",
        }
    }

    pub fn category(self) -> Category {
        use Scenario::*;
        match self {
            BallBounce | TwoObjFall | TwoObjPara => Category::MotionPhysics,
            BlockObj | Columns | RaisedBlock | Walls | TwoBall => Category::ObjectPermanence,
            ObjToward | ObjAway | SphereToward | SphereAway => Category::ScalePerspective,
            Dominoes | Ramp | Table => Category::SupportRelations,
        }
    }
}

/// Closed-form trajectory of one object centre.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Path {
    /// Projectile under gravity (+Y); bounces off `floor_y` with the given
    /// restitution when set. `floor_y` is the centre height at contact.
    Ballistic { p0: [f64; 3], v0: [f64; 3], floor_y: Option<f64>, restitution: f64 },
    Linear { p0: [f64; 3], v: [f64; 3] },
    /// Constant speed along X, reflecting elastically between `x_min` and `x_max`.
    Walls { p0: [f64; 3], speed: f64, x_min: f64, x_max: f64 },
    /// Constant acceleration `a` (signed) along the unit `dir` from rest or
    /// `v0`, frozen once the travelled distance reaches `stop_s` or the speed
    /// reaches zero.
    Glide { p0: [f64; 3], dir: [f64; 3], v0: f64, a: f64, stop_s: f64 },
    Rest { p0: [f64; 3] },
}

fn add(p: [f64; 3], d: [f64; 3], s: f64) -> [f64; 3] {
    [p[0] + d[0] * s, p[1] + d[1] * s, p[2] + d[2] * s]
}

/// Height above the floor of a bouncing point after time `t`, given initial
/// downward-positive velocity `vy` and clearance `h` (> 0 above floor).
fn bounce(h: f64, vy: f64, e: f64, mut t: f64) -> f64 {
    // First segment: free flight until contact.
    let t_hit = (-vy + (vy * vy + 2.0 * G * h).sqrt()) / G;
    if t < t_hit {
        return h - vy * t - 0.5 * G * t * t;
    }
    t -= t_hit;
    let mut v = e * (vy + G * t_hit);
    for _ in 0..10_000 {
        let flight = 2.0 * v / G;
        if v < 1e-9 || t < flight {
            return if v < 1e-9 { 0.0 } else { v * t - 0.5 * G * t * t };
        }
        t -= flight;
        v *= e;
    }
    0.0
}

impl Path {
    pub fn position(&self, t: f64) -> [f64; 3] {
        match *self {
            Path::Ballistic { p0, v0, floor_y, restitution } => {
                let x = p0[0] + v0[0] * t;
                let z = p0[2] + v0[2] * t;
                let free = p0[1] + v0[1] * t + 0.5 * G * t * t;
                let y = match floor_y {
                    Some(fy) if p0[1] <= fy => fy - bounce(fy - p0[1], v0[1], restitution, t),
                    _ => free,
                };
                [x, y, z]
            }
            Path::Linear { p0, v } => add(p0, v, t),
            Path::Walls { p0, speed, x_min, x_max } => {
                let span = x_max - x_min;
                let u = (p0[0] - x_min + speed * t).rem_euclid(2.0 * span);
                let x = if u <= span { x_min + u } else { x_max - (u - span) };
                [x, p0[1], p0[2]]
            }
            Path::Glide { p0, dir, v0, a, stop_s } => {
                let t_stop_v = if a < 0.0 { -v0 / a } else { f64::INFINITY };
                let tt = t.min(t_stop_v);
                let s = (v0 * tt + 0.5 * a * tt * tt).min(stop_s);
                add(p0, dir, s)
            }
            Path::Rest { p0 } => p0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneObject {
    pub id: String,
    pub shape: Shape,
    pub path: Path,
    pub color: [u8; 3],
}

/// Fronto-parallel opaque rectangle (wall, column, block).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Occluder {
    pub center: [f64; 3],
    pub size: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub scenario: Scenario,
    pub camera: CameraIntrinsics,
    pub fps: f64,
    pub frame_count: usize,
    pub conditioning_frames: usize,
    pub objects: Vec<SceneObject>,
    pub occluders: Vec<Occluder>,
}

/// 480×270 camera with the same field of view as the default rig.
pub fn scene_camera() -> CameraIntrinsics {
    CameraIntrinsics { fx: 375.0, fy: 375.0, cx: 240.0, cy: 135.0, skew: 0.0, width: 480, height: 270 }
}

const PALETTE: [[u8; 3]; 3] = [[220, 60, 40], [40, 110, 220], [240, 200, 40]];
const BACKGROUND: [u8; 3] = [128, 128, 120];
const FLOOR: [u8; 3] = [90, 80, 70];
const OCCLUDER: [u8; 3] = [60, 60, 60];
const FLOOR_Y: f64 = 0.5;

fn object(i: usize, shape: Shape, path: Path) -> SceneObject {
    SceneObject { id: format!("obj{i}"), shape, path, color: PALETTE[i % PALETTE.len()] }
}

fn random_shape(rng: &mut SimRng, size: f64) -> Shape {
    if rng.uniform() < 0.5 {
        Shape::Disk { radius_m: size }
    } else {
        Shape::Square { side_m: 2.0 * size }
    }
}

/// Draw one randomized instance of `scenario`.
pub fn sample_scene(scenario: Scenario, seed: u64) -> SceneSpec {
    let mut rng = SimRng::new(seed, SCENE_STREAM);
    let r = &mut rng;
    let fy = FLOOR_Y;
    let mut objects = Vec::new();
    let mut occluders = Vec::new();
    let frame_count = 33;
    match scenario {
        Scenario::BallBounce => {
            let rad = r.uniform_in(0.05, 0.08);
            let h = r.uniform_in(0.4, 0.8);
            let e = r.uniform_in(0.5, 0.9);
            objects.push(object(0, Shape::Disk { radius_m: rad }, Path::Ballistic {
                p0: [0.0, fy - rad - h, 3.0],
                v0: [0.0; 3],
                floor_y: Some(fy - rad),
                restitution: e,
            }));
        }
        Scenario::TwoObjFall => {
            for i in 0..2 {
                let s = r.uniform_in(0.05, 0.08);
                let shape = random_shape(r, s);
                let p0 = [r.uniform_in(-0.15, 0.15), fy - s - r.uniform_in(0.3, 0.9), 3.0];
                objects.push(object(i, shape, Path::Ballistic { p0, v0: [0.0; 3], floor_y: Some(fy - s), restitution: 0.3 }));
            }
        }
        Scenario::TwoObjPara => {
            for (i, side) in [-1.0, 1.0].into_iter().enumerate() {
                let s = r.uniform_in(0.05, 0.08);
                let shape = random_shape(r, s);
                let p0 = [side * r.uniform_in(0.6, 0.9), fy - s - r.uniform_in(0.2, 0.5), 3.0 + r.uniform_in(-0.2, 0.2)];
                let v0 = [-side * r.uniform_in(1.0, 2.0), -r.uniform_in(1.0, 2.5), r.uniform_in(-0.2, 0.2)];
                objects.push(object(i, shape, Path::Ballistic { p0, v0, floor_y: Some(fy - s), restitution: 0.3 }));
            }
        }
        Scenario::BlockObj | Scenario::Columns => {
            let s = r.uniform_in(0.05, 0.08);
            let shape = random_shape(r, s);
            let v = r.uniform_in(0.8, 1.6);
            objects.push(object(0, shape, Path::Linear { p0: [-0.9, fy - s, 3.0], v: [v, 0.0, 0.0] }));
            if scenario == Scenario::BlockObj {
                occluders.push(Occluder { center: [0.0, fy - 0.2, 2.5], size: [0.4, 0.4] });
            } else {
                for k in 0..4 {
                    occluders.push(Occluder { center: [-0.45 + 0.3 * k as f64, fy - 0.4, 2.5], size: [0.06, 0.8] });
                }
            }
        }
        Scenario::RaisedBlock => {
            let rad = r.uniform_in(0.05, 0.07);
            let e = r.uniform_in(0.7, 0.95);
            objects.push(object(0, Shape::Disk { radius_m: rad }, Path::Ballistic {
                p0: [0.0, fy - rad - 0.9, 3.0],
                v0: [0.0; 3],
                floor_y: Some(fy - rad),
                restitution: e,
            }));
            occluders.push(Occluder { center: [0.0, fy - 0.45, 2.5], size: [0.4, 0.3] });
        }
        Scenario::Walls => {
            let rad = r.uniform_in(0.05, 0.07);
            let speed = r.uniform_in(1.5, 3.0);
            objects.push(object(0, Shape::Disk { radius_m: rad }, Path::Walls {
                p0: [r.uniform_in(-0.4, 0.4), fy - rad, 3.0],
                speed,
                x_min: -0.7 + rad,
                x_max: 0.7 - rad,
            }));
            occluders.push(Occluder { center: [0.0, fy - 0.15, 2.5], size: [0.6, 0.3] });
        }
        Scenario::TwoBall => {
            let big = r.uniform_in(0.12, 0.15);
            let small = r.uniform_in(0.05, 0.07);
            let (e1, e2) = (r.uniform_in(0.6, 0.9), r.uniform_in(0.6, 0.9));
            let drop = r.uniform_in(0.4, 0.7);
            objects.push(object(0, Shape::Disk { radius_m: big }, Path::Ballistic {
                p0: [0.0, fy - big - drop, 2.5],
                v0: [0.0; 3],
                floor_y: Some(fy - big),
                restitution: e1,
            }));
            objects.push(object(1, Shape::Disk { radius_m: small }, Path::Ballistic {
                p0: [0.0, fy - small - drop, 3.5],
                v0: [0.0; 3],
                floor_y: Some(fy - small),
                restitution: e2,
            }));
        }
        Scenario::ObjToward | Scenario::ObjAway | Scenario::SphereToward | Scenario::SphereAway => {
            let s = r.uniform_in(0.06, 0.1);
            let shape = match scenario {
                Scenario::SphereToward | Scenario::SphereAway => Shape::Disk { radius_m: s },
                _ => random_shape(r, s),
            };
            let speed = r.uniform_in(1.0, 2.0);
            let toward = matches!(scenario, Scenario::ObjToward | Scenario::SphereToward);
            let (z0, vz) = if toward { (5.0, -speed) } else { (1.5, speed) };
            objects.push(object(0, shape, Path::Linear { p0: [r.uniform_in(-0.1, 0.1), fy - s, z0], v: [0.0, 0.0, vz] }));
        }
        Scenario::Dominoes => {
            let s = r.uniform_in(0.04, 0.06);
            let shape = random_shape(r, s);
            let v0 = r.uniform_in(1.0, 2.5);
            objects.push(object(0, shape, Path::Glide {
                p0: [-0.8, fy - s, 3.0],
                dir: [1.0, 0.0, 0.0],
                v0,
                a: -3.0,
                stop_s: 0.6,
            }));
            for k in 0..4 {
                let side = 0.04;
                objects.push(object(k + 1, Shape::Square { side_m: side }, Path::Rest { p0: [-0.15 + 0.12 * k as f64, fy - side / 2.0, 3.0] }));
            }
        }
        Scenario::Ramp => {
            let rad = r.uniform_in(0.04, 0.06);
            let theta = r.uniform_in(15f64, 35.0).to_radians();
            let length = r.uniform_in(0.8, 1.2);
            let start = r.uniform_in(0.0, 0.3);
            let dir = [theta.cos(), theta.sin(), 0.0];
            let top = [-0.6, fy - rad - length * theta.sin(), 3.0];
            let p0 = add(top, dir, start);
            // Rolling sphere: a = (5/7) g sin θ.
            objects.push(object(0, Shape::Disk { radius_m: rad }, Path::Glide {
                p0,
                dir,
                v0: 0.0,
                a: 5.0 / 7.0 * G * theta.sin(),
                stop_s: length - start - rad,
            }));
            objects.push(object(1, Shape::Square { side_m: 0.1 }, Path::Rest {
                p0: add(top, dir, length + 0.05),
            }));
        }
        Scenario::Table => {
            let s = r.uniform_in(0.05, 0.08);
            let shape = random_shape(r, s);
            let edge = 0.2;
            let table_top = fy - 0.4;
            let overhang = r.uniform_in(-0.8, 0.8) * s;
            let p0 = [edge + overhang, table_top - s, 3.0];
            let path = if overhang > 0.0 {
                Path::Ballistic { p0, v0: [0.3, 0.0, 0.0], floor_y: Some(fy - s), restitution: 0.2 }
            } else {
                Path::Rest { p0 }
            };
            objects.push(object(0, shape, path));
            occluders.push(Occluder { center: [edge - 0.3, table_top + 0.2, 3.2], size: [0.6, 0.4] });
        }
    }
    SceneSpec { scenario, camera: scene_camera(), fps: 16.0, frame_count, conditioning_frames: 9, objects, occluders }
}

fn half_extent(shape: &Shape) -> f64 {
    match *shape {
        Shape::Disk { radius_m } => radius_m,
        Shape::Square { side_m } => side_m / 2.0,
    }
}

/// Pixel rectangle (col0, row0, col1, row1), half-open, of an occluder.
fn occluder_rect(o: &Occluder, cam: &CameraIntrinsics) -> (f64, f64, f64, f64) {
    let [x, y, z] = o.center;
    let [w, h] = o.size;
    let u = |x: f64| cam.fx * x / z + cam.cx;
    let v = |y: f64| cam.fy * y / z + cam.cy;
    (u(x - w / 2.0), v(y - h / 2.0), u(x + w / 2.0), v(y + h / 2.0))
}

fn in_rect(rect: (f64, f64, f64, f64), row: usize, col: usize) -> bool {
    let (c, r) = (col as f64, row as f64);
    c >= rect.0 && c < rect.2 && r >= rect.1 && r < rect.3
}

/// Render masks and flat-colour frames; nearer geometry hides farther.
pub fn render_scene(spec: &SceneSpec) -> Result<VideoBundle, SynthError> {
    let cam = &spec.camera;
    cam.validate()?;
    if spec.frame_count == 0 || !(spec.fps > 0.0) {
        return Err(SynthError::InvalidConfig("scene needs frames and a positive fps".into()));
    }
    let (w, h) = (cam.width as usize, cam.height as usize);
    let identity = CameraExtrinsics::identity();
    let floor_row = (cam.fy * FLOOR_Y / 3.0 + cam.cy).max(0.0);
    let mut masks: BTreeMap<String, Vec<BinaryMask>> = spec.objects.iter().map(|o| (o.id.clone(), Vec::new())).collect();
    let mut frames = Vec::with_capacity(spec.frame_count);
    for i in 0..spec.frame_count {
        let t = i as f64 / spec.fps;
        let mut layers: Vec<(f64, BinaryMask, [u8; 3], Option<&str>)> = Vec::new();
        for o in &spec.objects {
            let p = o.path.position(t);
            let m = if p[2] > half_extent(&o.shape) {
                let c = project(&Point3::from(p), cam, &identity)?;
                rasterize_shape(&Point2::new(c.x, c.y), &o.shape, cam, p[2], w, h)
            } else {
                BinaryMask::empty(w, h)
            };
            layers.push((p[2], m, o.color, Some(o.id.as_str())));
        }
        for oc in &spec.occluders {
            let rect = occluder_rect(oc, cam);
            layers.push((oc.center[2], BinaryMask::from_fn(w, h, |r, c| in_rect(rect, r, c)), OCCLUDER, None));
        }
        // Painter's order: far to near, stable on ties.
        let mut order: Vec<usize> = (0..layers.len()).collect();
        order.sort_by(|&a, &b| layers[b].0.total_cmp(&layers[a].0));
        let mut owner: Vec<Option<usize>> = vec![None; w * h];
        let mut img = RgbImage::filled(w, h, BACKGROUND);
        for row in (floor_row.ceil() as usize).min(h)..h {
            for col in 0..w {
                img.put(row, col, FLOOR);
            }
        }
        for &k in &order {
            for (row, col) in layers[k].1.set_pixels() {
                owner[row * w + col] = Some(k);
                img.put(row, col, layers[k].2);
            }
        }
        for (k, (_, _, _, id)) in layers.iter().enumerate() {
            if let Some(id) = id {
                let visible = BinaryMask::from_fn(w, h, |r, c| owner[r * w + c] == Some(k));
                masks.get_mut(*id).expect("object id").push(visible);
            }
        }
        frames.push(img);
    }
    let meta = VideoMeta {
        width: w,
        height: h,
        fps: spec.fps,
        frame_count: spec.frame_count,
        depth_m: 3.0,
        trim_offset: 0,
        conditioning_frames: spec.conditioning_frames,
    };
    Ok(VideoBundle { meta, masks, frames: Some(frames) })
}
