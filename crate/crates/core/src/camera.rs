//! Pinhole camera model, checkerboard descriptions and planar lifting.
//!
//! World frame convention: the checkerboard frame. X runs along the board
//! columns, Y along the board rows (down), Z = X × Y (into the board, away
//! from a camera that faces it). "Up" is −Y unless overridden.

use nalgebra::{Matrix3, Point2, Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CameraError {
    #[error("point is behind the camera (camera-frame depth {0})")]
    BehindCamera(f64),
    #[error("invalid intrinsics: {0}")]
    InvalidIntrinsics(String),
    #[error("invalid extrinsics: {0}")]
    InvalidExtrinsics(String),
    #[error("invalid checkerboard: {0}")]
    InvalidBoard(String),
    #[error("corner set {id}: {reason}")]
    InvalidCorners { id: String, reason: String },
    #[error("need at least 3 calibration views, got {0}")]
    TooFewViews(usize),
    #[error("calibration views leave the intrinsics unconstrained: {0}")]
    DegenerateViews(String),
    #[error("homography is degenerate: {0}")]
    DegenerateHomography(String),
}

/// Pinhole intrinsics with zero skew. `width`/`height` give the image size the
/// principal point is validated against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    #[serde(default)]
    pub skew: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self, CameraError> {
        let k = Self { fx, fy, cx, cy, skew: 0.0, width, height };
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        let bad = |m: &str| Err(CameraError::InvalidIntrinsics(m.to_string()));
        if !(self.fx.is_finite() && self.fx > 0.0) || !(self.fy.is_finite() && self.fy > 0.0) {
            return bad("focal lengths must be positive and finite");
        }
        if self.width == 0 || self.height == 0 {
            return bad("image size must be non-zero");
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) || !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return bad("principal point must lie inside the image");
        }
        if self.skew != 0.0 {
            return bad("skew must be zero");
        }
        Ok(())
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.fx, 0.0, self.cx, 0.0, self.fy, self.cy, 0.0, 0.0, 1.0)
    }

    /// Pixel of a camera-frame point.
    pub fn project_camera(&self, pc: &Vector3<f64>) -> Result<Point2<f64>, CameraError> {
        if pc.z <= 0.0 {
            return Err(CameraError::BehindCamera(pc.z));
        }
        Ok(Point2::new(
            self.fx * pc.x / pc.z + self.cx,
            self.fy * pc.y / pc.z + self.cy,
        ))
    }

    /// Camera-frame point on the plane Z = `depth` seen at `pixel`.
    pub fn backproject(&self, pixel: &Point2<f64>, depth: f64) -> Vector3<f64> {
        Vector3::new(
            (pixel.x - self.cx) * depth / self.fx,
            (pixel.y - self.cy) * depth / self.fy,
            depth,
        )
    }
}

/// World (board) to camera rigid transform: `x_c = R x_w + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ExtrinsicsRepr", into = "ExtrinsicsRepr")]
pub struct CameraExtrinsics {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

#[derive(Serialize, Deserialize)]
struct ExtrinsicsRepr {
    rotation: [[f64; 3]; 3],
    translation: [f64; 3],
}

impl From<CameraExtrinsics> for ExtrinsicsRepr {
    fn from(e: CameraExtrinsics) -> Self {
        let r = &e.rotation;
        ExtrinsicsRepr {
            rotation: [
                [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
                [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
                [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
            ],
            translation: [e.translation.x, e.translation.y, e.translation.z],
        }
    }
}

impl TryFrom<ExtrinsicsRepr> for CameraExtrinsics {
    type Error = CameraError;
    fn try_from(r: ExtrinsicsRepr) -> Result<Self, CameraError> {
        let m = r.rotation;
        let rotation = Matrix3::new(
            m[0][0], m[0][1], m[0][2], m[1][0], m[1][1], m[1][2], m[2][0], m[2][1], m[2][2],
        );
        CameraExtrinsics::new(rotation, Vector3::from(r.translation))
    }
}

/// Tolerance for RᵀR = I and det R = 1 when validating deserialized poses.
const ROTATION_TOL: f64 = 1e-9;

impl CameraExtrinsics {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self, CameraError> {
        let e = Self { rotation, translation };
        e.validate()?;
        Ok(e)
    }

    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        let ortho = (self.rotation.transpose() * self.rotation - Matrix3::identity()).norm();
        if !ortho.is_finite() || ortho > ROTATION_TOL {
            return Err(CameraError::InvalidExtrinsics(format!("rotation not orthonormal ({ortho:e})")));
        }
        let det = self.rotation.determinant();
        if (det - 1.0).abs() > ROTATION_TOL {
            return Err(CameraError::InvalidExtrinsics(format!("det(R) = {det}")));
        }
        if !self.translation.iter().all(|v| v.is_finite()) {
            return Err(CameraError::InvalidExtrinsics("non-finite translation".into()));
        }
        Ok(())
    }

    pub fn to_camera(&self, pw: &Point3<f64>) -> Vector3<f64> {
        self.rotation * pw.coords + self.translation
    }

    pub fn to_world(&self, pc: &Vector3<f64>) -> Point3<f64> {
        Point3::from(self.rotation.transpose() * (pc - self.translation))
    }

    /// Camera optical axis expressed in world coordinates.
    pub fn optical_axis_world(&self) -> Vector3<f64> {
        self.rotation.transpose() * Vector3::z()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, schemars::JsonSchema)]
pub struct CheckerboardSpec {
    pub inner_rows: usize,
    pub inner_cols: usize,
    #[serde(rename = "square_size_m")]
    pub square_size: f64,
}

impl CheckerboardSpec {
    pub fn new(inner_rows: usize, inner_cols: usize, square_size: f64) -> Result<Self, CameraError> {
        let b = Self { inner_rows, inner_cols, square_size };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        if self.inner_rows < 3 || self.inner_cols < 3 {
            return Err(CameraError::InvalidBoard("need at least 3×3 inner corners".into()));
        }
        if !(self.square_size.is_finite() && self.square_size > 0.0) {
            return Err(CameraError::InvalidBoard("square size must be positive".into()));
        }
        Ok(())
    }

    pub fn corner_count(&self) -> usize {
        self.inner_rows * self.inner_cols
    }

    /// Inner corner positions on the board plane (Z = 0), row-major.
    pub fn object_points(&self) -> Vec<Point3<f64>> {
        let s = self.square_size;
        (0..self.inner_rows)
            .flat_map(|r| (0..self.inner_cols).map(move |c| Point3::new(c as f64 * s, r as f64 * s, 0.0)))
            .collect()
    }

    /// Board centre in board coordinates.
    pub fn center(&self) -> Point3<f64> {
        Point3::new(
            (self.inner_cols - 1) as f64 * self.square_size / 2.0,
            (self.inner_rows - 1) as f64 * self.square_size / 2.0,
            0.0,
        )
    }
}

/// Detected inner corners of one checkerboard image, in row-major board order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CornerSet {
    pub image_id: String,
    pub board: CheckerboardSpec,
    #[serde(with = "point_list")]
    pub points: Vec<Point2<f64>>,
}

impl CornerSet {
    pub fn validate(&self, board: &CheckerboardSpec) -> Result<(), CameraError> {
        board.validate()?;
        let fail = |reason: String| Err(CameraError::InvalidCorners { id: self.image_id.clone(), reason });
        if self.points.len() != board.corner_count() {
            return fail(format!("expected {} corners, got {}", board.corner_count(), self.points.len()));
        }
        if !self.points.iter().all(|p| p.x.is_finite() && p.y.is_finite()) {
            return fail("non-finite corner coordinate".into());
        }
        Ok(())
    }
}

mod point_list {
    use nalgebra::Point2;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(pts: &[Point2<f64>], s: S) -> Result<S::Ok, S::Error> {
        pts.iter().map(|p| [p.x, p.y]).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Point2<f64>>, D::Error> {
        let raw: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(raw.into_iter().map(|[u, v]| Point2::new(u, v)).collect())
    }
}

/// Forward pinhole projection of a world point.
pub fn project(
    point: &Point3<f64>,
    intr: &CameraIntrinsics,
    extr: &CameraExtrinsics,
) -> Result<Point2<f64>, CameraError> {
    intr.project_camera(&extr.to_camera(point))
}

/// Lift a pixel onto the motion plane at camera-frame depth `depth`.
///
/// With extrinsics the result is in the board (world) frame, otherwise it is
/// the camera-frame point.
pub fn lift_planar(
    pixel: &Point2<f64>,
    depth: f64,
    intr: &CameraIntrinsics,
    extr: Option<&CameraExtrinsics>,
) -> Point3<f64> {
    debug_assert!(depth > 0.0, "lift depth must be positive");
    let pc = intr.backproject(pixel, depth);
    match extr {
        Some(e) => e.to_world(&pc),
        None => Point3::from(pc),
    }
}

/// Which board axis points up against gravity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, schemars::JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum BoardUpAxis {
    #[default]
    NegY,
    PosY,
    NegX,
    PosX,
}

impl BoardUpAxis {
    pub fn vector(self) -> Vector3<f64> {
        match self {
            BoardUpAxis::NegY => -Vector3::y(),
            BoardUpAxis::PosY => Vector3::y(),
            BoardUpAxis::NegX => -Vector3::x(),
            BoardUpAxis::PosX => Vector3::x(),
        }
    }
}

/// Orthonormal in-plane axes of the motion plane: `up` and `horizontal`,
/// both expressed in the frame `lift_planar` returns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MotionPlane {
    pub up: Vector3<f64>,
    pub horizontal: Vector3<f64>,
}

impl MotionPlane {
    /// Camera frame, camera assumed level: up = −Yc, horizontal = +Xc.
    pub fn camera_level() -> Self {
        Self { up: -Vector3::y(), horizontal: Vector3::x() }
    }

    /// Board frame. The requested up axis is projected onto the plane
    /// perpendicular to the optical axis.
    pub fn from_extrinsics(extr: &CameraExtrinsics, up_axis: BoardUpAxis) -> Self {
        let normal = extr.optical_axis_world();
        let raw_up = up_axis.vector();
        let up = (raw_up - normal * normal.dot(&raw_up)).normalize();
        let horizontal = normal.cross(&up).normalize();
        Self { up, horizontal }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::Rotation3;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::new(1000.0, 1000.0, 640.0, 360.0, 1280, 720).unwrap()
    }

    #[test]
    fn optical_axis_hits_principal_point() {
        let p = project(&Point3::new(0.0, 0.0, 2.0), &cam(), &CameraExtrinsics::identity()).unwrap();
        assert_eq!((p.x, p.y), (640.0, 360.0));
    }

    #[test]
    fn offset_point_projects_linearly() {
        let p = project(&Point3::new(0.2, 0.0, 2.0), &cam(), &CameraExtrinsics::identity()).unwrap();
        assert!((p.x - 740.0).abs() < 1e-12 && (p.y - 360.0).abs() < 1e-12);
    }

    #[test]
    fn behind_camera_is_rejected() {
        let err = project(&Point3::new(0.0, 0.0, -1.0), &cam(), &CameraExtrinsics::identity()).unwrap_err();
        assert!(matches!(err, CameraError::BehindCamera(_)));
        assert!(project(&Point3::new(0.0, 0.0, 0.0), &cam(), &CameraExtrinsics::identity()).is_err());
    }

    #[test]
    fn lift_inverts_projection_example() {
        let p = lift_planar(&Point2::new(740.0, 360.0), 2.0, &cam(), None);
        assert!((p - Point3::new(0.2, 0.0, 2.0)).norm() < 1e-15);
        let q = lift_planar(&Point2::new(640.0, 360.0), 3.7, &cam(), None);
        assert_eq!(q, Point3::new(0.0, 0.0, 3.7));
    }

    #[test]
    fn lift_with_extrinsics_returns_world_point() {
        let rot = Rotation3::from_euler_angles(0.1, -0.3, 0.05).into_inner();
        let extr = CameraExtrinsics::new(rot, Vector3::new(0.1, -0.2, 2.5)).unwrap();
        let pw = Point3::new(0.3, 0.4, -0.2);
        let px = project(&pw, &cam(), &extr).unwrap();
        let depth = extr.to_camera(&pw).z;
        let back = lift_planar(&px, depth, &cam(), Some(&extr));
        assert!((back - pw).norm() < 1e-9);
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0, 1.0, 10, 10).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 10.0, 1.0, 10, 10).is_err());
        let mut k = cam();
        k.skew = 0.1;
        assert!(k.validate().is_err());
    }

    #[test]
    fn extrinsics_json_is_row_major() {
        let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), 0.5).into_inner();
        let e = CameraExtrinsics::new(rot, Vector3::new(1.0, 2.0, 3.0)).unwrap();
        let json = serde_json::to_value(e).unwrap();
        assert_eq!(json["rotation"][0][1].as_f64().unwrap(), rot[(0, 1)]);
        let back: CameraExtrinsics = serde_json::from_value(json).unwrap();
        assert_eq!(back, e);
        let bad = serde_json::json!({"rotation": [[2.0,0,0],[0,1,0],[0,0,1]], "translation": [0,0,1]});
        assert!(serde_json::from_value::<CameraExtrinsics>(bad).is_err());
    }

    #[test]
    fn board_points_row_major() {
        let b = CheckerboardSpec::new(3, 4, 0.05).unwrap();
        let pts = b.object_points();
        assert_eq!(pts.len(), 12);
        assert_eq!(pts[1], Point3::new(0.05, 0.0, 0.0));
        assert_eq!(pts[4], Point3::new(0.0, 0.05, 0.0));
        assert!(CheckerboardSpec::new(2, 4, 0.05).is_err());
    }

    #[test]
    fn corner_file_format() {
        let json = r#"{"image_id":"a","board":{"inner_rows":3,"inner_cols":3,"square_size_m":0.1},
            "points":[[0,0],[1,0],[2,0],[0,1],[1,1],[2,1],[0,2],[1,2],[2,2]]}"#;
        let cs: CornerSet = serde_json::from_str(json).unwrap();
        cs.validate(&cs.board).unwrap();
        assert_eq!(cs.points[5], Point2::new(2.0, 1.0));
        let short = CornerSet { points: cs.points[..8].to_vec(), ..cs.clone() };
        assert!(short.validate(&cs.board).is_err());
    }

    #[test]
    fn motion_plane_from_yawed_camera() {
        let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), 0.3).into_inner();
        let e = CameraExtrinsics::new(rot, Vector3::new(0.0, 0.0, 2.0)).unwrap();
        let plane = MotionPlane::from_extrinsics(&e, BoardUpAxis::NegY);
        assert!((plane.up - (-Vector3::y())).norm() < 1e-12);
        assert!(plane.horizontal.dot(&e.optical_axis_world()).abs() < 1e-12);
    }
}
