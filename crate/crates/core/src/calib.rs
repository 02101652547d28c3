//! Planar homographies, checkerboard intrinsic calibration and single-view
//! pose recovery.

use nalgebra::{DMatrix, DVector, Matrix2x4, Matrix2x6, Matrix3, Point2, Point3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::{CameraError, CameraExtrinsics, CameraIntrinsics, CheckerboardSpec, CornerSet};
use crate::lm::{self, LeastSquares, LmSettings};

/// Singular-value ratio below which a linear system counts as rank deficient.
const RANK_TOL: f64 = 1e-9;

/// Similarity that moves points to zero mean and √2 mean distance.
fn normalizing_transform(pts: &[Point2<f64>]) -> Matrix3<f64> {
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.x, b + p.y));
    let (mx, my) = (mx / n, my / n);
    let mean_dist = pts.iter().map(|p| ((p.x - mx).powi(2) + (p.y - my).powi(2)).sqrt()).sum::<f64>() / n;
    let s = if mean_dist > 0.0 { std::f64::consts::SQRT_2 / mean_dist } else { 1.0 };
    Matrix3::new(s, 0.0, -s * mx, 0.0, s, -s * my, 0.0, 0.0, 1.0)
}

fn apply_h(h: &Matrix3<f64>, p: &Point2<f64>) -> Point2<f64> {
    let v = h * Vector3::new(p.x, p.y, 1.0);
    Point2::new(v.x / v.z, v.y / v.z)
}

/// Ratio of the smaller to larger principal spread of a point cloud. Zero for
/// collinear points.
fn spread_ratio(pts: &[Point2<f64>]) -> f64 {
    let n = pts.len() as f64;
    let (mx, my) = pts.iter().fold((0.0, 0.0), |(a, b), p| (a + p.x / n, b + p.y / n));
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for p in pts {
        let (dx, dy) = (p.x - mx, p.y - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let tr = sxx + syy;
    if tr <= 0.0 {
        return 0.0;
    }
    let disc = ((sxx - syy).powi(2) + 4.0 * sxy * sxy).sqrt();
    ((tr - disc) / 2.0).max(0.0) / ((tr + disc) / 2.0)
}

/// Right singular vector of the smallest singular value, plus the singular
/// values in ascending order.
fn null_vector(a: &DMatrix<f64>) -> (DVector<f64>, Vec<f64>) {
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested V^T");
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    (v_t.row(order[0]).transpose(), sv)
}

/// Homography mapping `src` to `dst` by the normalized direct linear transform.
/// The result is scaled so that its Frobenius norm is one.
pub fn estimate_homography(src: &[Point2<f64>], dst: &[Point2<f64>]) -> Result<Matrix3<f64>, CameraError> {
    if src.len() != dst.len() || src.len() < 4 {
        return Err(CameraError::DegenerateHomography(format!(
            "need ≥ 4 matched points, got {} / {}",
            src.len(),
            dst.len()
        )));
    }
    if spread_ratio(src) < RANK_TOL || spread_ratio(dst) < RANK_TOL {
        return Err(CameraError::DegenerateHomography("points are collinear".into()));
    }
    let ts = normalizing_transform(src);
    let td = normalizing_transform(dst);
    let mut a = DMatrix::zeros(2 * src.len(), 9);
    for (i, (s, d)) in src.iter().zip(dst).enumerate() {
        let s = apply_h(&ts, s);
        let d = apply_h(&td, d);
        let (x, y, u, v) = (s.x, s.y, d.x, d.y);
        let r = 2 * i;
        a.row_mut(r).copy_from_slice(&[-x, -y, -1.0, 0.0, 0.0, 0.0, u * x, u * y, u]);
        a.row_mut(r + 1).copy_from_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
    }
    let (h, sv) = null_vector(&a);
    if sv[1] <= RANK_TOL * sv[sv.len() - 1] {
        return Err(CameraError::DegenerateHomography("DLT system is rank deficient".into()));
    }
    let hn = Matrix3::from_row_slice(h.as_slice());
    let td_inv = td.try_inverse().expect("similarity is invertible");
    let hm = td_inv * hn * ts;
    Ok(hm / hm.norm())
}

/// Closest rotation in the Frobenius sense.
pub fn nearest_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("u");
    let v_t = svd.v_t.expect("v_t");
    let mut r = u * v_t;
    if r.determinant() < 0.0 {
        let mut u2 = u;
        // flip the column paired with the smallest singular value
        let k = (0..3).min_by(|&i, &j| svd.singular_values[i].total_cmp(&svd.singular_values[j])).unwrap();
        u2.column_mut(k).neg_mut();
        r = u2 * v_t;
    }
    r
}

/// Board pose from a board-plane → pixel homography and known intrinsics.
pub fn pose_from_homography(h: &Matrix3<f64>, k: &CameraIntrinsics) -> Result<CameraExtrinsics, CameraError> {
    let k_inv = k.matrix().try_inverse().ok_or_else(|| CameraError::InvalidIntrinsics("singular K".into()))?;
    let hn = k_inv * h;
    let (c1, c2, c3) = (hn.column(0).into_owned(), hn.column(1).into_owned(), hn.column(2).into_owned());
    let scale = 2.0 / (c1.norm() + c2.norm());
    let (mut r1, mut r2, mut t) = (c1 * scale, c2 * scale, c3 * scale);
    if t.z < 0.0 {
        r1 = -r1;
        r2 = -r2;
        t = -t;
    }
    let r3 = r1.cross(&r2);
    let r = nearest_rotation(&Matrix3::from_columns(&[r1, r2, r3]));
    if t.z <= 0.0 {
        return Err(CameraError::BehindCamera(t.z));
    }
    Ok(CameraExtrinsics { rotation: r, translation: t })
}

fn board_plane_points(board: &CheckerboardSpec) -> Vec<Point2<f64>> {
    board.object_points().iter().map(|p| Point2::new(p.x, p.y)).collect()
}

/// Pixel residual of one corner together with its Jacobians with respect to
/// (fx, fy, cx, cy) and a left-multiplied rotation perturbation followed by
/// translation.
fn corner_residual(
    k: &[f64; 4],
    rot: &Matrix3<f64>,
    t: &Vector3<f64>,
    obj: &Point3<f64>,
    obs: &Point2<f64>,
) -> Option<([f64; 2], Matrix2x4<f64>, Matrix2x6<f64>)> {
    let a = rot * obj.coords;
    let pc = a + t;
    if pc.z <= 0.0 {
        return None;
    }
    let (x, y, z) = (pc.x, pc.y, pc.z);
    let (fx, fy) = (k[0], k[1]);
    let u = fx * x / z + k[2];
    let v = fy * y / z + k[3];
    let jk = Matrix2x4::new(x / z, 0.0, 1.0, 0.0, 0.0, y / z, 0.0, 1.0);
    let dproj = nalgebra::Matrix2x3::new(fx / z, 0.0, -fx * x / (z * z), 0.0, fy / z, -fy * y / (z * z));
    // d(pc)/d(delta) = -[a]x
    let skew = Matrix3::new(0.0, -a.z, a.y, a.z, 0.0, -a.x, -a.y, a.x, 0.0);
    let jr = dproj * (-skew);
    let mut jp = Matrix2x6::zeros();
    jp.fixed_view_mut::<2, 3>(0, 0).copy_from(&jr);
    jp.fixed_view_mut::<2, 3>(0, 3).copy_from(&dproj);
    Some(([u - obs.x, v - obs.y], jk, jp))
}

/// Penalty residual for points that fall behind the camera during refinement.
const BEHIND_PENALTY: f64 = 1e12;

fn apply_pose_step(rot: &Matrix3<f64>, t: &Vector3<f64>, d: &[f64]) -> (Matrix3<f64>, Vector3<f64>) {
    let dr = Rotation3::from_scaled_axis(Vector3::new(d[0], d[1], d[2])).into_inner();
    (dr * rot, t + Vector3::new(d[3], d[4], d[5]))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseEstimate {
    pub extrinsics: CameraExtrinsics,
    /// Root-mean-square reprojection distance (px).
    pub rms: f64,
}

struct PoseProblem<'a> {
    k: [f64; 4],
    obj: &'a [Point3<f64>],
    obs: &'a [Point2<f64>],
}

impl LeastSquares for PoseProblem<'_> {
    type Params = (Matrix3<f64>, Vector3<f64>);

    fn residuals(&self, p: &Self::Params) -> DVector<f64> {
        let mut r = DVector::zeros(2 * self.obj.len());
        for (i, (o, m)) in self.obj.iter().zip(self.obs).enumerate() {
            let (u, v) = corner_residual(&self.k, &p.0, &p.1, o, m)
                .map(|(res, _, _)| (res[0], res[1]))
                .unwrap_or((BEHIND_PENALTY, BEHIND_PENALTY));
            r[2 * i] = u;
            r[2 * i + 1] = v;
        }
        r
    }

    fn jacobian(&self, p: &Self::Params) -> DMatrix<f64> {
        let mut j = DMatrix::zeros(2 * self.obj.len(), 6);
        for (i, (o, m)) in self.obj.iter().zip(self.obs).enumerate() {
            if let Some((_, _, jp)) = corner_residual(&self.k, &p.0, &p.1, o, m) {
                j.fixed_view_mut::<2, 6>(2 * i, 0).copy_from(&jp);
            }
        }
        j
    }

    fn apply(&self, p: &Self::Params, d: &DVector<f64>) -> Self::Params {
        apply_pose_step(&p.0, &p.1, d.as_slice())
    }
}

fn rms_from_cost(cost: f64, n_points: usize) -> f64 {
    (cost / n_points as f64).sqrt()
}

/// Recover the board pose seen in one image.
pub fn estimate_pose(
    corners: &CornerSet,
    board: &CheckerboardSpec,
    intr: &CameraIntrinsics,
) -> Result<PoseEstimate, CameraError> {
    corners.validate(board)?;
    intr.validate()?;
    let h = estimate_homography(&board_plane_points(board), &corners.points)?;
    let init = pose_from_homography(&h, intr)?;
    let obj = board.object_points();
    let problem = PoseProblem { k: [intr.fx, intr.fy, intr.cx, intr.cy], obj: &obj, obs: &corners.points };
    let out = lm::minimize(&problem, (init.rotation, init.translation), &LmSettings::default());
    let rotation = nearest_rotation(&out.params.0);
    let translation = out.params.1;
    if translation.z <= 0.0 {
        return Err(CameraError::BehindCamera(translation.z));
    }
    let extrinsics = CameraExtrinsics { rotation, translation };
    let cost = problem.residuals(&(rotation, translation)).norm_squared();
    Ok(PoseEstimate { extrinsics, rms: rms_from_cost(cost, obj.len()) })
}

/// Result of a multi-view checkerboard calibration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub intrinsics: CameraIntrinsics,
    /// Board pose for each input view, in input order.
    pub views: Vec<CameraExtrinsics>,
    /// Reprojection RMS (px) of the closed-form initialization.
    pub initial_rms: f64,
    /// Reprojection RMS (px) after refinement.
    pub rms: f64,
}

/// Row vector of the absolute-conic constraint h_iᵀ B h_j for columns i, j.
fn conic_row(h: &Matrix3<f64>, i: usize, j: usize) -> [f64; 6] {
    let hi = h.column(i);
    let hj = h.column(j);
    [
        hi[0] * hj[0],
        hi[0] * hj[1] + hi[1] * hj[0],
        hi[1] * hj[1],
        hi[2] * hj[0] + hi[0] * hj[2],
        hi[2] * hj[1] + hi[1] * hj[2],
        hi[2] * hj[2],
    ]
}

/// Closed-form zero-skew intrinsics from homographies expressed in
/// normalized pixel coordinates. Returns (fx, fy, cx, cy) in those coordinates.
fn closed_form_intrinsics(homographies: &[Matrix3<f64>]) -> Result<[f64; 4], CameraError> {
    let rows = 2 * homographies.len() + 1;
    let mut v = DMatrix::zeros(rows, 6);
    let mut push = |r: usize, row: [f64; 6]| {
        let n = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        let n = if n > 0.0 { n } else { 1.0 };
        for (c, x) in row.iter().enumerate() {
            v[(r, c)] = x / n;
        }
    };
    for (i, h) in homographies.iter().enumerate() {
        push(2 * i, conic_row(h, 0, 1));
        let a = conic_row(h, 0, 0);
        let b = conic_row(h, 1, 1);
        push(2 * i + 1, std::array::from_fn(|c| a[c] - b[c]));
    }
    // zero skew ⇔ B12 = 0
    push(rows - 1, [0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);

    let (b, sv) = null_vector(&v);
    if sv[1] <= RANK_TOL * sv[sv.len() - 1] {
        return Err(CameraError::DegenerateViews(
            "absolute-conic system has a multi-dimensional null space (board poses too similar)".into(),
        ));
    }
    let b = if b[0] < 0.0 { -b } else { b };
    let (b11, b12, b22, b13, b23, b33) = (b[0], b[1], b[2], b[3], b[4], b[5]);
    let den = b11 * b22 - b12 * b12;
    if b11 <= 0.0 || den <= 0.0 {
        return Err(CameraError::DegenerateViews("recovered conic is not positive definite".into()));
    }
    let v0 = (b12 * b13 - b11 * b23) / den;
    let lambda = b33 - (b13 * b13 + v0 * (b12 * b13 - b11 * b23)) / b11;
    if lambda / b11 <= 0.0 {
        return Err(CameraError::DegenerateViews("recovered conic has the wrong signature".into()));
    }
    let alpha = (lambda / b11).sqrt();
    let beta = (lambda * b11 / den).sqrt();
    let gamma = -b12 * alpha * alpha * beta / lambda;
    let u0 = gamma * v0 / beta - b13 * alpha * alpha / lambda;
    Ok([alpha, beta, u0, v0])
}

struct CalibProblem<'a> {
    obj: &'a [Point3<f64>],
    views: &'a [CornerSet],
}

#[derive(Clone)]
struct CalibParams {
    k: [f64; 4],
    poses: Vec<(Matrix3<f64>, Vector3<f64>)>,
}

impl LeastSquares for CalibProblem<'_> {
    type Params = CalibParams;

    fn residuals(&self, p: &CalibParams) -> DVector<f64> {
        let n = self.obj.len();
        let mut r = DVector::zeros(2 * n * self.views.len());
        for (vi, (view, pose)) in self.views.iter().zip(&p.poses).enumerate() {
            for (ci, (o, m)) in self.obj.iter().zip(&view.points).enumerate() {
                let row = 2 * (vi * n + ci);
                let (u, v) = corner_residual(&p.k, &pose.0, &pose.1, o, m)
                    .map(|(res, _, _)| (res[0], res[1]))
                    .unwrap_or((BEHIND_PENALTY, BEHIND_PENALTY));
                r[row] = u;
                r[row + 1] = v;
            }
        }
        r
    }

    fn jacobian(&self, p: &CalibParams) -> DMatrix<f64> {
        let n = self.obj.len();
        let mut j = DMatrix::zeros(2 * n * self.views.len(), 4 + 6 * self.views.len());
        for (vi, (view, pose)) in self.views.iter().zip(&p.poses).enumerate() {
            for (ci, (o, m)) in self.obj.iter().zip(&view.points).enumerate() {
                let row = 2 * (vi * n + ci);
                if let Some((_, jk, jp)) = corner_residual(&p.k, &pose.0, &pose.1, o, m) {
                    j.fixed_view_mut::<2, 4>(row, 0).copy_from(&jk);
                    j.fixed_view_mut::<2, 6>(row, 4 + 6 * vi).copy_from(&jp);
                }
            }
        }
        j
    }

    fn apply(&self, p: &CalibParams, d: &DVector<f64>) -> CalibParams {
        let d = d.as_slice();
        let k = std::array::from_fn(|i| p.k[i] + d[i]);
        let poses = p
            .poses
            .iter()
            .enumerate()
            .map(|(i, (r, t))| apply_pose_step(r, t, &d[4 + 6 * i..10 + 6 * i]))
            .collect();
        CalibParams { k, poses }
    }
}

/// Calibrate zero-skew, distortion-free intrinsics from ≥ 3 checkerboard views.
///
/// Homographies are estimated per view, the absolute-conic constraints give a
/// closed-form start, and all views are then refined jointly.
pub fn calibrate_intrinsics(
    views: &[CornerSet],
    board: &CheckerboardSpec,
    image_size: (u32, u32),
) -> Result<Calibration, CameraError> {
    board.validate()?;
    if views.len() < 3 {
        return Err(CameraError::TooFewViews(views.len()));
    }
    for v in views {
        v.validate(board)?;
    }
    let plane = board_plane_points(board);

    // Pixel pre-conditioning shared by all views: K' = N K keeps zero skew.
    let all: Vec<Point2<f64>> = views.iter().flat_map(|v| v.points.iter().copied()).collect();
    let norm = normalizing_transform(&all);
    let homographies = views
        .iter()
        .map(|v| {
            let pts: Vec<Point2<f64>> = v.points.iter().map(|p| apply_h(&norm, p)).collect();
            estimate_homography(&plane, &pts)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let [a, b, u0, v0] = closed_form_intrinsics(&homographies)?;
    let s = norm[(0, 0)];
    let k0 = [a / s, b / s, (u0 - norm[(0, 2)]) / s, (v0 - norm[(1, 2)]) / s];
    if !k0.iter().all(|x| x.is_finite()) || k0[0] <= 0.0 || k0[1] <= 0.0 {
        return Err(CameraError::DegenerateViews("closed-form intrinsics are not finite".into()));
    }
    let init_k = CameraIntrinsics { fx: k0[0], fy: k0[1], cx: k0[2], cy: k0[3], skew: 0.0, width: image_size.0, height: image_size.1 };

    let mut poses = Vec::with_capacity(views.len());
    for v in views {
        let h = estimate_homography(&plane, &v.points)?;
        let e = pose_from_homography(&h, &init_k)?;
        poses.push((e.rotation, e.translation));
    }

    let obj = board.object_points();
    let problem = CalibProblem { obj: &obj, views };
    let n_points = obj.len() * views.len();
    let out = lm::minimize(&problem, CalibParams { k: k0, poses }, &LmSettings::default());
    let [fx, fy, cx, cy] = out.params.k;
    let intrinsics = CameraIntrinsics::new(fx, fy, cx, cy, image_size.0, image_size.1)?;
    let views_out = out
        .params
        .poses
        .iter()
        .map(|(r, t)| CameraExtrinsics { rotation: nearest_rotation(r), translation: *t })
        .collect();
    Ok(Calibration {
        intrinsics,
        views: views_out,
        initial_rms: rms_from_cost(out.initial_cost, n_points),
        rms: rms_from_cost(out.cost, n_points),
    })
}

/// Root-mean-square reprojection distance of a corner set under a pose.
pub fn reprojection_rms(
    corners: &CornerSet,
    board: &CheckerboardSpec,
    intr: &CameraIntrinsics,
    extr: &CameraExtrinsics,
) -> Result<f64, CameraError> {
    let obj = board.object_points();
    let mut sum = 0.0;
    for (o, m) in obj.iter().zip(&corners.points) {
        let p = crate::camera::project(o, intr, extr)?;
        sum += (p - m).norm_squared();
    }
    Ok((sum / obj.len() as f64).sqrt())
}
