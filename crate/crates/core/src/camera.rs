//! Pinhole camera with a two-term radial distortion.

use nalgebra::{Matrix3, Point2, Point3, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::line::ImageLine;

/// Zero-skew, unit-aspect intrinsics in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraIntrinsics {
    f: f64,
    pp: Point2<f64>,
    image_size: (u32, u32),
}

impl CameraIntrinsics {
    pub fn new(f: f64, pp: Point2<f64>, image_size: (u32, u32)) -> Result<Self> {
        let (w, h) = (image_size.0 as f64, image_size.1 as f64);
        if !(f.is_finite() && f > 0.0) {
            return Err(Error::InvalidIntrinsics(format!("focal length {f} must be positive")));
        }
        if !(pp.x.is_finite() && pp.y.is_finite()) {
            return Err(Error::InvalidIntrinsics("principal point is not finite".into()));
        }
        if !(0.0..w).contains(&pp.x) || !(0.0..h).contains(&pp.y) {
            return Err(Error::InvalidIntrinsics(format!(
                "principal point ({}, {}) outside {}x{} image",
                pp.x, pp.y, image_size.0, image_size.1
            )));
        }
        Ok(Self { f, pp, image_size })
    }

    /// Camera with the principal point at the exact image center.
    pub fn centered(f: f64, image_size: (u32, u32)) -> Result<Self> {
        let pp = Point2::new(image_size.0 as f64 / 2.0, image_size.1 as f64 / 2.0);
        Self::new(f, pp, image_size)
    }

    pub fn f(&self) -> f64 {
        self.f
    }

    pub fn pp(&self) -> Point2<f64> {
        self.pp
    }

    pub fn image_size(&self) -> (u32, u32) {
        self.image_size
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(self.f, 0.0, self.pp.x, 0.0, self.f, self.pp.y, 0.0, 0.0, 1.0)
    }

    /// Largest normalized radius reached inside the image: the distance from
    /// the principal point to the farthest image corner, over `f`.
    pub fn working_radius(&self) -> f64 {
        let (w, h) = (self.image_size.0 as f64, self.image_size.1 as f64);
        let dx = self.pp.x.max(w - self.pp.x);
        let dy = self.pp.y.max(h - self.pp.y);
        dx.hypot(dy) / self.f
    }

    pub fn to_pixel(&self, normalized: Point2<f64>) -> Point2<f64> {
        Point2::new(
            self.f * normalized.x + self.pp.x,
            self.f * normalized.y + self.pp.y,
        )
    }

    pub fn to_normalized(&self, pixel: Point2<f64>) -> Point2<f64> {
        Point2::new((pixel.x - self.pp.x) / self.f, (pixel.y - self.pp.y) / self.f)
    }

    pub fn contains(&self, pixel: Point2<f64>) -> bool {
        pixel.x >= 0.0
            && pixel.y >= 0.0
            && pixel.x < self.image_size.0 as f64
            && pixel.y < self.image_size.1 as f64
    }
}

/// Even radial polynomial `1 + k1·r² + k2·r⁴` on normalized coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialDistortion {
    k1: f64,
    k2: f64,
}

impl RadialDistortion {
    /// Validates that the radial map `r -> r·(1 + k1·r² + k2·r⁴)` is strictly
    /// increasing on `[0, max_radius]`. That keeps the factor positive and the
    /// map invertible, so the image cannot fold over itself.
    pub fn new(k1: f64, k2: f64, max_radius: f64) -> Result<Self> {
        if !(k1.is_finite() && k2.is_finite()) {
            return Err(Error::InvalidDistortion("coefficients are not finite".into()));
        }
        if !(max_radius.is_finite() && max_radius >= 0.0) {
            return Err(Error::InvalidDistortion(format!("bad working radius {max_radius}")));
        }
        // d/dr [r (1 + k1 s + k2 s^2)] = 1 + 3 k1 s + 5 k2 s^2 with s = r^2.
        // A quadratic in s attains its minimum over an interval at an end
        // point or at the vertex.
        let s_max = max_radius * max_radius;
        let slope = |s: f64| 1.0 + 3.0 * k1 * s + 5.0 * k2 * s * s;
        let mut candidates = vec![0.0, s_max];
        if k2 > 0.0 {
            let vertex = -3.0 * k1 / (10.0 * k2);
            if vertex > 0.0 && vertex < s_max {
                candidates.push(vertex);
            }
        }
        let min_slope = candidates.into_iter().map(slope).fold(f64::INFINITY, f64::min);
        if min_slope <= 0.0 {
            return Err(Error::InvalidDistortion(format!(
                "(k1, k2) = ({k1}, {k2}) folds the image inside radius {max_radius}"
            )));
        }
        Ok(Self { k1, k2 })
    }

    /// Validates against the camera's working radius.
    pub fn for_camera(k1: f64, k2: f64, cam: &CameraIntrinsics) -> Result<Self> {
        Self::new(k1, k2, cam.working_radius())
    }

    pub fn none() -> Self {
        Self { k1: 0.0, k2: 0.0 }
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }

    pub fn k2(&self) -> f64 {
        self.k2
    }

    pub fn is_none(&self) -> bool {
        self.k1 == 0.0 && self.k2 == 0.0
    }

    pub fn factor(&self, r2: f64) -> f64 {
        1.0 + self.k1 * r2 + self.k2 * r2 * r2
    }

    pub fn distort_normalized(&self, p: Point2<f64>) -> Point2<f64> {
        let s = self.factor(p.coords.norm_squared());
        Point2::from(p.coords * s)
    }

    /// Inverts [`Self::distort_normalized`] by Newton's method on the radius.
    pub fn undistort_normalized(&self, p_d: Point2<f64>) -> Result<Point2<f64>> {
        const MAX_ITER: usize = 50;
        let r_d = p_d.coords.norm();
        if r_d == 0.0 || self.is_none() {
            return Ok(p_d);
        }
        let mut r = r_d;
        for _ in 0..MAX_ITER {
            let s = r * r;
            let g = r * self.factor(s) - r_d;
            let dg = 1.0 + 3.0 * self.k1 * s + 5.0 * self.k2 * s * s;
            if !(dg > 0.0) {
                return Err(Error::NoConvergence { iterations: MAX_ITER });
            }
            let dr = g / dg;
            r -= dr;
            if dr.abs() <= 4.0 * f64::EPSILON * r.abs() {
                return Ok(Point2::from(p_d.coords * (r / r_d)));
            }
        }
        Err(Error::NoConvergence { iterations: MAX_ITER })
    }
}

/// Rigid transform from board coordinates to the camera frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoardPose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl BoardPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if rotation.iter().chain(translation.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidPose("non-finite entries".into()));
        }
        let ortho = (rotation.transpose() * rotation - Matrix3::identity()).abs().max();
        if ortho > 1e-10 {
            return Err(Error::InvalidPose(format!("rotation is not orthonormal ({ortho:e})")));
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidPose(format!("rotation determinant {det}")));
        }
        if translation.z <= 0.0 {
            return Err(Error::InvalidPose(format!(
                "board center depth {} is not positive",
                translation.z
            )));
        }
        Ok(Self { rotation, translation })
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    /// Board plane normal in the camera frame, `r1 × r2`.
    pub fn normal(&self) -> Vector3<f64> {
        self.rotation.column(2).into_owned()
    }

    pub fn to_camera(&self, board_point: Point2<f64>) -> Point3<f64> {
        let p = self.rotation * Vector3::new(board_point.x, board_point.y, 0.0) + self.translation;
        Point3::from(p)
    }
}

/// Projects a camera-frame point to pixels.
pub fn project_camera_point(
    cam: &CameraIntrinsics,
    dist: &RadialDistortion,
    p: Point3<f64>,
) -> Result<Point2<f64>> {
    if p.z <= 0.0 {
        return Err(Error::BehindCamera { z: p.z });
    }
    let normalized = Point2::new(p.x / p.z, p.y / p.z);
    Ok(cam.to_pixel(dist.distort_normalized(normalized)))
}

/// Board point → camera frame → normalized → distorted → pixel.
pub fn project(
    cam: &CameraIntrinsics,
    dist: &RadialDistortion,
    pose: &BoardPose,
    board_point: Point2<f64>,
) -> Result<Point2<f64>> {
    project_camera_point(cam, dist, pose.to_camera(board_point))
}

/// The image of the plane through the optical axis that is perpendicular to
/// the board. It passes through the principal point along `(n_x, n_y)`.
pub fn ground_truth_principal_line(cam: &CameraIntrinsics, pose: &BoardPose) -> Result<ImageLine> {
    let n = pose.normal();
    let direction = Vector2::new(n.x, n.y);
    if direction.norm() < 1e-12 {
        return Err(Error::DegenerateFrontalPose);
    }
    ImageLine::through(cam.pp(), direction)
}
