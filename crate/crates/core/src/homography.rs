//! Board-to-image homography by the normalized DLT.

use nalgebra::{Matrix3, Point2, Vector3};

use crate::error::{Error, Result};
use crate::numeric::{null_vector, MatrixMN};
use crate::scene::ObservationSet;

/// 3×3 homography scaled to unit Frobenius norm with its largest-magnitude
/// entry positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Homography(Matrix3<f64>);

impl Homography {
    pub fn new(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("homography"));
        }
        let norm = m.norm();
        if norm == 0.0 {
            return Err(Error::DegenerateConfiguration("zero homography".into()));
        }
        let mut m = m / norm;
        let pivot = m.iter().copied().fold(0.0_f64, |best, v| if v.abs() > best.abs() { v } else { best });
        if pivot < 0.0 {
            m = -m;
        }
        let sv = m.singular_values();
        if sv.min() < 1e-12 * sv.max() {
            return Err(Error::DegenerateConfiguration(format!(
                "homography is singular (ratio {:e})",
                sv.min() / sv.max()
            )));
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Column `i` (0-based): `h1`, `h2`, `h3`.
    pub fn column(&self, i: usize) -> Vector3<f64> {
        self.0.column(i).into_owned()
    }

    pub fn apply(&self, p: Point2<f64>) -> Point2<f64> {
        let q = self.0 * Vector3::new(p.x, p.y, 1.0);
        Point2::new(q.x / q.z, q.y / q.z)
    }

    /// Image of the board's line at infinity, `h1 × h2`.
    pub fn vanishing_line(&self) -> Vector3<f64> {
        self.column(0).cross(&self.column(1))
    }
}

/// Similarity moving the centroid to the origin with mean distance √2.
fn hartley_transform(points: &[Point2<f64>]) -> Result<Matrix3<f64>> {
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p.x).sum::<f64>() / n;
    let cy = points.iter().map(|p| p.y).sum::<f64>() / n;
    let mean_dist = points.iter().map(|p| (p.x - cx).hypot(p.y - cy)).sum::<f64>() / n;
    if !(mean_dist > 0.0) {
        return Err(Error::DegenerateConfiguration("all points coincide".into()));
    }
    let s = std::f64::consts::SQRT_2 / mean_dist;
    Ok(Matrix3::new(s, 0.0, -s * cx, 0.0, s, -s * cy, 0.0, 0.0, 1.0))
}

fn transform(t: &Matrix3<f64>, p: Point2<f64>) -> Point2<f64> {
    Point2::new(t[(0, 0)] * p.x + t[(0, 2)], t[(1, 1)] * p.y + t[(1, 2)])
}

/// Normalized DLT on (board, pixel) pairs.
pub fn estimate_homography_from_points(board: &[Point2<f64>], image: &[Point2<f64>]) -> Result<Homography> {
    if board.len() != image.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} board points vs {} image points",
            board.len(),
            image.len()
        )));
    }
    if board.len() < 4 {
        return Err(Error::TooFewPoints {
            needed: 4,
            got: board.len(),
        });
    }
    let tb = hartley_transform(board)?;
    let ti = hartley_transform(image)?;

    let mut rows = Vec::with_capacity(board.len() * 18);
    for (b, i) in board.iter().zip(image) {
        let b = transform(&tb, *b);
        let i = transform(&ti, *i);
        let (x, y, u, v) = (b.x, b.y, i.x, i.y);
        rows.extend_from_slice(&[0.0, 0.0, 0.0, -x, -y, -1.0, v * x, v * y, v]);
        rows.extend_from_slice(&[x, y, 1.0, 0.0, 0.0, 0.0, -u * x, -u * y, -u]);
    }
    let a = MatrixMN::from_row_slice(board.len() * 2, 9, &rows)?;
    let nv = null_vector(&a)?;
    if nv.second_smallest() < 1e-10 * nv.largest() {
        return Err(Error::DegenerateConfiguration(
            "correspondences do not determine a unique homography".into(),
        ));
    }
    let hn = Matrix3::from_row_slice(&nv.vector);
    let ti_inv = ti
        .try_inverse()
        .ok_or_else(|| Error::DegenerateConfiguration("image normalization".into()))?;
    Homography::new(ti_inv * hn * tb)
}

pub fn estimate_homography(obs: &ObservationSet) -> Result<Homography> {
    let board: Vec<Point2<f64>> = obs.correspondences.iter().map(|c| c.board).collect();
    let image: Vec<Point2<f64>> = obs.correspondences.iter().map(|c| c.pixel).collect();
    estimate_homography_from_points(&board, &image)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReprojectionError {
    pub rms: f64,
    pub max: f64,
}

/// Pixel distance between `H·board` and the observed pixels.
pub fn reprojection_error(h: &Homography, obs: &ObservationSet) -> ReprojectionError {
    let mut sum = 0.0;
    let mut max = 0.0_f64;
    for c in &obs.correspondences {
        let d = (h.apply(c.board) - c.pixel).norm();
        sum += d * d;
        max = max.max(d);
    }
    let n = obs.correspondences.len().max(1) as f64;
    ReprojectionError {
        rms: (sum / n).sqrt(),
        max,
    }
}
