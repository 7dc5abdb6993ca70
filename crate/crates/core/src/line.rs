use nalgebra::{Point2, Vector2, Vector3};

use crate::error::{Error, Result};

/// Line `a·u + b·v + c = 0` in pixels with `a² + b² = 1`.
///
/// The normal `(a, b)` is lexicographically positive: `a > 0`, or `a ≈ 0`
/// and `b > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImageLine {
    a: f64,
    b: f64,
    c: f64,
}

impl ImageLine {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let n = a.hypot(b);
        if !(n.is_finite() && c.is_finite()) || n == 0.0 {
            return Err(Error::NonFinite("line coefficients"));
        }
        let (mut a, mut b, mut c) = (a / n, b / n, c / n);
        let flip = if a.abs() > 1e-12 { a < 0.0 } else { b < 0.0 };
        if flip {
            a = -a;
            b = -b;
            c = -c;
        }
        Ok(Self { a, b, c })
    }

    pub fn from_homogeneous(l: &Vector3<f64>) -> Result<Self> {
        Self::new(l.x, l.y, l.z)
    }

    /// Line through `point` along `direction`.
    pub fn through(point: Point2<f64>, direction: Vector2<f64>) -> Result<Self> {
        let (a, b) = (direction.y, -direction.x);
        Self::new(a, b, -(a * point.x + b * point.y))
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn normal(&self) -> Vector2<f64> {
        Vector2::new(self.a, self.b)
    }

    pub fn direction(&self) -> Vector2<f64> {
        Vector2::new(-self.b, self.a)
    }

    pub fn signed_distance(&self, p: Point2<f64>) -> f64 {
        self.a * p.x + self.b * p.y + self.c
    }

    pub fn distance(&self, p: Point2<f64>) -> f64 {
        self.signed_distance(p).abs()
    }

    /// Foot of the perpendicular from `p`.
    pub fn project(&self, p: Point2<f64>) -> Point2<f64> {
        p - self.normal() * self.signed_distance(p)
    }

    /// Image of this line under a 180° rotation about `center`.
    pub fn rotated_half_turn(&self, center: Point2<f64>) -> Self {
        // Points p map to 2·center − p.
        let c = self.c + 2.0 * (self.a * center.x + self.b * center.y);
        Self::new(-self.a, -self.b, c).expect("rotation preserves normalization")
    }

    /// Undirected angle to another line, in degrees within [0, 90].
    pub fn angle_to_deg(&self, other: &ImageLine) -> f64 {
        let cos = (self.a * other.a + self.b * other.b).abs().min(1.0);
        cos.acos().to_degrees()
    }
}

/// Change of a line relative to a reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeflectionMeasure {
    pub angle_deg: f64,
    pub offset_px: f64,
}

/// Angle between `line` and `reference_line`, and distance from
/// `reference_point` to `line`.
pub fn line_deflection(
    line: &ImageLine,
    reference_line: &ImageLine,
    reference_point: Point2<f64>,
) -> DeflectionMeasure {
    DeflectionMeasure {
        angle_deg: line.angle_to_deg(reference_line),
        offset_px: line.distance(reference_point),
    }
}
