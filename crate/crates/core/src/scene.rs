//! Checkerboard model, pose recipes and synthetic corner rendering.
//!
//! Pose geometry follows the reference setup: the board is tilted about the
//! camera x-axis by a dihedral angle, shifted in the camera x-y plane, and
//! then spun by `alpha` about an axis parallel to the optical axis. Spinning
//! after the shift means a pose and its 180° partner are point reflections
//! of each other through the rotation axis.

use nalgebra::{Matrix3, Point2, Rotation3, Vector2, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::camera::{project, BoardPose, CameraIntrinsics, RadialDistortion};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkerboard {
    inner_rows: usize,
    inner_cols: usize,
    square_size: f64,
}

/// One inner corner of the board.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoardCorner {
    pub row: usize,
    pub col: usize,
    pub point: Point2<f64>,
}

pub fn make_checkerboard(inner_rows: usize, inner_cols: usize, square_size: f64) -> Result<Checkerboard> {
    if inner_rows < 3 || inner_cols < 3 {
        return Err(Error::InvalidDimensions(format!(
            "need at least 3x3 inner corners, got {inner_rows}x{inner_cols}"
        )));
    }
    if !(square_size.is_finite() && square_size > 0.0) {
        return Err(Error::InvalidDimensions(format!("square size {square_size}")));
    }
    Ok(Checkerboard {
        inner_rows,
        inner_cols,
        square_size,
    })
}

impl Checkerboard {
    pub fn inner_rows(&self) -> usize {
        self.inner_rows
    }

    pub fn inner_cols(&self) -> usize {
        self.inner_cols
    }

    pub fn square_size(&self) -> f64 {
        self.square_size
    }

    /// Corners in row-major order, centered on the board origin.
    pub fn corners(&self) -> Vec<BoardCorner> {
        let half_c = (self.inner_cols as f64 - 1.0) / 2.0;
        let half_r = (self.inner_rows as f64 - 1.0) / 2.0;
        let mut out = Vec::with_capacity(self.inner_rows * self.inner_cols);
        for row in 0..self.inner_rows {
            for col in 0..self.inner_cols {
                out.push(BoardCorner {
                    row,
                    col,
                    point: Point2::new(
                        (col as f64 - half_c) * self.square_size,
                        (row as f64 - half_r) * self.square_size,
                    ),
                });
            }
        }
        out
    }
}

/// Parametric board placement in world units and degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseRecipe {
    pub dihedral_deg: f64,
    pub alpha_deg: f64,
    /// Where the spin axis pierces the camera x-y plane.
    pub rotation_center: (f64, f64),
    /// Board center offset in the camera x-y plane before spinning.
    pub translation: (f64, f64),
    pub depth: f64,
}

impl Default for PoseRecipe {
    fn default() -> Self {
        Self {
            dihedral_deg: 45.0,
            alpha_deg: 0.0,
            rotation_center: (0.0, 0.0),
            translation: (0.0, 0.0),
            depth: 2600.0,
        }
    }
}

impl PoseRecipe {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            self.dihedral_deg,
            self.alpha_deg,
            self.rotation_center.0,
            self.rotation_center.1,
            self.translation.0,
            self.translation.1,
            self.depth,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidRecipe("non-finite field".into()));
        }
        if !(self.dihedral_deg > 0.0 && self.dihedral_deg < 90.0) {
            return Err(Error::InvalidRecipe(format!(
                "dihedral angle {} must lie in (0, 90)",
                self.dihedral_deg
            )));
        }
        if self.depth <= 0.0 {
            return Err(Error::InvalidRecipe(format!("depth {} must be positive", self.depth)));
        }
        Ok(())
    }

    pub fn with_alpha(&self, alpha_deg: f64) -> Self {
        Self { alpha_deg, ..*self }
    }

    pub fn with_translation(&self, translation: (f64, f64)) -> Self {
        Self { translation, ..*self }
    }
}

pub fn realize_pose(recipe: &PoseRecipe) -> Result<BoardPose> {
    recipe.validate()?;
    let tilt = Rotation3::from_axis_angle(&Vector3::x_axis(), recipe.dihedral_deg.to_radians());
    let spin = Rotation3::from_axis_angle(&Vector3::z_axis(), recipe.alpha_deg.to_radians());
    let rotation: Matrix3<f64> = (spin * tilt).into_inner();

    let center = Vector2::new(recipe.rotation_center.0, recipe.rotation_center.1);
    let shifted = Vector2::new(recipe.translation.0, recipe.translation.1);
    let spun = spin.matrix().fixed_view::<2, 2>(0, 0) * (shifted - center) + center;
    BoardPose::new(rotation, Vector3::new(spun.x, spun.y, recipe.depth))
}

/// `count` recipes with `alpha = 0, Δα, 2Δα, …`.
pub fn pose_ring(base: &PoseRecipe, count: usize, delta_alpha_deg: f64) -> Result<Vec<PoseRecipe>> {
    if count < 2 {
        return Err(Error::InvalidRecipe(format!("a ring needs at least 2 poses, got {count}")));
    }
    Ok((0..count)
        .map(|i| base.with_alpha(i as f64 * delta_alpha_deg))
        .collect())
}

/// `(alpha, alpha + 180°)` for each alpha.
pub fn paired_poses(alphas: &[f64], base: &PoseRecipe) -> Vec<(PoseRecipe, PoseRecipe)> {
    alphas
        .iter()
        .map(|&a| (base.with_alpha(a), base.with_alpha(a + 180.0)))
        .collect()
}

/// Every cyclic run of `n` consecutive poses removed from a ring of `count`.
pub fn skip_sets(count: usize, n: usize) -> Result<Vec<Vec<usize>>> {
    if n + 3 > count {
        return Err(Error::TooFewRemaining { count, skip: n });
    }
    if n == 0 {
        return Ok(vec![(0..count).collect()]);
    }
    Ok((0..count)
        .map(|start| {
            (0..count)
                .filter(|i| (i + count - start) % count >= n)
                .collect()
        })
        .collect())
}

/// Board point with its observed pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    pub row: usize,
    pub col: usize,
    pub board: Point2<f64>,
    pub pixel: Point2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSet {
    pub pose_id: String,
    pub correspondences: Vec<Correspondence>,
    /// `None` for externally supplied corners.
    pub noise_sigma: Option<f64>,
    pub seed: Option<u64>,
}

impl ObservationSet {
    pub fn validate(&self) -> Result<()> {
        if self.correspondences.len() < 4 {
            return Err(Error::TooFewPoints {
                needed: 4,
                got: self.correspondences.len(),
            });
        }
        let finite = self.correspondences.iter().all(|c| {
            c.pixel.x.is_finite() && c.pixel.y.is_finite() && c.board.x.is_finite() && c.board.y.is_finite()
        });
        if !finite {
            return Err(Error::NonFinite("correspondence"));
        }
        if board_points_collinear(&self.correspondences) {
            return Err(Error::DegenerateConfiguration("board points are collinear".into()));
        }
        Ok(())
    }
}

fn board_points_collinear(corr: &[Correspondence]) -> bool {
    let n = corr.len() as f64;
    let mean = corr.iter().fold(Vector2::zeros(), |acc, c| acc + c.board.coords) / n;
    let mut cov = nalgebra::Matrix2::zeros();
    for c in corr {
        let d = c.board.coords - mean;
        cov += d * d.transpose();
    }
    let ev = cov.symmetric_eigenvalues();
    ev.min() <= 1e-12 * ev.max().max(f64::MIN_POSITIVE)
}

/// Rendered corners plus the corners that landed outside the image.
#[derive(Debug, Clone, PartialEq)]
pub struct Rendering {
    pub observations: ObservationSet,
    pub out_of_frame: Vec<(usize, usize)>,
}

/// Projects every board corner and adds independent zero-mean Gaussian
/// noise to each pixel coordinate.
///
/// Noise comes from ChaCha8 seeded with `seed`, sampled through
/// `rand_distr::Normal` (ziggurat), u before v, corners in row-major order.
pub fn render_corners(
    cam: &CameraIntrinsics,
    dist: &RadialDistortion,
    recipe: &PoseRecipe,
    board: &Checkerboard,
    noise_sigma: f64,
    seed: u64,
    pose_id: &str,
) -> Result<Rendering> {
    if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
        return Err(Error::InvalidRecipe(format!("noise sigma {noise_sigma}")));
    }
    let pose = realize_pose(recipe)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise_sigma).map_err(|e| Error::InvalidRecipe(e.to_string()))?;

    let mut correspondences = Vec::with_capacity(board.inner_rows * board.inner_cols);
    let mut out_of_frame = Vec::new();
    for corner in board.corners() {
        let exact = project(cam, dist, &pose, corner.point)?;
        let pixel = if noise_sigma > 0.0 {
            Point2::new(exact.x + normal.sample(&mut rng), exact.y + normal.sample(&mut rng))
        } else {
            exact
        };
        if !cam.contains(pixel) {
            out_of_frame.push((corner.row, corner.col));
        }
        correspondences.push(Correspondence {
            row: corner.row,
            col: corner.col,
            board: corner.point,
            pixel,
        });
    }
    Ok(Rendering {
        observations: ObservationSet {
            pose_id: pose_id.to_string(),
            correspondences,
            noise_sigma: Some(noise_sigma),
            seed: Some(seed),
        },
        out_of_frame,
    })
}

/// Per-pose seed derived from a run seed and a pose identifier: FNV-1a over
/// the identifier bytes, xor the seed, finished with SplitMix64.
pub fn sub_seed(seed: u64, pose_id: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in pose_id.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = (seed ^ h).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::ground_truth_principal_line;

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::centered(1600.0, (1920, 1080)).unwrap()
    }

    #[test]
    fn small_board_is_centered() {
        let b = make_checkerboard(3, 3, 1.0).unwrap();
        let corners = b.corners();
        assert_eq!(corners.len(), 9);
        let sum = corners.iter().fold(Vector2::zeros(), |a, c| a + c.point.coords);
        assert_eq!(sum, Vector2::zeros());
    }

    #[test]
    fn default_board_extremes() {
        let b = make_checkerboard(9, 6, 160.0).unwrap();
        let xs: Vec<f64> = b.corners().iter().map(|c| c.point.x).collect();
        let ys: Vec<f64> = b.corners().iter().map(|c| c.point.y).collect();
        assert_eq!(xs.iter().cloned().fold(f64::MIN, f64::max), 400.0);
        assert_eq!(xs.iter().cloned().fold(f64::MAX, f64::min), -400.0);
        assert_eq!(ys.iter().cloned().fold(f64::MIN, f64::max), 640.0);
        assert_eq!(ys.iter().cloned().fold(f64::MAX, f64::min), -640.0);
    }

    #[test]
    fn first_corner_position() {
        let b = make_checkerboard(3, 4, 2.0).unwrap();
        assert_eq!(b.corners()[0].point, Point2::new(-3.0, -2.0));
    }

    #[test]
    fn bad_dimensions() {
        assert!(make_checkerboard(2, 5, 1.0).is_err());
        assert!(make_checkerboard(5, 5, 0.0).is_err());
    }

    #[test]
    fn recipe_validation() {
        let r = PoseRecipe::default();
        assert!(r.validate().is_ok());
        assert!(PoseRecipe { dihedral_deg: 0.0, ..r }.validate().is_err());
        assert!(PoseRecipe { dihedral_deg: 90.0, ..r }.validate().is_err());
        assert!(PoseRecipe { depth: 0.0, ..r }.validate().is_err());
    }

    #[test]
    fn reference_pose_principal_line_is_vertical() {
        let pose = realize_pose(&PoseRecipe::default()).unwrap();
        let pl = ground_truth_principal_line(&cam(), &pose).unwrap();
        assert!((pl.a() - 1.0).abs() < 1e-15 && (pl.c() + 960.0).abs() < 1e-12);
        assert_eq!(*pose.translation(), Vector3::new(0.0, 0.0, 2600.0));
    }

    #[test]
    fn half_turn_negates_normal() {
        let base = PoseRecipe::default();
        let p0 = realize_pose(&base).unwrap();
        let p1 = realize_pose(&base.with_alpha(180.0)).unwrap();
        let (n0, n1) = (p0.normal(), p1.normal());
        assert!((n0.x + n1.x).abs() < 1e-15 && (n0.y + n1.y).abs() < 1e-15);
        let l0 = ground_truth_principal_line(&cam(), &p0).unwrap();
        let l1 = ground_truth_principal_line(&cam(), &p1).unwrap();
        assert!(l0.angle_to_deg(&l1) < 1e-12 && (l0.c() - l1.c()).abs() < 1e-9);
    }

    #[test]
    fn quarter_turn_principal_line_is_horizontal() {
        let pose = realize_pose(&PoseRecipe::default().with_alpha(90.0)).unwrap();
        let pl = ground_truth_principal_line(&cam(), &pose).unwrap();
        assert!(pl.a().abs() < 1e-12);
        assert!(pl.distance(Point2::new(123.0, 540.0)) < 1e-9);
    }

    #[test]
    fn translation_spins_with_alpha() {
        let base = PoseRecipe::default().with_translation((50.0, 0.0));
        let t0 = *realize_pose(&base).unwrap().translation();
        let t180 = *realize_pose(&base.with_alpha(180.0)).unwrap().translation();
        assert!((t0.x - 50.0).abs() < 1e-12 && (t180.x + 50.0).abs() < 1e-12);
        let off_axis = PoseRecipe {
            rotation_center: (50.0, 0.0),
            ..base
        };
        let t = *realize_pose(&off_axis.with_alpha(90.0)).unwrap().translation();
        assert!((t.x - 50.0).abs() < 1e-12 && t.y.abs() < 1e-12);
    }

    #[test]
    fn ring_alphas() {
        let ring = pose_ring(&PoseRecipe::default(), 8, 45.0).unwrap();
        let alphas: Vec<f64> = ring.iter().map(|r| r.alpha_deg).collect();
        assert_eq!(alphas, vec![0.0, 45.0, 90.0, 135.0, 180.0, 225.0, 270.0, 315.0]);
        let pair = pose_ring(&PoseRecipe::default(), 2, 180.0).unwrap();
        assert_eq!(pair[1].alpha_deg, 180.0);
        assert_eq!(pose_ring(&PoseRecipe::default(), 4, 45.0).unwrap().len(), 4);
        assert!(pose_ring(&PoseRecipe::default(), 1, 45.0).is_err());
    }

    #[test]
    fn pairs_share_placement() {
        let base = PoseRecipe::default().with_translation((50.0, 0.0));
        let pairs = paired_poses(&[0.0, 45.0, 90.0, 135.0], &base);
        assert_eq!(pairs.len(), 4);
        for (a, b) in pairs {
            assert_eq!(b.alpha_deg - a.alpha_deg, 180.0);
            assert_eq!(a.translation, b.translation);
            assert_eq!(a.rotation_center, b.rotation_center);
        }
    }

    #[test]
    fn skip_set_shapes() {
        assert_eq!(skip_sets(8, 0).unwrap(), vec![(0..8).collect::<Vec<_>>()]);
        let one = skip_sets(8, 1).unwrap();
        assert_eq!(one.len(), 8);
        assert!(one.iter().all(|s| s.len() == 7));
        assert_eq!(skip_sets(8, 5).unwrap()[6], vec![3, 4, 5]);
        assert!(matches!(skip_sets(8, 6), Err(Error::TooFewRemaining { .. })));
    }

    #[test]
    fn noiseless_render_is_exact_projection() {
        let board = make_checkerboard(9, 6, 160.0).unwrap();
        let dist = RadialDistortion::for_camera(-0.1, -0.02, &cam()).unwrap();
        let recipe = PoseRecipe::default().with_alpha(30.0);
        let r = render_corners(&cam(), &dist, &recipe, &board, 0.0, 7, "p").unwrap();
        let pose = realize_pose(&recipe).unwrap();
        for c in &r.observations.correspondences {
            assert_eq!(c.pixel, project(&cam(), &dist, &pose, c.board).unwrap());
        }
        assert!(r.out_of_frame.is_empty());
    }

    #[test]
    fn render_is_deterministic() {
        let board = make_checkerboard(9, 6, 160.0).unwrap();
        let recipe = PoseRecipe::default();
        let a = render_corners(&cam(), &RadialDistortion::none(), &recipe, &board, 0.5, 11, "p").unwrap();
        let b = render_corners(&cam(), &RadialDistortion::none(), &recipe, &board, 0.5, 11, "p").unwrap();
        assert_eq!(a, b);
        let c = render_corners(&cam(), &RadialDistortion::none(), &recipe, &board, 0.5, 12, "p").unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn far_translation_is_flagged_out_of_frame() {
        let board = make_checkerboard(9, 6, 160.0).unwrap();
        let recipe = PoseRecipe::default().with_translation((2000.0, 0.0));
        let r = render_corners(&cam(), &RadialDistortion::none(), &recipe, &board, 0.0, 0, "p").unwrap();
        assert!(!r.out_of_frame.is_empty());
    }

    #[test]
    fn sub_seeds_differ_by_pose() {
        assert_ne!(sub_seed(1, "a000"), sub_seed(1, "a045"));
        assert_ne!(sub_seed(1, "a000"), sub_seed(2, "a000"));
        assert_eq!(sub_seed(1, "a000"), sub_seed(1, "a000"));
    }
}
