//! Principal lines from single homographies and principal points from their
//! intersection.
//!
//! For a camera with zero skew and unit aspect ratio the image of the
//! absolute conic is, up to scale,
//!
//! ```text
//! ω = [ 1    0    −u0 ]
//!     [ 0    1    −v0 ]
//!     [ −u0  −v0   w  ]      w = f² + u0² + v0²
//! ```
//!
//! and a board homography `H = [h1 h2 h3]` must satisfy `h1ᵀωh2 = 0` and
//! `h1ᵀωh1 = h2ᵀωh2`. Both constraints are linear in `(u0, v0, w)`. Together
//! they leave a line of solutions, and eliminating `w` projects it onto a
//! line in the image: every principal point consistent with `H` lies on it.
//! That line is the principal line of the board pose, the trace of the plane
//! through the optical axis perpendicular to the board.

use nalgebra::{Matrix2, Point2, Vector2, Vector3};

use crate::error::{Error, Result};
use crate::homography::Homography;
use crate::line::ImageLine;

/// Coefficients `(c0, cu, cv, cw)` of `hiᵀ ω hj` as
/// `c0 + cu·u0 + cv·v0 + cw·w`.
fn conic_coefficients(hi: &Vector3<f64>, hj: &Vector3<f64>) -> [f64; 4] {
    [
        hi.x * hj.x + hi.y * hj.y,
        -(hi.x * hj.z + hi.z * hj.x),
        -(hi.y * hj.z + hi.z * hj.y),
        hi.z * hj.z,
    ]
}

/// Distance ratio beyond which the vanishing line is treated as being at
/// infinity, i.e. the board is parallel to the image plane.
const FRONTAL_RATIO: f64 = 1e12;

pub fn principal_line_from_homography(h: &Homography) -> Result<ImageLine> {
    let (h1, h2) = (h.column(0), h.column(1));

    // A frontal board has its vanishing line at infinity. Compare the line's
    // distance from the image of the board origin with that point's own
    // pixel magnitude.
    let vl = h.vanishing_line();
    let origin = h.column(2);
    if origin.z == 0.0 {
        return Err(Error::DegenerateConfiguration("board origin maps to infinity".into()));
    }
    let p0 = Point2::new(origin.x / origin.z, origin.y / origin.z);
    let vl_normal = vl.x.hypot(vl.y);
    let vl_dist = (vl.x * p0.x + vl.y * p0.y + vl.z).abs();
    if vl_normal == 0.0 || vl_dist > FRONTAL_RATIO * p0.coords.norm().max(1.0) * vl_normal {
        return Err(Error::DegenerateFrontalPose);
    }

    let e1 = conic_coefficients(&h1, &h2);
    let c11 = conic_coefficients(&h1, &h1);
    let c22 = conic_coefficients(&h2, &h2);
    let e2: [f64; 4] = std::array::from_fn(|k| c11[k] - c22[k]);

    // Eliminate w between the two constraints.
    let (w1, w2) = (e1[3], e2[3]);
    let a = e1[1] * w2 - e2[1] * w1;
    let b = e1[2] * w2 - e2[2] * w1;
    let c = e1[0] * w2 - e2[0] * w1;
    let magnitude = (e1[1] * w2).abs() + (e2[1] * w1).abs() + (e1[2] * w2).abs() + (e2[2] * w1).abs();
    if magnitude == 0.0 {
        return Err(Error::DegenerateFrontalPose);
    }
    if a.hypot(b) < 1e-12 * magnitude {
        return Err(Error::IllConditioned);
    }
    ImageLine::new(a, b, c)
}

/// A line tagged with a caller-chosen identifier, usually a pose index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledLine {
    pub id: usize,
    pub line: ImageLine,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrincipalPointEstimate {
    pub pp: Point2<f64>,
    /// Distance from `pp` to each line, in `lines_used` order.
    pub per_line_distance: Vec<f64>,
    pub rms_distance: f64,
    pub lines_used: Vec<usize>,
    /// Line identifiers grouped into 180° pairs, when estimated from pairs.
    pub pairs: Option<Vec<(usize, usize)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntersectionOptions {
    /// Smallest spread of line directions, in degrees, that still fixes a
    /// point.
    pub min_separation_deg: f64,
    /// Optional per-line weights on the squared distances.
    pub weights: Option<Vec<f64>>,
}

impl Default for IntersectionOptions {
    fn default() -> Self {
        Self {
            min_separation_deg: 1.0,
            weights: None,
        }
    }
}

/// Ratio `λmin/λmax` of `Σ nnᵀ` for two unit normals `θ` apart is
/// `tan²(θ/2)`; more lines only raise it, so this is the threshold for a
/// spread of `min_separation_deg`.
fn separation_threshold(min_separation_deg: f64) -> f64 {
    (min_separation_deg.to_radians() / 2.0).tan().powi(2)
}

/// Least-squares intersection with the default options.
pub fn principal_point_from_lines(lines: &[LabeledLine]) -> Result<PrincipalPointEstimate> {
    principal_point_from_lines_with(lines, &IntersectionOptions::default())
}

/// `argmin Σ wᵢ (aᵢu + bᵢv + cᵢ)²` through the 2×2 normal equations.
pub fn principal_point_from_lines_with(
    lines: &[LabeledLine],
    options: &IntersectionOptions,
) -> Result<PrincipalPointEstimate> {
    if lines.len() < 2 {
        return Err(Error::TooFewLines {
            needed: 2,
            got: lines.len(),
        });
    }
    if let Some(w) = &options.weights {
        if w.len() != lines.len() || w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(Error::ShapeMismatch("weights must be one finite nonnegative value per line".into()));
        }
    }
    let weight = |k: usize| options.weights.as_ref().map_or(1.0, |w| w[k]);

    let mut m = Matrix2::zeros();
    let mut rhs = Vector2::zeros();
    let mut total = 0.0;
    for (k, l) in lines.iter().enumerate() {
        let n = l.line.normal();
        let w = weight(k);
        m += w * n * n.transpose();
        rhs -= w * l.line.c() * n;
        total += w;
    }
    let ev = m.symmetric_eigenvalues();
    let (lo, hi) = (ev.min(), ev.max());
    if !(total > 0.0) || hi <= 0.0 || lo < separation_threshold(options.min_separation_deg) * hi {
        return Err(Error::NearParallelLines);
    }
    let p = m.try_inverse().ok_or(Error::NearParallelLines)? * rhs;
    let pp = Point2::from(p);

    let per_line_distance: Vec<f64> = lines.iter().map(|l| l.line.distance(pp)).collect();
    let rms_distance = rms(&per_line_distance);
    Ok(PrincipalPointEstimate {
        pp,
        per_line_distance,
        rms_distance,
        lines_used: lines.iter().map(|l| l.id).collect(),
        pairs: None,
    })
}

fn rms(values: &[f64]) -> f64 {
    (values.iter().map(|d| d * d).sum::<f64>() / values.len() as f64).sqrt()
}

/// Lines kept after trimming and identifiers of the removed ones, in removal
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct TrimmedLines {
    pub kept: Vec<LabeledLine>,
    pub removed: Vec<usize>,
}

/// Greedy deterministic trimming: refit, drop the single farthest line if it
/// is beyond `distance_threshold_px`, repeat. Stops when every line is
/// within the threshold, after `max_rounds` removals, or at two lines.
pub fn reject_outlier_lines(
    lines: &[LabeledLine],
    max_rounds: usize,
    distance_threshold_px: f64,
) -> Result<TrimmedLines> {
    if lines.len() < 3 {
        return Err(Error::TooFewLines {
            needed: 3,
            got: lines.len(),
        });
    }
    let mut kept = lines.to_vec();
    let mut removed = Vec::new();
    for _ in 0..max_rounds {
        if kept.len() <= 2 {
            break;
        }
        let est = principal_point_from_lines(&kept)?;
        let (worst, dist) = est
            .per_line_distance
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (k, d)| if d > best.1 { (k, d) } else { best });
        if !(dist > distance_threshold_px) {
            break;
        }
        removed.push(kept.remove(worst).id);
    }
    Ok(TrimmedLines { kept, removed })
}

/// Intersection of 180° pairs of nearly parallel lines.
///
/// Needs at least two pairs whose mean directions differ by
/// `min_separation_deg`; the point itself is the ordinary least-squares
/// intersection of all member lines.
pub fn principal_point_from_pairs(pairs: &[(LabeledLine, LabeledLine)]) -> Result<PrincipalPointEstimate> {
    principal_point_from_pairs_with(pairs, &IntersectionOptions::default())
}

pub fn principal_point_from_pairs_with(
    pairs: &[(LabeledLine, LabeledLine)],
    options: &IntersectionOptions,
) -> Result<PrincipalPointEstimate> {
    if pairs.len() < 2 {
        return Err(Error::NearParallelLines);
    }
    let mut spread = Matrix2::zeros();
    for (p, q) in pairs {
        let (n1, mut n2) = (p.line.normal(), q.line.normal());
        if n1.dot(&n2) < 0.0 {
            n2 = -n2;
        }
        let mean = (n1 + n2).normalize();
        spread += mean * mean.transpose();
    }
    let ev = spread.symmetric_eigenvalues();
    if ev.min() < separation_threshold(options.min_separation_deg) * ev.max() {
        return Err(Error::NearParallelLines);
    }
    let flat: Vec<LabeledLine> = pairs.iter().flat_map(|(p, q)| [*p, *q]).collect();
    let mut est = principal_point_from_lines_with(&flat, options)?;
    est.pairs = Some(pairs.iter().map(|(p, q)| (p.id, q.id)).collect());
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::{ground_truth_principal_line, CameraIntrinsics, RadialDistortion};
    use crate::homography::estimate_homography;
    use crate::line::line_deflection;
    use crate::scene::{make_checkerboard, pose_ring, realize_pose, render_corners, PoseRecipe};

    fn line(id: usize, a: f64, b: f64, c: f64) -> LabeledLine {
        LabeledLine {
            id,
            line: ImageLine::new(a, b, c).unwrap(),
        }
    }

    fn cam() -> CameraIntrinsics {
        CameraIntrinsics::centered(1600.0, (1920, 1080)).unwrap()
    }

    fn reference_dist() -> RadialDistortion {
        RadialDistortion::for_camera(-0.1, -0.02, &cam()).unwrap()
    }

    fn pl_for(recipe: &PoseRecipe, dist: &RadialDistortion) -> ImageLine {
        let board = make_checkerboard(9, 6, 160.0).unwrap();
        let r = render_corners(&cam(), dist, recipe, &board, 0.0, 0, "p").unwrap();
        principal_line_from_homography(&estimate_homography(&r.observations).unwrap()).unwrap()
    }

    #[test]
    fn exact_reference_pose_gives_vertical_line() {
        let pl = pl_for(&PoseRecipe::default(), &RadialDistortion::none());
        assert!(pl.b().abs() < 1e-9, "{pl:?}");
        assert!(pl.distance(Point2::new(960.0, 0.0)) < 1e-6);
        assert!(pl.distance(Point2::new(960.0, 1080.0)) < 1e-6);
    }

    #[test]
    fn quarter_turn_gives_horizontal_line() {
        let pl = pl_for(&PoseRecipe::default().with_alpha(90.0), &RadialDistortion::none());
        assert!(pl.a().abs() < 1e-9);
        assert!(pl.distance(Point2::new(0.0, 540.0)) < 1e-6);
        assert!(pl.distance(Point2::new(1920.0, 540.0)) < 1e-6);
    }

    #[test]
    fn radial_shift_keeps_line_perpendicular_shift_deflects() {
        let base = PoseRecipe::default();
        let reference = ground_truth_principal_line(&cam(), &realize_pose(&base).unwrap()).unwrap();
        let pp = cam().pp();
        let along = line_deflection(&pl_for(&base.with_translation((0.0, 50.0)), &reference_dist()), &reference, pp);
        let across = line_deflection(&pl_for(&base.with_translation((50.0, 0.0)), &reference_dist()), &reference, pp);
        assert!(along.angle_deg < 0.2 && along.offset_px < 2.0, "{along:?}");
        assert!(across.angle_deg > along.angle_deg && across.offset_px > along.offset_px, "{across:?}");
    }

    #[test]
    fn frontal_homography_is_rejected() {
        let h = Homography::new(cam().matrix() * nalgebra::Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 2600.0))
            .unwrap();
        assert_eq!(principal_line_from_homography(&h), Err(Error::DegenerateFrontalPose));
    }

    #[test]
    fn two_axis_lines() {
        let est = principal_point_from_lines(&[line(0, 1.0, 0.0, -100.0), line(1, 0.0, 1.0, -200.0)]).unwrap();
        assert!((est.pp - Point2::new(100.0, 200.0)).norm() < 1e-12);
        assert!(est.rms_distance < 1e-12);
        assert_eq!(est.lines_used, vec![0, 1]);
    }

    #[test]
    fn three_line_least_squares() {
        // x = 0, y = 0, x + y = 1: normal equations give (1/4, 1/4).
        let est = principal_point_from_lines(&[
            line(0, 1.0, 0.0, 0.0),
            line(1, 0.0, 1.0, 0.0),
            line(2, 1.0, 1.0, -1.0),
        ])
        .unwrap();
        assert!((est.pp - Point2::new(0.25, 0.25)).norm() < 1e-12);
        let expected = (est.per_line_distance.iter().map(|d| d * d).sum::<f64>() / 3.0).sqrt();
        assert!((est.rms_distance - expected).abs() < 1e-12);
    }

    #[test]
    fn distortion_free_ring_recovers_pp() {
        let lines: Vec<LabeledLine> = pose_ring(&PoseRecipe::default(), 8, 45.0)
            .unwrap()
            .iter()
            .enumerate()
            .map(|(id, r)| LabeledLine {
                id,
                line: pl_for(r, &RadialDistortion::none()),
            })
            .collect();
        let est = principal_point_from_lines(&lines).unwrap();
        assert!((est.pp - cam().pp()).norm() < 1e-6, "{:?}", est.pp);
    }

    #[test]
    fn parallel_lines_are_rejected() {
        let err = principal_point_from_lines(&[line(0, 1.0, 0.0, 0.0), line(1, 1.0, 0.001, -5.0)]);
        assert_eq!(err, Err(Error::NearParallelLines));
        assert!(matches!(
            principal_point_from_lines(&[line(0, 1.0, 0.0, 0.0)]),
            Err(Error::TooFewLines { .. })
        ));
    }

    #[test]
    fn weights_shift_the_estimate() {
        let lines = [line(0, 1.0, 0.0, 0.0), line(1, 0.0, 1.0, 0.0), line(2, 1.0, 1.0, -1.0)];
        let opts = IntersectionOptions {
            weights: Some(vec![1.0, 1.0, 0.0]),
            ..Default::default()
        };
        let est = principal_point_from_lines_with(&lines, &opts).unwrap();
        assert!(est.pp.coords.norm() < 1e-12);
        let bad = IntersectionOptions {
            weights: Some(vec![1.0]),
            ..Default::default()
        };
        assert!(principal_point_from_lines_with(&lines, &bad).is_err());
    }

    fn star(count: usize, center: Point2<f64>) -> Vec<LabeledLine> {
        (0..count)
            .map(|k| {
                let t = (k as f64 * 180.0 / count as f64).to_radians();
                LabeledLine {
                    id: k,
                    line: ImageLine::through(center, Vector2::new(t.cos(), t.sin())).unwrap(),
                }
            })
            .collect()
    }

    #[test]
    fn single_offset_line_is_trimmed() {
        let center = Point2::new(960.0, 540.0);
        let mut lines = star(7, center);
        let shifted = ImageLine::through(center + Vector2::new(0.0, 50.0), Vector2::new(1.0, 0.3)).unwrap();
        lines.push(LabeledLine { id: 99, line: shifted });
        let trimmed = reject_outlier_lines(&lines, 10, 25.0).unwrap();
        assert_eq!(trimmed.removed, vec![99]);
        assert_eq!(trimmed.kept.len(), 7);
    }

    #[test]
    fn concurrent_lines_are_kept() {
        let lines = star(6, Point2::new(10.0, -4.0));
        assert!(reject_outlier_lines(&lines, 10, 1e-6).unwrap().removed.is_empty());
    }

    #[test]
    fn infinite_threshold_disables_trimming() {
        let mut lines = star(5, Point2::origin());
        lines.push(line(9, 1.0, 0.0, -500.0));
        let trimmed = reject_outlier_lines(&lines, 10, f64::INFINITY).unwrap();
        assert_eq!(trimmed.kept, lines);
        assert!(matches!(reject_outlier_lines(&lines[..2], 10, 1.0), Err(Error::TooFewLines { .. })));
    }

    fn pair_lines(alphas: &[f64], translation: (f64, f64)) -> Vec<(LabeledLine, LabeledLine)> {
        let base = PoseRecipe::default().with_translation(translation);
        alphas
            .iter()
            .enumerate()
            .map(|(k, &a)| {
                let l = |alpha: f64, id: usize| LabeledLine {
                    id,
                    line: pl_for(&base.with_alpha(alpha), &reference_dist()),
                };
                (l(a, 2 * k), l(a + 180.0, 2 * k + 1))
            })
            .collect()
    }

    #[test]
    fn two_pairs_cancel_distortion() {
        let est = principal_point_from_pairs(&pair_lines(&[0.0, 90.0], (50.0, 0.0))).unwrap();
        assert!((est.pp - cam().pp()).norm() < 1e-3, "{:?}", est.pp);
        assert_eq!(est.pairs, Some(vec![(0, 1), (2, 3)]));
    }

    #[test]
    fn four_pairs_match_two_pairs() {
        let four = principal_point_from_pairs(&pair_lines(&[0.0, 45.0, 90.0, 135.0], (50.0, 0.0))).unwrap();
        let two = principal_point_from_pairs(&pair_lines(&[0.0, 90.0], (50.0, 0.0))).unwrap();
        assert!((four.pp - two.pp).norm() < 1e-3);
    }

    #[test]
    fn one_pair_is_not_enough() {
        let err = principal_point_from_pairs(&pair_lines(&[0.0], (50.0, 0.0)));
        assert_eq!(err, Err(Error::NearParallelLines));
    }
}
