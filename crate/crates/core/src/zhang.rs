//! Zhang-style calibration baseline under zero skew and unit aspect ratio.
//!
//! Pipeline: per-pose DLT homographies, closed-form intrinsics from the
//! absolute-conic constraints, pose extraction, linear `(k1, k2)` from radial
//! displacements, alternation of those steps on undistorted corners, and an
//! optional joint Gauss-Newton refinement of every parameter against the
//! corner reprojection error.

use nalgebra::{Matrix3, Point2, Rotation3, UnitQuaternion, Vector3};

use crate::camera::{project, BoardPose, CameraIntrinsics, RadialDistortion};
use crate::error::{Error, Result};
use crate::homography::estimate_homography_from_points;
use crate::numeric::{
    forward_difference_jacobian, gauss_newton, null_vector, solve_least_squares, GaussNewtonOptions, MatrixMN,
};
use crate::scene::ObservationSet;

#[derive(Debug, Clone, PartialEq)]
pub struct ZhangOptions {
    /// Run the joint reprojection refinement after the alternation.
    pub refine: bool,
    pub max_rounds: usize,
    /// Alternation stops once the rms changes by less than this, in pixels.
    pub rms_tol: f64,
    pub gauss_newton: GaussNewtonOptions,
}

impl Default for ZhangOptions {
    fn default() -> Self {
        Self {
            refine: true,
            max_rounds: 20,
            rms_tol: 1e-6,
            gauss_newton: GaussNewtonOptions {
                max_iter: 30,
                tol: 1e-10,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub intrinsics: CameraIntrinsics,
    pub distortion: RadialDistortion,
    pub per_pose: Vec<BoardPose>,
    pub rms_reprojection: f64,
    /// Accepted alternation rounds.
    pub iterations: usize,
    /// Intrinsics at the end of the alternation, before any refinement.
    pub unrefined: CameraIntrinsics,
    pub unrefined_distortion: RadialDistortion,
    /// Gauss-Newton steps taken, zero when refinement is off.
    pub refine_iterations: usize,
}

impl CalibrationResult {
    /// Recomputes the rms reprojection error from the stored parameters.
    pub fn reprojection_rms(&self, observations: &[ObservationSet]) -> Result<f64> {
        reprojection_rms(&self.intrinsics, &self.distortion, &self.per_pose, observations)
    }
}

fn reprojection_rms(
    cam: &CameraIntrinsics,
    dist: &RadialDistortion,
    poses: &[BoardPose],
    observations: &[ObservationSet],
) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for (pose, obs) in poses.iter().zip(observations) {
        for c in &obs.correspondences {
            let p = project(cam, dist, pose, c.board)?;
            sum += (p - c.pixel).norm_squared();
            count += 1;
        }
    }
    Ok((sum / count.max(1) as f64).sqrt())
}

/// Row of `hiᵀ ω hj` in terms of `(B11, B13, B23, B33)`, with `B22 = B11`
/// and `B12 = 0`.
fn conic_row(hi: &Vector3<f64>, hj: &Vector3<f64>) -> [f64; 4] {
    [
        hi.x * hj.x + hi.y * hj.y,
        hi.x * hj.z + hi.z * hj.x,
        hi.y * hj.z + hi.z * hj.y,
        hi.z * hj.z,
    ]
}

/// Closed-form `(f, u0, v0)` from two or more homographies.
///
/// Pixels are first mapped by a similarity that centers the image and scales
/// it to unit half-size, which keeps the conic system well conditioned and
/// preserves the zero-skew, unit-aspect form.
pub fn intrinsics_from_homographies(homographies: &[Matrix3<f64>], image_size: (u32, u32)) -> Result<CameraIntrinsics> {
    if homographies.len() < 2 {
        return Err(Error::DegenerateSet(format!(
            "{} homographies cannot fix the intrinsics",
            homographies.len()
        )));
    }
    let (w, h) = (image_size.0 as f64, image_size.1 as f64);
    let (cx, cy) = (w / 2.0, h / 2.0);
    let s = w.max(h) / 2.0;
    let norm = Matrix3::new(1.0 / s, 0.0, -cx / s, 0.0, 1.0 / s, -cy / s, 0.0, 0.0, 1.0);

    let mut rows = Vec::with_capacity(homographies.len() * 8);
    for hm in homographies {
        let hn = norm * hm;
        let hn = hn / hn.norm();
        let h1 = hn.column(0).into_owned();
        let h2 = hn.column(1).into_owned();
        let r12 = conic_row(&h1, &h2);
        let r11 = conic_row(&h1, &h1);
        let r22 = conic_row(&h2, &h2);
        rows.extend_from_slice(&r12);
        rows.extend((0..4).map(|k| r11[k] - r22[k]));
    }
    let a = MatrixMN::from_row_slice(homographies.len() * 2, 4, &rows)?;
    let nv = null_vector(&a)?;
    if nv.second_smallest() < 1e-9 * nv.largest() {
        return Err(Error::DegenerateSet(
            "board orientations do not constrain the intrinsics".into(),
        ));
    }
    let b = &nv.vector;
    if b[0] == 0.0 {
        return Err(Error::DegenerateSet("conic has no scale term".into()));
    }
    let u = -b[1] / b[0];
    let v = -b[2] / b[0];
    let f2 = b[3] / b[0] - u * u - v * v;
    if !(f2 > 0.0) {
        return Err(Error::DegenerateSet(format!("negative squared focal length {f2:e}")));
    }
    CameraIntrinsics::new(s * f2.sqrt(), Point2::new(s * u + cx, s * v + cy), image_size)
        .map_err(|e| Error::DegenerateSet(e.to_string()))
}

/// Board pose from `H ∝ K [r1 r2 t]`, projected onto the nearest rotation.
pub fn pose_from_homography(cam: &CameraIntrinsics, h: &Matrix3<f64>) -> Result<BoardPose> {
    let k_inv = cam.matrix().try_inverse().expect("intrinsics are invertible");
    let m = k_inv * h;
    let (c1, c2, c3) = (m.column(0).into_owned(), m.column(1).into_owned(), m.column(2).into_owned());
    let mut lambda = 2.0 / (c1.norm() + c2.norm());
    if c3.z * lambda < 0.0 {
        lambda = -lambda;
    }
    let r1 = c1 * lambda;
    let r2 = c2 * lambda;
    let r3 = r1.cross(&r2);
    let approx = Matrix3::from_columns(&[r1, r2, r3]);
    let svd = approx.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let mut rot = u * v_t;
    if rot.determinant() < 0.0 {
        let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, -1.0));
        rot = u * fix * v_t;
    }
    BoardPose::new(rot, c3 * lambda)
}

/// Linear `(k1, k2)` from the radial displacement of observed corners
/// relative to their ideal projections, validated over the normalized radius
/// the corners actually reach.
fn estimate_radial(
    cam: &CameraIntrinsics,
    poses: &[BoardPose],
    observations: &[ObservationSet],
) -> Result<RadialDistortion> {
    let mut r2_max = 0.0_f64;
    let mut rows = Vec::new();
    let mut rhs = Vec::new();
    let none = RadialDistortion::none();
    for (pose, obs) in poses.iter().zip(observations) {
        for c in &obs.correspondences {
            let ideal = project(cam, &none, pose, c.board)?;
            let n = cam.to_normalized(ideal);
            let r2 = n.coords.norm_squared();
            r2_max = r2_max.max(r2);
            let du = ideal.x - cam.pp().x;
            let dv = ideal.y - cam.pp().y;
            rows.extend_from_slice(&[du * r2, du * r2 * r2, dv * r2, dv * r2 * r2]);
            rhs.push(c.pixel.x - ideal.x);
            rhs.push(c.pixel.y - ideal.y);
        }
    }
    let a = MatrixMN::from_row_slice(rhs.len(), 2, &rows)?;
    let sol = solve_least_squares(&a, &rhs)?;
    RadialDistortion::new(sol.solution[0], sol.solution[1], r2_max.sqrt())
        .map_err(|e| Error::Diverged(e.to_string()))
}

/// Largest normalized radius of the corners under the given poses.
fn support_radius(cam: &CameraIntrinsics, poses: &[BoardPose], observations: &[ObservationSet]) -> Result<f64> {
    let none = RadialDistortion::none();
    let mut r2_max = 0.0_f64;
    for (pose, obs) in poses.iter().zip(observations) {
        for c in &obs.correspondences {
            let n = cam.to_normalized(project(cam, &none, pose, c.board)?);
            r2_max = r2_max.max(n.coords.norm_squared());
        }
    }
    Ok(r2_max.sqrt())
}

#[derive(Debug, Clone)]
struct Estimate {
    cam: CameraIntrinsics,
    dist: RadialDistortion,
    poses: Vec<BoardPose>,
    rms: f64,
}

/// One pass: homographies from (optionally undistorted) corners, intrinsics,
/// poses, then distortion.
fn estimate_once(
    observations: &[ObservationSet],
    image_size: (u32, u32),
    undistort_with: Option<(&CameraIntrinsics, &RadialDistortion)>,
) -> Result<Estimate> {
    let mut homographies = Vec::with_capacity(observations.len());
    for obs in observations {
        let board: Vec<Point2<f64>> = obs.correspondences.iter().map(|c| c.board).collect();
        let image = obs
            .correspondences
            .iter()
            .map(|c| match undistort_with {
                Some((cam, dist)) => dist
                    .undistort_normalized(cam.to_normalized(c.pixel))
                    .map(|p| cam.to_pixel(p)),
                None => Ok(c.pixel),
            })
            .collect::<Result<Vec<_>>>()?;
        homographies.push(*estimate_homography_from_points(&board, &image)?.matrix());
    }
    let cam = intrinsics_from_homographies(&homographies, image_size)?;
    let poses = homographies
        .iter()
        .map(|h| pose_from_homography(&cam, h))
        .collect::<Result<Vec<_>>>()?;
    let dist = estimate_radial(&cam, &poses, observations)?;
    let rms = reprojection_rms(&cam, &dist, &poses, observations)?;
    Ok(Estimate { cam, dist, poses, rms })
}

/// Distortion `k_prev + factor·(k_next − k_prev)`, valid over the corners.
fn over_relaxed(
    previous: &Estimate,
    next: &Estimate,
    factor: f64,
    observations: &[ObservationSet],
) -> Result<RadialDistortion> {
    let k1 = previous.dist.k1() + factor * (next.dist.k1() - previous.dist.k1());
    let k2 = previous.dist.k2() + factor * (next.dist.k2() - previous.dist.k2());
    let radius = support_radius(&next.cam, &next.poses, observations)?;
    RadialDistortion::new(k1, k2, radius)
}

/// Calibrates from at least three board views.
pub fn calibrate_zhang(
    observations: &[ObservationSet],
    image_size: (u32, u32),
    options: &ZhangOptions,
) -> Result<CalibrationResult> {
    if observations.len() < 3 {
        return Err(Error::DegenerateSet(format!(
            "need at least 3 poses, got {}",
            observations.len()
        )));
    }
    for obs in observations {
        obs.validate()?;
    }

    let mut current = estimate_once(observations, image_size, None)?;
    let mut iterations = 0;
    // Each refit homography absorbs most of the remaining distortion, so
    // plain alternation creeps towards the fixed point. An over-relaxed
    // distortion step is tried alongside and kept only when it lowers the rms.
    let mut relax = 2.0;
    for round in 1..=options.max_rounds {
        // A failed or worse round ends the alternation; the previous estimate
        // stands, so the rms sequence never increases.
        let plain = match estimate_once(observations, image_size, Some((&current.cam, &current.dist))) {
            Ok(next) if next.rms <= current.rms + 1e-12 => next,
            _ => break,
        };
        let mut next = plain;
        while relax > 1.0 {
            let trial = over_relaxed(&current, &next, relax, observations)
                .and_then(|d| estimate_once(observations, image_size, Some((&next.cam, &d))));
            match trial {
                Ok(t) if t.rms < next.rms => {
                    next = t;
                    relax *= 2.0;
                    break;
                }
                _ => relax /= 2.0,
            }
        }
        relax = relax.clamp(2.0, 64.0);
        let change = current.rms - next.rms;
        current = next;
        iterations = round;
        if change < options.rms_tol {
            break;
        }
    }

    let unrefined = current.cam;
    let unrefined_distortion = current.dist;
    let mut refine_iterations = 0;
    if options.refine {
        let (refined, steps) = refine(observations, image_size, &current, options.gauss_newton)?;
        current = refined;
        refine_iterations = steps;
    }

    Ok(CalibrationResult {
        intrinsics: current.cam,
        distortion: current.dist,
        per_pose: current.poses,
        rms_reprojection: current.rms,
        iterations,
        unrefined,
        unrefined_distortion,
        refine_iterations,
    })
}

/// Parameter layout for the joint refinement, scaled to order one.
struct Layout {
    pixel_scale: f64,
    center: (f64, f64),
    depth_scale: f64,
    image_size: (u32, u32),
}

impl Layout {
    fn encode(&self, est: &Estimate) -> Vec<f64> {
        let mut x = vec![
            est.cam.f() / self.pixel_scale,
            (est.cam.pp().x - self.center.0) / self.pixel_scale,
            (est.cam.pp().y - self.center.1) / self.pixel_scale,
            est.dist.k1(),
            est.dist.k2(),
        ];
        for pose in &est.poses {
            // The quaternion log stays accurate near half turns.
            let rot = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*pose.rotation()));
            x.extend(rot.scaled_axis().iter());
            x.extend(pose.translation().iter().map(|t| t / self.depth_scale));
        }
        x
    }

    fn intrinsics(&self, x: &[f64]) -> (f64, Point2<f64>) {
        (
            x[0] * self.pixel_scale,
            Point2::new(
                x[1] * self.pixel_scale + self.center.0,
                x[2] * self.pixel_scale + self.center.1,
            ),
        )
    }

    fn pose_parts(&self, x: &[f64], i: usize) -> (Matrix3<f64>, Vector3<f64>) {
        let o = 5 + 6 * i;
        let rot = Rotation3::new(Vector3::new(x[o], x[o + 1], x[o + 2]));
        let t = Vector3::new(x[o + 3], x[o + 4], x[o + 5]) * self.depth_scale;
        (rot.into_inner(), t)
    }

    /// Reprojection residuals; NaN when a corner falls behind the camera.
    fn residuals(&self, x: &[f64], observations: &[ObservationSet]) -> Vec<f64> {
        let (f, pp) = self.intrinsics(x);
        let (k1, k2) = (x[3], x[4]);
        let mut out = Vec::with_capacity(observations.iter().map(|o| 2 * o.correspondences.len()).sum());
        for (i, obs) in observations.iter().enumerate() {
            let (rot, t) = self.pose_parts(x, i);
            for c in &obs.correspondences {
                let p = rot * Vector3::new(c.board.x, c.board.y, 0.0) + t;
                if p.z <= 0.0 {
                    out.extend([f64::NAN, f64::NAN]);
                    continue;
                }
                let (nx, ny) = (p.x / p.z, p.y / p.z);
                let r2 = nx * nx + ny * ny;
                let s = 1.0 + k1 * r2 + k2 * r2 * r2;
                out.push(f * nx * s + pp.x - c.pixel.x);
                out.push(f * ny * s + pp.y - c.pixel.y);
            }
        }
        out
    }

    fn decode(&self, x: &[f64], count: usize, observations: &[ObservationSet]) -> Result<Estimate> {
        let (f, pp) = self.intrinsics(x);
        let cam = CameraIntrinsics::new(f, pp, self.image_size).map_err(|e| Error::Diverged(e.to_string()))?;
        let poses = (0..count)
            .map(|i| {
                let (rot, t) = self.pose_parts(x, i);
                BoardPose::new(rot, t).map_err(|e| Error::Diverged(e.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        let radius = support_radius(&cam, &poses, observations)?;
        let dist = RadialDistortion::new(x[3], x[4], radius).map_err(|e| Error::Diverged(e.to_string()))?;
        let rms = reprojection_rms(&cam, &dist, &poses, observations)?;
        Ok(Estimate { cam, dist, poses, rms })
    }
}

fn refine(
    observations: &[ObservationSet],
    image_size: (u32, u32),
    start: &Estimate,
    options: GaussNewtonOptions,
) -> Result<(Estimate, usize)> {
    let depth_scale =
        start.poses.iter().map(|p| p.translation().norm()).sum::<f64>() / start.poses.len() as f64;
    let layout = Layout {
        pixel_scale: start.cam.f(),
        center: (image_size.0 as f64 / 2.0, image_size.1 as f64 / 2.0),
        depth_scale,
        image_size,
    };
    let x0 = layout.encode(start);
    let residual = |x: &[f64]| layout.residuals(x, observations);
    let report = gauss_newton(
        residual,
        |x| forward_difference_jacobian(residual, x),
        &x0,
        options,
    )?;
    let refined = layout.decode(&report.x, observations.len(), observations)?;
    Ok((refined, report.iterations))
}

/// Principal point of the baseline on a subset of the views.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BaselinePp {
    pub unrefined: Point2<f64>,
    /// Present when refinement was requested.
    pub refined: Option<Point2<f64>>,
}

pub fn baseline_pp_for_subset(
    observations: &[ObservationSet],
    subset: &[usize],
    image_size: (u32, u32),
    options: &ZhangOptions,
) -> Result<BaselinePp> {
    if subset.len() < 3 {
        return Err(Error::DegenerateSet(format!("subset of {} poses", subset.len())));
    }
    let chosen = subset
        .iter()
        .map(|&i| {
            observations
                .get(i)
                .cloned()
                .ok_or_else(|| Error::DegenerateSet(format!("pose index {i} out of range")))
        })
        .collect::<Result<Vec<_>>>()?;
    let result = calibrate_zhang(&chosen, image_size, options)?;
    Ok(BaselinePp {
        unrefined: result.unrefined.pp(),
        refined: options.refine.then(|| result.intrinsics.pp()),
    })
}
