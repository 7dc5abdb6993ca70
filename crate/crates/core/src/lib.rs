//! Principal-line camera geometry.
//!
//! A principal line is the image trace of the plane that contains the optical
//! axis and is perpendicular to a planar target. Every such line passes
//! through the principal point, so intersecting the lines of several board
//! poses locates it without estimating lens distortion.
//!
//! Modules, bottom up:
//!
//! - [`numeric`]: least squares, nullspaces, Gauss-Newton
//! - [`camera`]: pinhole camera, radial distortion, ground-truth lines
//! - [`scene`]: checkerboards, pose recipes, noisy corner rendering
//! - [`homography`]: normalized DLT
//! - [`principal_line`]: lines from homographies, intersections, trimming
//! - [`zhang`]: closed-form calibration baseline with radial alternation

pub mod camera;
pub mod error;
pub mod homography;
pub mod line;
pub mod numeric;
pub mod principal_line;
pub mod scene;
pub mod zhang;

pub use camera::{ground_truth_principal_line, project, BoardPose, CameraIntrinsics, RadialDistortion};
pub use error::{Error, Result};
pub use homography::{estimate_homography, reprojection_error, Homography};
pub use line::{line_deflection, DeflectionMeasure, ImageLine};
pub use principal_line::{
    principal_line_from_homography, principal_point_from_lines, principal_point_from_pairs,
    reject_outlier_lines, LabeledLine, PrincipalPointEstimate,
};
pub use scene::{
    make_checkerboard, paired_poses, pose_ring, realize_pose, render_corners, skip_sets, Checkerboard,
    ObservationSet, PoseRecipe,
};
