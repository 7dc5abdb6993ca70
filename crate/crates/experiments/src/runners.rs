//! Experiment runners. Each renders its own synthetic scenes from the
//! config, so identical configs give identical reports.

use nalgebra::Point2;
use pline_core::principal_line::{principal_point_from_lines_with, principal_point_from_pairs_with, IntersectionOptions};
use pline_core::scene::sub_seed;
use pline_core::zhang::{calibrate_zhang, ZhangOptions};
use pline_core::{
    estimate_homography, ground_truth_principal_line, line_deflection, paired_poses, pose_ring,
    principal_line_from_homography, realize_pose, reject_outlier_lines, render_corners, skip_sets, CameraIntrinsics,
    Checkerboard, ImageLine, LabeledLine, ObservationSet, PoseRecipe, PrincipalPointEstimate, RadialDistortion,
};

use crate::config::ExperimentConfig;
use crate::error::{ExperimentError, Result};
use crate::report::{format_sig9, skip_summaries, spread_row, ExperimentReport, Row, RowKind};

pub const PL: &str = "pl";
pub const ZHANG: &str = "zhang";
pub const ZHANG_UNREFINED: &str = "zhang_unrefined";

/// Validated scene parameters shared by the runners.
pub struct Scene {
    pub config: ExperimentConfig,
    pub cam: CameraIntrinsics,
    pub dist: RadialDistortion,
    pub board: Checkerboard,
}

impl Scene {
    pub fn new(config: &ExperimentConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config: config.clone(),
            cam: config.camera()?,
            dist: config.distortion()?,
            board: config.board()?,
        })
    }

    /// Renders one pose; the noise seed is derived from `seed` and `pose_id`.
    pub fn render(&self, recipe: &PoseRecipe, seed: u64, pose_id: &str) -> Result<ObservationSet> {
        let noise_seed = sub_seed(seed, pose_id);
        let r = render_corners(
            &self.cam,
            &self.dist,
            recipe,
            &self.board,
            self.config.noise_sigma,
            noise_seed,
            pose_id,
        )?;
        Ok(r.observations)
    }

    /// The Δα ring at translation index `ti`.
    pub fn render_ring(&self, ti: usize, seed: u64) -> Result<Vec<ObservationSet>> {
        let [tx, ty] = self.config.translations[ti];
        let base = self.config.base_recipe().with_translation((tx, ty));
        pose_ring(&base, self.config.ring_size, self.config.delta_alpha_deg)?
            .iter()
            .enumerate()
            .map(|(i, r)| self.render(r, seed, &format!("t{ti}/pose{i}")))
            .collect()
    }

    fn intersection_options(&self) -> IntersectionOptions {
        IntersectionOptions {
            min_separation_deg: self.config.min_separation_deg,
            weights: None,
        }
    }

    fn zhang_options(&self) -> ZhangOptions {
        ZhangOptions {
            refine: self.config.refine,
            ..Default::default()
        }
    }

    /// Least-squares intersection, after trimming when a threshold is set.
    pub fn intersect(&self, lines: &[LabeledLine]) -> Result<(PrincipalPointEstimate, Vec<usize>)> {
        let (kept, removed) = match self.config.outlier_threshold_px {
            Some(threshold) if lines.len() >= 3 => {
                let t = reject_outlier_lines(lines, lines.len() - 2, threshold)?;
                (t.kept, t.removed)
            }
            _ => (lines.to_vec(), Vec::new()),
        };
        Ok((principal_point_from_lines_with(&kept, &self.intersection_options())?, removed))
    }
}

/// Principal line of one view from its DLT homography.
pub fn principal_line_of(obs: &ObservationSet) -> Result<ImageLine> {
    Ok(principal_line_from_homography(&estimate_homography(obs)?)?)
}

fn labeled(lines: &[Result<ImageLine>], subset: &[usize]) -> Result<Vec<LabeledLine>> {
    subset
        .iter()
        .map(|&i| match &lines[i] {
            Ok(line) => Ok(LabeledLine { id: i, line: *line }),
            Err(e) => Err(ExperimentError::Config(format!("pose {i} has no principal line: {e}"))),
        })
        .collect()
}

fn pose_list(ids: &[usize]) -> String {
    ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(" ")
}

/// Deflection of the principal line under board translations along both
/// image axes, for the `alpha = 0` pose and its half-turn partner.
pub fn run_translation_sweep(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let scene = Scene::new(config)?;
    let mut report = ExperimentReport::new("sweep", config);
    report.notes.push(
        "angle_deg and offset_px compare each line with the distortion-free line of the same pose at the true principal point"
            .to_string(),
    );
    for r in 0..config.repeats {
        let seed = config.repeat_seed(r);
        for (axis, along_x) in [("x", true), ("y", false)] {
            for (step, t) in config.sweep_offsets().into_iter().enumerate() {
                let translation = if along_x { (t, 0.0) } else { (0.0, t) };
                for alpha in [0.0, 180.0] {
                    let recipe = config.base_recipe().with_alpha(alpha).with_translation(translation);
                    let mut row = Row::new("sweep", RowKind::Detail, PL, translation, seed);
                    row.label = format!("alpha {alpha} shift {axis}");
                    let pose_id = format!("sweep/{axis}/{step}/alpha{alpha}");
                    let cell = (|| -> Result<_> {
                        let truth = ground_truth_principal_line(&scene.cam, &realize_pose(&recipe)?)?;
                        let line = principal_line_of(&scene.render(&recipe, seed, &pose_id)?)?;
                        Ok(line_deflection(&line, &truth, scene.cam.pp()))
                    })();
                    report.rows.push(match cell {
                        Ok(d) => {
                            row.angle_deg = Some(d.angle_deg);
                            row.offset_px = Some(d.offset_px);
                            row
                        }
                        Err(e) => row.failed(e),
                    });
                }
            }
        }
    }
    Ok(report)
}

/// Principal point from every ring subset left after removing `n`
/// consecutive poses, for `n = 0..=skip_max`, with group summaries.
pub fn run_skip_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let scene = Scene::new(config)?;
    let truth = scene.cam.pp();
    let mut report = ExperimentReport::new("skip", config);
    report.notes.push(
        "centroid rows average the estimates of one n; mean and std rows use the centroids of all n (sample std)"
            .to_string(),
    );
    if config.method.runs_zhang() {
        report.notes.push(format!(
            "{ZHANG} is the final baseline estimate (refined when refine = true); {ZHANG_UNREFINED} stops after the alternation"
        ));
    }
    let mut details = Vec::new();
    for ti in 0..config.translations.len() {
        let [tx, ty] = config.translations[ti];
        for r in 0..config.repeats {
            let seed = config.repeat_seed(r);
            let ring = scene.render_ring(ti, seed)?;
            let lines: Vec<Result<ImageLine>> = ring.iter().map(principal_line_of).collect();
            for n in 0..=config.skip_max {
                for (s, subset) in skip_sets(config.ring_size, n)?.into_iter().enumerate() {
                    let start = (n > 0).then_some(s);
                    let template = |method: &str| {
                        let mut row = Row::new("skip", RowKind::Detail, method, (tx, ty), seed);
                        row.n = Some(n);
                        row.skip_start = start;
                        row.label = format!("poses {}", pose_list(&subset));
                        row
                    };
                    if config.method.runs_pl() {
                        let row = template(PL);
                        details.push(match labeled(&lines, &subset).and_then(|l| scene.intersect(&l)) {
                            Ok((est, removed)) => {
                                let mut row = row.with_point(est.pp, Some(truth));
                                row.rms_px = Some(est.rms_distance);
                                if !removed.is_empty() {
                                    row.label.push_str(&format!(" trimmed {}", pose_list(&removed)));
                                }
                                row
                            }
                            Err(e) => row.failed(e),
                        });
                    }
                    if config.method.runs_zhang() {
                        let chosen: Vec<ObservationSet> = subset.iter().map(|&i| ring[i].clone()).collect();
                        match calibrate_zhang(&chosen, config.image_size(), &scene.zhang_options()) {
                            Ok(res) => {
                                let mut row = template(ZHANG).with_point(res.intrinsics.pp(), Some(truth));
                                row.rms_px = Some(res.rms_reprojection);
                                details.push(row);
                                if config.refine {
                                    details.push(template(ZHANG_UNREFINED).with_point(res.unrefined.pp(), Some(truth)));
                                }
                            }
                            Err(e) => {
                                details.push(template(ZHANG).failed(&e));
                                if config.refine {
                                    details.push(template(ZHANG_UNREFINED).failed(&e));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let summaries = skip_summaries(&details, Some(truth));
    report.rows = details;
    report.rows.extend(summaries);
    Ok(report)
}

/// Principal point from every two-pair combination of half-turn pairs and
/// from all pairs together, with the spread of the two-pair estimates.
pub fn run_pair_evaluation(config: &ExperimentConfig) -> Result<ExperimentReport> {
    let scene = Scene::new(config)?;
    if config.pair_alphas.len() < 2 {
        return Err(ExperimentError::Config("pair evaluation needs at least 2 pair_alphas".into()));
    }
    let truth = scene.cam.pp();
    let mut report = ExperimentReport::new("pairs", config);
    report.notes.push("spread rows give the two-pair centroid in u/v and the largest distance from it in offset_px".to_string());
    let k = config.pair_alphas.len();
    for ti in 0..config.translations.len() {
        let [tx, ty] = config.translations[ti];
        let base = config.base_recipe().with_translation((tx, ty));
        for r in 0..config.repeats {
            let seed = config.repeat_seed(r);
            let pairs: Vec<(Result<ImageLine>, Result<ImageLine>)> = paired_poses(&config.pair_alphas, &base)
                .iter()
                .enumerate()
                .map(|(p, (a, b))| {
                    let line = |recipe: &PoseRecipe, tag: &str| {
                        scene
                            .render(recipe, seed, &format!("t{ti}/pair{p}{tag}"))
                            .and_then(|o| principal_line_of(&o))
                    };
                    (line(a, "a"), line(b, "b"))
                })
                .collect();
            let estimate = |members: &[usize]| -> Result<PrincipalPointEstimate> {
                let chosen = members
                    .iter()
                    .map(|&p| match &pairs[p] {
                        (Ok(a), Ok(b)) => Ok((
                            LabeledLine { id: 2 * p, line: *a },
                            LabeledLine {
                                id: 2 * p + 1,
                                line: *b,
                            },
                        )),
                        _ => Err(ExperimentError::Config(format!("pair {p} has no principal lines"))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(principal_point_from_pairs_with(&chosen, &scene.intersection_options())?)
            };
            let row_for = |members: &[usize]| {
                let mut row = Row::new("pairs", RowKind::Detail, PL, (tx, ty), seed);
                row.n = Some(members.len());
                row.label = format!(
                    "alphas {}",
                    members.iter().map(|&p| config.pair_alphas[p].to_string()).collect::<Vec<_>>().join(" ")
                );
                match estimate(members) {
                    Ok(est) => {
                        let mut row = row.with_point(est.pp, Some(truth));
                        row.rms_px = Some(est.rms_distance);
                        row
                    }
                    Err(e) => row.failed(e),
                }
            };
            let mut combos = Vec::new();
            for i in 0..k {
                for j in i + 1..k {
                    combos.push(row_for(&[i, j]));
                }
            }
            let mut spread = Row::new("pairs", RowKind::Spread, PL, (tx, ty), seed);
            spread.n = Some(2);
            spread.label = "two-pair combinations".to_string();
            let spread = spread_row(&combos, spread, Some(truth));
            report.rows.extend(combos);
            if k > 2 {
                report.rows.push(row_for(&(0..k).collect::<Vec<_>>()));
            }
            report.rows.push(spread);
        }
    }
    Ok(report)
}

/// Principal point by the line method and a full baseline calibration on
/// one set of views: the configured ring at the first translation, or the
/// given observations.
pub fn run_calibration(config: &ExperimentConfig, observations: Option<&[ObservationSet]>) -> Result<ExperimentReport> {
    let scene = Scene::new(config)?;
    let mut report = ExperimentReport::new("calibrate", config);
    let (views, truth, translation) = match observations {
        Some(obs) => {
            report.notes.push("views were read from a corner file; no ground truth is known".to_string());
            (obs.to_vec(), None, (0.0, 0.0))
        }
        None => {
            let [tx, ty] = config.translations[0];
            (scene.render_ring(0, config.seed)?, Some(scene.cam.pp()), (tx, ty))
        }
    };
    let seed = config.seed;
    let mut row = Row::new("calibrate", RowKind::Detail, PL, translation, seed);
    row.n = Some(views.len());
    let lines: Vec<Result<ImageLine>> = views.iter().map(principal_line_of).collect();
    let all: Vec<usize> = (0..views.len()).collect();
    report.rows.push(match labeled(&lines, &all).and_then(|l| scene.intersect(&l)) {
        Ok((est, removed)) => {
            let mut row = row.with_point(est.pp, truth);
            row.rms_px = Some(est.rms_distance);
            if !removed.is_empty() {
                row.label = format!("trimmed {}", pose_list(&removed));
            }
            row
        }
        Err(e) => row.failed(e),
    });

    let mut row = Row::new("calibrate", RowKind::Detail, ZHANG, translation, seed);
    row.n = Some(views.len());
    report.rows.push(match calibrate_zhang(&views, config.image_size(), &scene.zhang_options()) {
        Ok(res) => {
            let mut row = row.with_point(res.intrinsics.pp(), truth);
            row.rms_px = Some(res.rms_reprojection);
            row.label = format!(
                "f {} k1 {} k2 {}",
                format_sig9(res.intrinsics.f()),
                format_sig9(res.distortion.k1()),
                format_sig9(res.distortion.k2())
            );
            row
        }
        Err(e) => row.failed(e),
    });
    Ok(report)
}

/// True principal point of the configured camera.
pub fn true_principal_point(config: &ExperimentConfig) -> Result<Point2<f64>> {
    Ok(config.camera()?.pp())
}
