//! Flat TOML experiment configuration.
//!
//! Every key is optional; missing keys take the defaults below and unknown
//! keys are rejected. Lengths and translations are in board world units,
//! pixel quantities in pixels, angles in degrees.
//!
//! ```toml
//! focal_length = 1600.0
//! image_width = 1920
//! image_height = 1080
//! # principal_point = [960.0, 540.0]   # defaults to the image center
//! k1 = -0.1
//! k2 = -0.02
//! board_rows = 9
//! board_cols = 6
//! square_size = 160.0
//! dihedral_deg = 45.0
//! depth = 2600.0
//! rotation_center = [0.0, 0.0]
//! ring_size = 8
//! delta_alpha_deg = 45.0
//! translations = [[0.0, 0.0], [50.0, 0.0]]
//! sweep_max = 200.0
//! sweep_step = 25.0
//! pair_alphas = [0.0, 45.0, 90.0, 135.0]
//! skip_max = 5
//! noise_sigma = 0.0
//! seed = 1
//! repeats = 1
//! method = "both"          # pl | zhang | both
//! refine = true
//! min_separation_deg = 1.0
//! # outlier_threshold_px = 5.0
//! svg = false
//! out_dir = "out"
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use nalgebra::Point2;
use pline_core::{make_checkerboard, CameraIntrinsics, Checkerboard, PoseRecipe, RadialDistortion};
use serde::{Deserialize, Serialize};

use crate::error::{ExperimentError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pl,
    Zhang,
    Both,
}

impl Method {
    pub fn runs_pl(self) -> bool {
        matches!(self, Method::Pl | Method::Both)
    }

    pub fn runs_zhang(self) -> bool {
        matches!(self, Method::Zhang | Method::Both)
    }
}

impl FromStr for Method {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pl" => Ok(Method::Pl),
            "zhang" => Ok(Method::Zhang),
            "both" => Ok(Method::Both),
            other => Err(ExperimentError::Config(format!("unknown method {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub focal_length: f64,
    pub image_width: u32,
    pub image_height: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub principal_point: Option<[f64; 2]>,
    pub k1: f64,
    pub k2: f64,
    pub board_rows: usize,
    pub board_cols: usize,
    pub square_size: f64,
    pub dihedral_deg: f64,
    pub depth: f64,
    pub rotation_center: [f64; 2],
    pub ring_size: usize,
    pub delta_alpha_deg: f64,
    pub translations: Vec<[f64; 2]>,
    pub sweep_max: f64,
    pub sweep_step: f64,
    pub pair_alphas: Vec<f64>,
    pub skip_max: usize,
    pub noise_sigma: f64,
    pub seed: u64,
    pub repeats: usize,
    pub method: Method,
    pub refine: bool,
    pub min_separation_deg: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outlier_threshold_px: Option<f64>,
    pub svg: bool,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            focal_length: 1600.0,
            image_width: 1920,
            image_height: 1080,
            principal_point: None,
            k1: -0.1,
            k2: -0.02,
            board_rows: 9,
            board_cols: 6,
            square_size: 160.0,
            dihedral_deg: 45.0,
            depth: 2600.0,
            rotation_center: [0.0, 0.0],
            ring_size: 8,
            delta_alpha_deg: 45.0,
            translations: vec![[0.0, 0.0], [50.0, 0.0]],
            sweep_max: 200.0,
            sweep_step: 25.0,
            pair_alphas: vec![0.0, 45.0, 90.0, 135.0],
            skip_max: 5,
            noise_sigma: 0.0,
            seed: 1,
            repeats: 1,
            method: Method::Both,
            refine: true,
            min_separation_deg: 1.0,
            outlier_threshold_px: None,
            svg: false,
            out_dir: PathBuf::from("out"),
        }
    }
}

fn invalid(msg: impl Into<String>) -> ExperimentError {
    ExperimentError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: Self = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// The resolved configuration as TOML, embedded in every report.
    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.camera()?;
        self.distortion()?;
        self.board()?;
        self.base_recipe().validate()?;
        if self.ring_size < 3 {
            return Err(invalid(format!("ring_size {} must be at least 3", self.ring_size)));
        }
        if !(self.delta_alpha_deg.is_finite() && self.delta_alpha_deg != 0.0) {
            return Err(invalid("delta_alpha_deg must be finite and nonzero"));
        }
        if self.skip_max + 3 > self.ring_size {
            return Err(invalid(format!(
                "skip_max {} leaves fewer than 3 of {} poses",
                self.skip_max, self.ring_size
            )));
        }
        if self.translations.is_empty() || self.translations.iter().flatten().any(|t| !t.is_finite()) {
            return Err(invalid("translations must be a nonempty list of finite pairs"));
        }
        if !(self.sweep_step > 0.0 && self.sweep_max >= 0.0 && self.sweep_max.is_finite()) {
            return Err(invalid("sweep_step must be positive and sweep_max nonnegative"));
        }
        if self.pair_alphas.iter().any(|a| !a.is_finite()) {
            return Err(invalid("pair_alphas must be finite"));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(invalid(format!("noise_sigma {} must be nonnegative", self.noise_sigma)));
        }
        if self.repeats == 0 {
            return Err(invalid("repeats must be at least 1"));
        }
        if !(self.min_separation_deg.is_finite() && self.min_separation_deg > 0.0) {
            return Err(invalid("min_separation_deg must be positive"));
        }
        if let Some(t) = self.outlier_threshold_px {
            if !(t.is_finite() && t > 0.0) {
                return Err(invalid("outlier_threshold_px must be positive"));
            }
        }
        Ok(())
    }

    pub fn image_size(&self) -> (u32, u32) {
        (self.image_width, self.image_height)
    }

    pub fn camera(&self) -> Result<CameraIntrinsics> {
        let cam = match self.principal_point {
            Some([u, v]) => CameraIntrinsics::new(self.focal_length, Point2::new(u, v), self.image_size()),
            None => CameraIntrinsics::centered(self.focal_length, self.image_size()),
        };
        Ok(cam?)
    }

    pub fn distortion(&self) -> Result<RadialDistortion> {
        Ok(RadialDistortion::for_camera(self.k1, self.k2, &self.camera()?)?)
    }

    pub fn board(&self) -> Result<Checkerboard> {
        Ok(make_checkerboard(self.board_rows, self.board_cols, self.square_size)?)
    }

    /// Recipe at `alpha = 0` and zero translation.
    pub fn base_recipe(&self) -> PoseRecipe {
        PoseRecipe {
            dihedral_deg: self.dihedral_deg,
            alpha_deg: 0.0,
            rotation_center: (self.rotation_center[0], self.rotation_center[1]),
            translation: (0.0, 0.0),
            depth: self.depth,
        }
    }

    /// Sweep offsets `0, step, …` up to `sweep_max`.
    pub fn sweep_offsets(&self) -> Vec<f64> {
        let count = (self.sweep_max / self.sweep_step + 1e-9).floor() as usize;
        (0..=count).map(|i| i as f64 * self.sweep_step).collect()
    }

    /// Seed of repeat `r`.
    pub fn repeat_seed(&self, r: usize) -> u64 {
        self.seed.wrapping_add(r as u64)
    }
}
