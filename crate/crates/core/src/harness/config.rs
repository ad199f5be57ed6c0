//! Flat key-value experiment configuration (TOML syntax).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Resolution, RigConfig};
use crate::harness::Policy;
use crate::perception::{OracleNoiseConfig, SeedPolicy};
use crate::planner::PlannerConfig;
use crate::pushsim::{GRIPPER_WIDTH, SWEEP_HEIGHT};
use crate::recognition::DEFAULT_CHAMFER_THRESHOLD;
use crate::scene::SceneConfig;
use crate::uncertainty::UncertaintyConfig;

/// Every tunable of a benchmark run. Missing keys take their defaults;
/// unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    // Run layout.
    pub episodes: usize,
    pub first_seed: u64,
    pub policies: Vec<Policy>,
    pub densities: Vec<usize>,
    /// Push budget of every pushing policy (the smart policy may stop sooner).
    pub budget: usize,
    pub heatmaps: bool,

    // Cameras.
    pub views: usize,
    pub width: usize,
    pub height: usize,

    // Scene generation.
    pub drop_region: f64,
    pub stack_overlap: f64,

    // Segmentation oracle.
    pub visibility_threshold: f64,
    pub confusion_scale: f64,
    pub flip_scale: f64,
    pub flip_exponent: f64,
    pub confusers: usize,
    pub blur_radius: usize,
    pub temperature: f64,
    pub confidence_threshold: f64,
    pub seed_policy: SeedPolicy,

    // Recognition and uncertainty.
    pub chamfer_threshold: f64,
    pub lambda: f64,

    // Planner.
    pub eta: f64,
    pub push_distance: f64,
    pub repeat_start_threshold: f64,
    pub closeness_threshold: f64,
    pub termination_threshold: f64,
    pub max_steps: usize,
    pub search_window: f64,
    pub footprint_cells: usize,

    // Gripper.
    pub sweep_width: f64,
    pub sweep_height: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let noise = OracleNoiseConfig::default();
        let planner = PlannerConfig::default();
        let scene = SceneConfig::default();
        let rig = RigConfig::desk();
        Self {
            episodes: 50,
            first_seed: 0,
            policies: vec![Policy::None, Policy::Random, Policy::SceRandom, Policy::Smart],
            densities: vec![10, 15, 20],
            budget: 2,
            heatmaps: false,
            views: rig.views,
            width: rig.resolution.width,
            height: rig.resolution.height,
            drop_region: scene.drop_region,
            stack_overlap: scene.stack_overlap,
            visibility_threshold: noise.visibility_threshold,
            confusion_scale: noise.confusion_scale,
            flip_scale: noise.flip_scale,
            flip_exponent: noise.flip_exponent,
            confusers: noise.confusers,
            blur_radius: noise.blur_radius,
            temperature: noise.temperature,
            confidence_threshold: noise.confidence_threshold,
            seed_policy: noise.seed_policy,
            chamfer_threshold: DEFAULT_CHAMFER_THRESHOLD,
            lambda: UncertaintyConfig::default().lambda,
            eta: planner.eta,
            push_distance: planner.push_distance,
            repeat_start_threshold: planner.repeat_start_threshold,
            closeness_threshold: planner.closeness_threshold,
            termination_threshold: planner.termination_threshold,
            max_steps: planner.max_steps,
            search_window: planner.search_window,
            footprint_cells: planner.footprint[0],
            sweep_width: GRIPPER_WIDTH,
            sweep_height: SWEEP_HEIGHT,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse {
            what: "experiment config",
            message: e.to_string(),
        })?;
        cfg.settings(cfg.densities.first().copied().unwrap_or(10))?;
        if cfg.policies.is_empty() || cfg.densities.is_empty() {
            return Err(Error::Config("policies and densities must be non-empty".into()));
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse {
            what: "experiment config",
            message: e.to_string(),
        })
    }

    pub fn noise(&self) -> OracleNoiseConfig {
        OracleNoiseConfig {
            visibility_threshold: self.visibility_threshold,
            confusion_scale: self.confusion_scale,
            flip_scale: self.flip_scale,
            flip_exponent: self.flip_exponent,
            confusers: self.confusers,
            blur_radius: self.blur_radius,
            temperature: self.temperature,
            confidence_threshold: self.confidence_threshold,
            seed_policy: self.seed_policy,
        }
    }

    pub fn planner(&self) -> PlannerConfig {
        PlannerConfig {
            eta: self.eta,
            push_distance: self.push_distance,
            repeat_start_threshold: self.repeat_start_threshold,
            closeness_threshold: self.closeness_threshold,
            termination_threshold: self.termination_threshold,
            max_steps: self.max_steps,
            search_window: self.search_window,
            footprint: [self.footprint_cells, self.footprint_cells],
        }
    }

    /// Validated per-episode settings for scenes of `objects` objects.
    pub fn settings(&self, objects: usize) -> Result<EpisodeSettings> {
        let noise = self.noise();
        noise.validate().map_err(Error::Config)?;
        let planner = self.planner();
        planner.validate()?;
        if !(self.lambda >= 0.0) {
            return Err(Error::Config(format!("lambda must be non-negative, got {}", self.lambda)));
        }
        if !(self.chamfer_threshold > 0.0 && self.sweep_width > 0.0 && self.sweep_height > 0.0) {
            return Err(Error::Config("chamfer threshold and gripper size must be positive".into()));
        }
        if !(self.drop_region > 0.0 && (0.0..=1.0).contains(&self.stack_overlap)) {
            return Err(Error::Config("drop_region must be positive and stack_overlap in [0, 1]".into()));
        }
        if self.views == 0 || self.width == 0 || self.height == 0 {
            return Err(Error::Config("camera count and resolution must be positive".into()));
        }
        let desk = RigConfig::desk();
        // Focal lengths follow the image width so the field of view is fixed.
        let rig = desk
            .with_resolution(Resolution::new(self.width, self.height))
            .with_views(self.views);
        Ok(EpisodeSettings {
            scene: SceneConfig {
                n_objects: objects,
                drop_region: self.drop_region,
                stack_overlap: self.stack_overlap,
            },
            rig,
            noise,
            planner,
            uncertainty: UncertaintyConfig { lambda: self.lambda },
            chamfer_threshold: self.chamfer_threshold,
            sweep: [self.sweep_width, self.sweep_height],
            budget: self.budget,
        })
    }
}

/// Everything one episode needs besides the policy and the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSettings {
    pub scene: SceneConfig,
    pub rig: RigConfig,
    pub noise: OracleNoiseConfig,
    pub planner: PlannerConfig,
    pub uncertainty: UncertaintyConfig,
    pub chamfer_threshold: f64,
    /// Gripper width and height, meters.
    pub sweep: [f64; 2],
    pub budget: usize,
}

impl Default for EpisodeSettings {
    fn default() -> Self {
        ExperimentConfig::default().settings(10).expect("defaults are valid")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = ExperimentConfig::default();
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
        assert_eq!(cfg.lambda, 0.1);
        assert_eq!(cfg.eta, 0.5);
        assert_eq!(cfg.max_steps, 20);
        assert_eq!(cfg.confidence_threshold, 0.35);
    }

    #[test]
    fn partial_files_and_errors() {
        let cfg = ExperimentConfig::from_toml("episodes = 3\npolicies = [\"smart\"]\nviews = 2\n").unwrap();
        assert_eq!(cfg.episodes, 3);
        assert_eq!(cfg.policies, vec![Policy::Smart]);
        assert_eq!(cfg.flip_scale, ExperimentConfig::default().flip_scale);
        assert!(ExperimentConfig::from_toml("episodez = 3").is_err());
        assert!(ExperimentConfig::from_toml("policies = [\"greedy\"]").is_err());
        assert!(ExperimentConfig::from_toml("eta = -1.0").is_err());
        assert!(ExperimentConfig::from_toml("views = 0").is_err());
        assert!(ExperimentConfig::from_toml("episodes = ").is_err());
    }
}
