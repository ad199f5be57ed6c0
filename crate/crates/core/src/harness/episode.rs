//! The perceive-plan-push loop.

use std::collections::BTreeMap;
use std::path::PathBuf;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Vec2, ViewSet, WorkspaceGrid};
use crate::harness::config::EpisodeSettings;
use crate::harness::metrics::{count_matches, metrics, CountMatch, Metrics};
use crate::harness::Policy;
use crate::perception::{pixel_label_map, PixelLabelMap, SeedPolicy, SegmentationOracle, SegmentationResult};
use crate::planner::{
    plan_push, push_length, random_direction, should_terminate, validity_map, window_sums, PlannerConfig,
    PlannerRegion,
};
use crate::pushsim::{simulate_push, PushAction};
use crate::recognition::{extract_partitions, merge_partitions, recognize, RecognitionResult, ViewPartition, PARTITION_VOXEL};
use crate::scene::{generate_random_scene, height_map, render_with_coverage, Catalog, HeightMap, Rendering, SceneState, Workspace};
use crate::seed;
use crate::uncertainty::{uncertainty_field, write_heatmap_png, UncertaintyField, ViewInput};

/// The fixed perception stack of an episode.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub views: ViewSet,
    pub oracle: SegmentationOracle,
    pub grid: WorkspaceGrid,
    pub settings: EpisodeSettings,
}

/// Everything perceived at one exploration step.
#[derive(Debug, Clone)]
pub struct Observation {
    pub renderings: Vec<Rendering>,
    pub segmentations: Vec<SegmentationResult>,
    pub labels: Vec<PixelLabelMap>,
    pub partitions: Vec<ViewPartition>,
    pub recognition: RecognitionResult,
    pub field: UncertaintyField,
    pub heights: HeightMap,
}

impl Pipeline {
    pub fn new(settings: &EpisodeSettings) -> Result<Self> {
        let grid = WorkspaceGrid::default();
        let views = ViewSet::rig(&settings.rig, grid.center())?;
        settings.noise.validate().map_err(Error::Config)?;
        Ok(Self {
            views,
            oracle: SegmentationOracle::new(Catalog::standard(), settings.noise),
            grid,
            settings: settings.clone(),
        })
    }

    pub fn workspace(&self) -> Workspace {
        Workspace::from_grid(&self.grid)
    }

    pub fn scene(&self, seed: u64) -> SceneState {
        generate_random_scene(&self.settings.scene, &self.oracle.catalog, self.workspace(), seed)
    }

    fn segment_seed(&self, seed: u64, view: usize, step: usize) -> u64 {
        match self.oracle.noise.seed_policy {
            SeedPolicy::PerObject => seed::derive(seed, &[seed::stream::SEGMENT, view as u64]),
            SeedPolicy::PerStep => seed::derive(seed, &[seed::stream::SEGMENT, view as u64, step as u64]),
        }
    }

    /// Renders, segments, recognizes and scores uncertainty for `scene`.
    pub fn observe(&self, scene: &SceneState, seed: u64, step: usize) -> Result<Observation> {
        let cameras = self.views.cameras();
        let renderings: Vec<Rendering> = cameras.par_iter().map(|c| render_with_coverage(scene, c)).collect();
        let segmentations: Vec<SegmentationResult> = renderings
            .iter()
            .enumerate()
            .map(|(v, r)| self.oracle.segment_rendering(r, scene, v, self.segment_seed(seed, v, step)))
            .collect();
        let labels: Vec<PixelLabelMap> = segmentations.iter().map(pixel_label_map).collect();
        let mut partitions = Vec::new();
        for ((r, s), c) in renderings.iter().zip(&segmentations).zip(cameras) {
            partitions.extend(extract_partitions(&r.image, s, c, PARTITION_VOXEL)?);
        }
        let hypotheses = merge_partitions(&partitions, self.settings.chamfer_threshold);
        let recognition = recognize(&hypotheses, &partitions);
        let inputs: Vec<ViewInput<'_>> = cameras
            .iter()
            .zip(&renderings)
            .zip(&segmentations)
            .zip(&labels)
            .map(|(((camera, r), s), l)| ViewInput {
                camera,
                depth: &r.image,
                segmentation: s,
                labels: l,
            })
            .collect();
        let field = uncertainty_field(&inputs, &self.grid, self.oracle.num_classes(), &self.settings.uncertainty)?;
        let heights = height_map(&renderings[0].image, self.views.overhead(), &self.grid)?;
        Ok(Observation {
            renderings,
            segmentations,
            labels,
            partitions,
            recognition,
            field,
            heights,
        })
    }
}

/// Class counts of the objects at least `min_visibility` visible in some view.
pub fn visible_ground_truth(scene: &SceneState, obs: &Observation, min_visibility: f64) -> BTreeMap<usize, usize> {
    let vis: Vec<Vec<f64>> = obs.renderings.iter().map(Rendering::visibility).collect();
    let mut counts = BTreeMap::new();
    for (k, obj) in scene.objects.iter().enumerate() {
        if vis.iter().any(|v| v[k] > 0.0 && v[k] >= min_visibility) {
            *counts.entry(obj.class_id()).or_insert(0) += 1;
        }
    }
    counts
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintySummary {
    pub max: f64,
    pub mean: f64,
    pub entropy_total: f64,
    pub disagreement_max: f64,
}

impl UncertaintySummary {
    fn of(field: &UncertaintyField) -> Self {
        Self {
            max: field.combined.max(),
            mean: field.combined.mean(),
            entropy_total: field.entropy.sum(),
            disagreement_max: field.disagreement.max(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PushLog {
    pub action: PushAction,
    /// Planner scores at the chosen start, when a planner was involved.
    pub start_region: Option<PlannerRegion>,
    pub target: Option<Vec2>,
    pub random_direction: bool,
    pub moved: Vec<usize>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub counts: BTreeMap<usize, usize>,
    pub instances: usize,
    pub uncertainty: UncertaintySummary,
    pub push: Option<PushLog>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub scene_seed: u64,
    pub policy: Policy,
    pub objects: usize,
    pub views: usize,
    pub budget: usize,
    pub steps: Vec<StepLog>,
    pub ground_truth: BTreeMap<usize, usize>,
    pub predicted: BTreeMap<usize, usize>,
    pub matches: CountMatch,
    pub metrics: Metrics,
    pub motions: usize,
}

impl EpisodeLog {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse {
            what: "episode log",
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct EpisodeOptions {
    /// When set, the combined uncertainty of every step is written here.
    pub heatmap_dir: Option<PathBuf>,
}

pub fn run_episode(settings: &EpisodeSettings, policy: Policy, seed: u64) -> Result<EpisodeLog> {
    run_episode_with(settings, policy, seed, &EpisodeOptions::default())
}

pub fn run_episode_with(
    settings: &EpisodeSettings,
    policy: Policy,
    seed: u64,
    options: &EpisodeOptions,
) -> Result<EpisodeLog> {
    run_episode_detailed(settings, policy, seed, options).map(|r| r.log)
}

/// An episode's log together with the scene it ended on.
#[derive(Debug, Clone)]
pub struct EpisodeRun {
    pub log: EpisodeLog,
    pub final_scene: SceneState,
}

pub fn run_episode_detailed(
    settings: &EpisodeSettings,
    policy: Policy,
    seed: u64,
    options: &EpisodeOptions,
) -> Result<EpisodeRun> {
    let pipeline = Pipeline::new(settings)?;
    let mut scene = pipeline.scene(seed);
    let ground_truth = scene.class_counts();
    // The budget also caps the smart policy so all policies are compared at
    // the same maximum number of motions.
    let smart_cfg = PlannerConfig {
        max_steps: settings.planner.max_steps.min(settings.budget).max(1),
        ..settings.planner
    };
    let mut steps = Vec::new();
    let mut history: Vec<Vec2> = Vec::new();
    let mut step = 0;
    let final_recognition = loop {
        let obs = pipeline.observe(&scene, seed, step)?;
        if let Some(dir) = &options.heatmap_dir {
            let name = format!("{}_{}_{}_step{:02}.png", policy, settings.scene.n_objects, seed, step);
            write_heatmap_png(&obs.field.combined, &dir.join(name))?;
        }
        let mut log = StepLog {
            step,
            counts: obs.recognition.counts.clone(),
            instances: obs.recognition.total(),
            uncertainty: UncertaintySummary::of(&obs.field),
            push: None,
        };
        let stop = match policy {
            Policy::None => true,
            Policy::Random | Policy::SceRandom => step >= settings.budget,
            Policy::Smart => settings.budget == 0 || should_terminate(&obs.field.combined, step, &smart_cfg),
        };
        if stop {
            steps.push(log);
            break obs.recognition;
        }
        let mut push = choose_push(policy, &pipeline, &obs, &history, seed, step)?;
        push.action.sweep_width = settings.sweep[0];
        push.action.sweep_height = settings.sweep[1];
        let outcome = simulate_push(&scene, &push.action, seed::derive(seed, &[seed::stream::PUSH, step as u64]))?;
        history.push(push.action.start);
        push.moved = outcome.moved;
        push.converged = outcome.converged;
        log.push = Some(push);
        steps.push(log);
        scene = outcome.scene;
        step += 1;
    };
    let matches = count_matches(&final_recognition.counts, &ground_truth);
    let log = EpisodeLog {
        scene_seed: seed,
        policy,
        objects: settings.scene.n_objects,
        views: pipeline.views.len(),
        budget: settings.budget,
        steps,
        ground_truth,
        predicted: final_recognition.counts,
        metrics: metrics(&matches),
        matches,
        motions: step,
    };
    Ok(EpisodeRun {
        log,
        final_scene: scene,
    })
}

fn choose_push(
    policy: Policy,
    pipeline: &Pipeline,
    obs: &Observation,
    history: &[Vec2],
    seed: u64,
    step: usize,
) -> Result<PushLog> {
    let cfg = &pipeline.settings.planner;
    let ws = pipeline.workspace();
    let grid = pipeline.grid;
    let mut rng = seed::rng(seed, &[seed::stream::POLICY, step as u64]);
    let log = |action: PushAction, start_region: Option<PlannerRegion>, target: Option<Vec2>, random: bool| PushLog {
        action,
        start_region,
        target,
        random_direction: random,
        moved: Vec::new(),
        converged: true,
    };
    match policy {
        Policy::None => Err(Error::Config("policy `none` never pushes".into())),
        Policy::Random => {
            let low: Vec<usize> = obs
                .heights
                .grid()
                .values()
                .iter()
                .enumerate()
                .filter(|(_, &h)| h < pipeline.settings.sweep[1])
                .map(|(k, _)| k)
                .collect();
            let k = low.get(rng.gen_range(0..low.len().max(1))).copied().unwrap_or(0);
            let start = grid.cell_center(crate::geometry::Cell::new(k / grid.cols, k % grid.cols));
            let dir = random_direction(&mut rng);
            let distance = push_length(start, dir, &[], &ws, cfg);
            Ok(log(PushAction::new(start, dir, distance)?, None, None, true))
        }
        Policy::SceRandom => {
            let region = lowest_occupied_region(&obs.heights, cfg)?;
            let start = region.center(&grid);
            let dir = random_direction(&mut rng);
            let distance = push_length(start, dir, history, &ws, cfg);
            Ok(log(PushAction::new(start, dir, distance)?, Some(region), None, true))
        }
        Policy::Smart => {
            let mut plan_rng = seed::rng(seed, &[seed::stream::PLAN, step as u64]);
            let planned = plan_push(&obs.field.combined, &obs.heights, cfg, history, &mut plan_rng)?;
            Ok(log(
                planned.action,
                Some(planned.start_region),
                Some(planned.target),
                planned.random_direction,
            ))
        }
    }
}

/// Highest-validity region among those covering at least one occupied cell
/// (the whole grid when the table is empty). Ties go to the lowest index.
fn lowest_occupied_region(heights: &HeightMap, cfg: &PlannerConfig) -> Result<PlannerRegion> {
    let val = validity_map(heights, cfg.footprint)?;
    let mut occupied = heights.grid().clone();
    occupied
        .values_mut()
        .iter_mut()
        .for_each(|h| *h = f64::from(u8::from(*h > 0.0)));
    let counts = window_sums(&occupied, cfg.footprint)?;
    let any = counts.values.iter().any(|&c| c > 0.0);
    let mut best: Option<(usize, usize)> = None;
    let mut best_v = f64::NEG_INFINITY;
    for i in 0..val.rows {
        for j in 0..val.cols {
            if any && counts.get(i, j) <= 0.0 {
                continue;
            }
            if val.get(i, j) > best_v {
                best_v = val.get(i, j);
                best = Some((i, j));
            }
        }
    }
    let (i, j) = best.unwrap_or((0, 0));
    Ok(PlannerRegion {
        i,
        j,
        height: cfg.footprint[0],
        width: cfg.footprint[1],
        informativeness: 0.0,
        validity: val.get(i, j),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn settings(objects: usize) -> EpisodeSettings {
        let mut s = EpisodeSettings::default();
        s.scene.n_objects = objects;
        s
    }

    #[test]
    fn none_policy_recognizes_once() {
        let log = run_episode(&settings(6), Policy::None, 5).unwrap();
        assert_eq!(log.motions, 0);
        assert_eq!(log.steps.len(), 1);
        assert!(log.steps[0].push.is_none());
        assert_eq!(log.ground_truth.values().sum::<usize>(), 6);
    }

    #[test]
    fn fixed_budget_policies_use_their_budget() {
        for policy in [Policy::Random, Policy::SceRandom] {
            let log = run_episode(&settings(8), policy, 2).unwrap();
            assert_eq!(log.motions, 2, "{policy}");
            assert_eq!(log.steps.len(), 3);
            assert!(log.steps[..2].iter().all(|s| s.push.is_some()));
        }
    }

    #[test]
    fn smart_stops_on_a_certain_scene() {
        let mut s = settings(1);
        s.noise = crate::perception::OracleNoiseConfig::noise_free();
        s.noise.blur_radius = 0;
        let log = run_episode(&s, Policy::Smart, 4).unwrap();
        assert_eq!(log.motions, 0);
        assert_eq!(log.metrics.f1, 1.0);
    }

    #[test]
    fn episodes_are_reproducible() {
        let s = settings(8);
        let a = run_episode(&s, Policy::Smart, 9).unwrap().to_json().unwrap();
        let b = run_episode(&s, Policy::Smart, 9).unwrap().to_json().unwrap();
        assert_eq!(a, b);
    }
}
