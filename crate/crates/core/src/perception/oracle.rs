//! Parametric stand-in for a learned instance segmenter.
//!
//! For every object at least `visibility_threshold` visible in a view the
//! oracle emits one detection. Class ambiguity grows with occlusion: the
//! reported class gets mass `1 - eps` with `eps = confusion_scale * (1 - v)`,
//! the rest is shared by the three classes of most similar size. With
//! probability `flip_scale * (1 - v)^flip_exponent` the report names one of
//! those similar classes instead of the true one, so heavy occlusion causes
//! most of the mistakes. Mask edges are softened by a box blur.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Detection, PixelRect, SegmentationResult};
use crate::geometry::CameraModel;
use crate::scene::{render_with_coverage, Catalog, Rendering, SceneState, BACKGROUND};
use crate::seed;

/// How the per-detection random draws are keyed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeedPolicy {
    /// Draws depend on (scene seed, view, object) only, so an object whose
    /// visibility does not change keeps its label across exploration steps.
    PerObject,
    /// Fresh draws at every exploration step.
    PerStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleNoiseConfig {
    /// Objects below this visible fraction are missed.
    pub visibility_threshold: f64,
    pub confusion_scale: f64,
    /// Label flip probability at zero visibility.
    pub flip_scale: f64,
    /// Shape of the flip curve: the probability is
    /// `flip_scale * (1 - v)^flip_exponent`.
    pub flip_exponent: f64,
    /// Size of the confusion set.
    pub confusers: usize,
    /// Box-blur radius applied to the foreground mask (pixels).
    pub blur_radius: usize,
    /// Sharpening (< 1) or flattening (> 1) of the class distribution.
    pub temperature: f64,
    /// Detections below this confidence are dropped.
    pub confidence_threshold: f64,
    pub seed_policy: SeedPolicy,
}

impl Default for OracleNoiseConfig {
    fn default() -> Self {
        Self {
            visibility_threshold: 0.15,
            confusion_scale: 0.25,
            flip_scale: 1.0,
            flip_exponent: 2.0,
            confusers: 3,
            blur_radius: 2,
            temperature: 1.0,
            confidence_threshold: 0.35,
            seed_policy: SeedPolicy::PerObject,
        }
    }
}

impl OracleNoiseConfig {
    /// Ground truth masks and one-hot labels; misses below the visibility
    /// threshold still apply.
    pub fn noise_free() -> Self {
        Self {
            confusion_scale: 0.0,
            flip_scale: 0.0,
            blur_radius: 0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let unit = 0.0..=1.0;
        if !unit.contains(&self.visibility_threshold) {
            return Err("visibility_threshold must lie in [0, 1]".into());
        }
        if !(0.0..=0.75).contains(&self.confusion_scale) {
            return Err("confusion_scale must lie in [0, 0.75]".into());
        }
        if !unit.contains(&self.flip_scale) {
            return Err("flip_scale must lie in [0, 1]".into());
        }
        if !(self.flip_exponent > 0.0 && self.flip_exponent.is_finite()) {
            return Err("flip_exponent must be positive".into());
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err("temperature must be positive".into());
        }
        if !unit.contains(&self.confidence_threshold) {
            return Err("confidence_threshold must lie in [0, 1]".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SegmentationOracle {
    pub catalog: Catalog,
    pub noise: OracleNoiseConfig,
    confusion_sets: Vec<Vec<usize>>,
}

impl SegmentationOracle {
    pub fn new(catalog: Catalog, noise: OracleNoiseConfig) -> Self {
        let confusion_sets = (0..catalog.len())
            .map(|c| catalog.nearest_classes(c, noise.confusers))
            .collect();
        Self {
            catalog,
            noise,
            confusion_sets,
        }
    }

    pub fn num_classes(&self) -> usize {
        self.catalog.len()
    }

    pub fn segment_view(&self, scene: &SceneState, camera: &CameraModel, view: usize, seed: u64) -> SegmentationResult {
        let rendering = render_with_coverage(scene, camera);
        self.segment_rendering(&rendering, scene, view, seed)
    }

    /// Class distribution reported for an object of `true_class` seen at
    /// `visibility`, using the draw stream `(seed, key)`. The oracle keys its
    /// streams by object index.
    pub fn class_distribution(&self, true_class: usize, visibility: f64, seed: u64, key: u64) -> Vec<f64> {
        let mut rng = seed::rng(seed, &[key]);
        self.draw_distribution(true_class, visibility, &mut rng)
    }

    fn draw_distribution(&self, true_class: usize, visibility: f64, rng: &mut impl Rng) -> Vec<f64> {
        let n = self.num_classes();
        let occlusion = (1.0 - visibility).clamp(0.0, 1.0);
        let eps = self.noise.confusion_scale * occlusion;
        let confusers = &self.confusion_sets[true_class];
        // Always consume the same number of draws so streams stay aligned.
        let flip_draw: f64 = rng.gen();
        let pick = rng.gen_range(0..confusers.len().max(1));
        let flip_probability = self.noise.flip_scale * occlusion.powf(self.noise.flip_exponent);
        let reported = if !confusers.is_empty() && flip_draw < flip_probability {
            confusers[pick]
        } else {
            true_class
        };
        let mut probs = vec![0.0; n];
        let support: Vec<usize> = std::iter::once(true_class)
            .chain(confusers.iter().copied())
            .filter(|&c| c != reported)
            .collect();
        probs[reported] = 1.0 - eps;
        if !support.is_empty() {
            for &c in &support {
                probs[c] += eps / support.len() as f64;
            }
        } else {
            probs[reported] = 1.0;
        }
        if self.noise.temperature != 1.0 {
            let inv = 1.0 / self.noise.temperature;
            for p in probs.iter_mut() {
                if *p > 0.0 {
                    *p = p.powf(inv);
                }
            }
        }
        let total: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= total;
        }
        probs
    }

    pub fn segment_rendering(
        &self,
        rendering: &Rendering,
        scene: &SceneState,
        view: usize,
        seed: u64,
    ) -> SegmentationResult {
        let image = &rendering.image;
        let res = image.resolution;
        let visibility = rendering.visibility();

        // Visible-mask bounding boxes for every object in one pass.
        let mut bounds = vec![(usize::MAX, 0usize, usize::MAX, 0usize); scene.len()];
        for row in 0..res.height {
            for col in 0..res.width {
                let id = image.instance[res.index(row, col)];
                if id != BACKGROUND {
                    let b = &mut bounds[id as usize];
                    b.0 = b.0.min(row);
                    b.1 = b.1.max(row + 1);
                    b.2 = b.2.min(col);
                    b.3 = b.3.max(col + 1);
                }
            }
        }

        let r = self.noise.blur_radius;
        let mut detections = Vec::new();
        for (obj_idx, obj) in scene.objects.iter().enumerate() {
            let vis = visibility[obj_idx];
            if vis <= 0.0 || vis < self.noise.visibility_threshold {
                continue;
            }
            let mut rng = seed::rng(seed, &[obj_idx as u64]);
            let class_probs = self.draw_distribution(obj.class_id(), vis, &mut rng);
            let confidence = class_probs.iter().copied().fold(0.0, f64::max);
            if confidence < self.noise.confidence_threshold {
                continue;
            }
            let (r0, r1, c0, c1) = bounds[obj_idx];
            let bbox = PixelRect {
                row0: r0.saturating_sub(r),
                row1: (r1 + r).min(res.height),
                col0: c0.saturating_sub(r),
                col1: (c1 + r).min(res.width),
            };
            let id = obj_idx as u32;
            let is_mine = |row: isize, col: isize| -> f64 {
                if row < 0 || col < 0 || row as usize >= res.height || col as usize >= res.width {
                    return 0.0;
                }
                f64::from(u8::from(image.instance[res.index(row as usize, col as usize)] == id))
            };
            let mut foreground = Vec::with_capacity(bbox.area());
            let window = ((2 * r + 1) * (2 * r + 1)) as f64;
            for row in bbox.row0..bbox.row1 {
                for col in bbox.col0..bbox.col1 {
                    if r == 0 {
                        foreground.push(is_mine(row as isize, col as isize));
                        continue;
                    }
                    let ri = r as isize;
                    let mut hits = 0.0;
                    for dr in -ri..=ri {
                        for dc in -ri..=ri {
                            hits += is_mine(row as isize + dr, col as isize + dc);
                        }
                    }
                    foreground.push(hits / window);
                }
            }
            detections.push(Detection {
                view,
                index: detections.len(),
                bbox,
                class_probs,
                foreground,
                source_object: Some(obj_idx),
            });
        }
        SegmentationResult {
            view,
            resolution: res,
            detections,
        }
    }
}
