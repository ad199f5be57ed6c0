//! Ground-truth tabletop world: posed primitives, procedural clutter,
//! analytic depth rendering and the overhead height map.

mod catalog;
mod heightmap;
mod io;
mod render;

pub use catalog::{Catalog, ObjectSpec, Shape, MAX_DIMENSION, MIN_DIMENSION};
pub use heightmap::{height_map, HeightMap};
pub use render::{
    render_depth, render_with_coverage, visibility_ratio, DepthImage, Rendering, BACKGROUND,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{ConvexPolygon, Vec2, WorkspaceGrid};
use crate::seed;

/// Sides of the polygon standing in for a cylinder footprint in area tests.
pub const CYLINDER_SIDES: usize = 32;

/// Tolerance for "rests on" comparisons between tops and bases (m).
pub const SUPPORT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    pub z_base: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedObject {
    pub spec: ObjectSpec,
    pub pose: Pose,
}

impl PlacedObject {
    pub fn class_id(&self) -> usize {
        self.spec.class_id
    }

    pub fn height(&self) -> f64 {
        self.spec.shape.height()
    }

    pub fn top(&self) -> f64 {
        self.pose.z_base + self.height()
    }

    pub fn footprint(&self) -> ConvexPolygon {
        let c = [self.pose.x, self.pose.y];
        match self.spec.shape {
            Shape::Box { length, width, .. } => {
                ConvexPolygon::rectangle(c, [length / 2.0, width / 2.0], self.pose.yaw)
            }
            Shape::Cylinder { diameter, .. } => {
                ConvexPolygon::regular(c, diameter / 2.0, CYLINDER_SIDES, self.pose.yaw)
            }
        }
    }

    /// True when the vertical extents overlap by more than the tolerance.
    pub fn vertically_overlaps(&self, other: &PlacedObject) -> bool {
        self.pose.z_base < other.top() - SUPPORT_TOL && other.pose.z_base < self.top() - SUPPORT_TOL
    }

    /// Whether (x, y, z) lies inside the solid.
    pub fn contains(&self, x: f64, y: f64, z: f64) -> bool {
        if z < self.pose.z_base || z > self.top() {
            return false;
        }
        let (s, c) = self.pose.yaw.sin_cos();
        let dx = x - self.pose.x;
        let dy = y - self.pose.y;
        let lx = c * dx + s * dy;
        let ly = -s * dx + c * dy;
        match self.spec.shape {
            Shape::Box { length, width, .. } => lx.abs() <= length / 2.0 && ly.abs() <= width / 2.0,
            Shape::Cylinder { diameter, .. } => lx * lx + ly * ly <= diameter * diameter / 4.0,
        }
    }
}

/// Axis-aligned table rectangle in world meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workspace {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Default for Workspace {
    fn default() -> Self {
        Self::from_grid(&WorkspaceGrid::default())
    }
}

impl Workspace {
    pub fn from_grid(grid: &WorkspaceGrid) -> Self {
        Self {
            min: grid.origin,
            max: grid.max_corner(),
        }
    }

    pub fn center(&self) -> Vec2 {
        [
            0.5 * (self.min[0] + self.max[0]),
            0.5 * (self.min[1] + self.max[1]),
        ]
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p[0] >= self.min[0] && p[0] <= self.max[0] && p[1] >= self.min[1] && p[1] <= self.max[1]
    }

    pub fn polygon(&self) -> ConvexPolygon {
        let c = self.center();
        ConvexPolygon::rectangle(
            c,
            [
                0.5 * (self.max[0] - self.min[0]),
                0.5 * (self.max[1] - self.min[1]),
            ],
            0.0,
        )
    }

    /// Translation that brings `footprint` fully inside the table (zero when
    /// already inside).
    pub fn clamp_offset(&self, footprint: &ConvexPolygon) -> Vec2 {
        let (lo, hi) = footprint.bounds();
        let mut offset = [0.0, 0.0];
        for a in 0..2 {
            if lo[a] < self.min[a] {
                offset[a] = self.min[a] - lo[a];
            } else if hi[a] > self.max[a] {
                offset[a] = self.max[a] - hi[a];
            }
        }
        offset
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneState {
    pub seed: u64,
    pub workspace: Workspace,
    pub objects: Vec<PlacedObject>,
}

impl SceneState {
    pub fn empty(workspace: Workspace) -> Self {
        Self {
            seed: 0,
            workspace,
            objects: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.objects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objects.is_empty()
    }

    pub fn tallest_top(&self) -> f64 {
        self.objects.iter().map(PlacedObject::top).fold(0.0, f64::max)
    }

    /// Ground-truth class histogram.
    pub fn class_counts(&self) -> std::collections::BTreeMap<usize, usize> {
        let mut counts = std::collections::BTreeMap::new();
        for o in &self.objects {
            *counts.entry(o.class_id()).or_insert(0) += 1;
        }
        counts
    }

    /// Index of an object that carries `idx` (its top equals `idx`'s base and
    /// the footprints overlap), if any.
    pub fn support_of(&self, idx: usize) -> Option<usize> {
        let obj = &self.objects[idx];
        if obj.pose.z_base <= SUPPORT_TOL {
            return None;
        }
        let fp = obj.footprint();
        self.objects.iter().enumerate().position(|(k, other)| {
            k != idx
                && (other.top() - obj.pose.z_base).abs() <= SUPPORT_TOL
                && other.footprint().overlap_area(&fp) > 0.0
        })
    }

    /// Checks the structural invariants: non-negative bases, every footprint
    /// touching the table and every elevated object resting on something.
    pub fn check_invariants(&self) -> Result<(), String> {
        let table = self.workspace.polygon();
        for (idx, obj) in self.objects.iter().enumerate() {
            if obj.pose.z_base < 0.0 {
                return Err(format!("object {idx} below the table"));
            }
            if obj.footprint().overlap_area(&table) <= 0.0 {
                return Err(format!("object {idx} outside the workspace"));
            }
            if obj.pose.z_base > SUPPORT_TOL && self.support_of(idx).is_none() {
                return Err(format!("object {idx} floats at z = {}", obj.pose.z_base));
            }
        }
        Ok(())
    }
}

/// Procedural clutter parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    pub n_objects: usize,
    /// Side of the square drop region centered on the workspace (m).
    pub drop_region: f64,
    /// Fraction of the new footprint that must overlap an existing object
    /// for the new object to be stacked on top.
    pub stack_overlap: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            n_objects: 10,
            drop_region: 0.8,
            stack_overlap: 0.3,
        }
    }
}

impl SceneConfig {
    pub fn with_objects(n_objects: usize) -> Self {
        Self {
            n_objects,
            ..Self::default()
        }
    }

    /// Twenty objects squeezed into a 0.5 m square.
    pub fn dense() -> Self {
        Self {
            n_objects: 20,
            drop_region: 0.5,
            ..Self::default()
        }
    }
}

const NUDGE_ITERATIONS: usize = 20;

/// Drops `config.n_objects` random catalog objects one after the other.
///
/// Each drop samples a uniform pose in the central region. A footprint that
/// covers at least `stack_overlap` of its area over existing objects lands on
/// the highest of them; otherwise it rests on the table and is nudged out of
/// any partial overlaps (falling back to stacking if nudging fails).
pub fn generate_random_scene(
    config: &SceneConfig,
    catalog: &Catalog,
    workspace: Workspace,
    seed: u64,
) -> SceneState {
    let mut rng = seed::rng(seed, &[seed::stream::SCENE]);
    let center = workspace.center();
    let half = config.drop_region / 2.0;
    let mut scene = SceneState {
        seed,
        workspace,
        objects: Vec::with_capacity(config.n_objects),
    };
    for _ in 0..config.n_objects {
        let class = rng.gen_range(0..catalog.len());
        let spec = catalog.get(class).expect("class in range").clone();
        let pose = Pose {
            x: center[0] + rng.gen_range(-half..half),
            y: center[1] + rng.gen_range(-half..half),
            yaw: rng.gen_range(0.0..std::f64::consts::PI),
            z_base: 0.0,
        };
        let mut obj = PlacedObject { spec, pose };
        place(&mut obj, &scene.objects, config.stack_overlap, &workspace);
        scene.objects.push(obj);
    }
    scene
}

fn overlap_fractions(obj: &PlacedObject, others: &[PlacedObject]) -> Vec<f64> {
    let fp = obj.footprint();
    let area = fp.area();
    others
        .iter()
        .map(|o| o.footprint().overlap_area(&fp) / area)
        .collect()
}

/// Highest top among objects whose footprint overlaps `obj`.
fn landing_height(obj: &PlacedObject, others: &[PlacedObject]) -> f64 {
    overlap_fractions(obj, others)
        .iter()
        .zip(others)
        .filter(|(f, _)| **f > 0.0)
        .map(|(_, o)| o.top())
        .fold(0.0, f64::max)
}

fn place(obj: &mut PlacedObject, others: &[PlacedObject], stack_overlap: f64, ws: &Workspace) {
    let off = ws.clamp_offset(&obj.footprint());
    obj.pose.x += off[0];
    obj.pose.y += off[1];

    let fractions = overlap_fractions(obj, others);
    if fractions.iter().any(|&f| f >= stack_overlap) {
        obj.pose.z_base = landing_height(obj, others);
        return;
    }
    obj.pose.z_base = 0.0;
    let start = obj.pose;
    for _ in 0..NUDGE_ITERATIONS {
        let fp = obj.footprint();
        let blocker = others
            .iter()
            .find(|o| o.vertically_overlaps(obj) && o.footprint().overlap_area(&fp) > 1e-12);
        let Some(blocker) = blocker else {
            return;
        };
        let mtv = blocker.footprint().minimum_translation(&fp);
        // Small overshoot so the contact is not re-detected as overlap.
        obj.pose.x += mtv[0] * 1.001;
        obj.pose.y += mtv[1] * 1.001;
        let off = ws.clamp_offset(&obj.footprint());
        obj.pose.x += off[0];
        obj.pose.y += off[1];
    }
    let fp = obj.footprint();
    if others
        .iter()
        .any(|o| o.vertically_overlaps(obj) && o.footprint().overlap_area(&fp) > 1e-12)
    {
        obj.pose = start;
        obj.pose.z_base = landing_height(obj, others);
    }
}
