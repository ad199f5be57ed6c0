//! Quasi-static push simulation on the 2.5D scene.
//!
//! The gripper is a square of side `sweep_width` swept from `start` along
//! `direction`. Objects it touches slide forward until they clear the swept
//! band, collisions are relaxed iteratively and unsupported objects drop.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{dot, ConvexPolygon, Vec2};
use crate::scene::{PlacedObject, SceneState, Workspace, SUPPORT_TOL};
use crate::seed;

pub const GRIPPER_WIDTH: f64 = 0.024;
pub const SWEEP_HEIGHT: f64 = 0.05;
/// Maximum yaw perturbation of a contacted object, radians.
pub const YAW_JITTER: f64 = 5.0 * std::f64::consts::PI / 180.0;
pub const MAX_RELAX_ITERATIONS: usize = 50;
/// Fraction of an elevated footprint that must stay supported.
pub const SUPPORT_FRACTION: f64 = 0.3;
/// Largest residual penetration accepted after relaxation.
pub const RESIDUAL_TOLERANCE: f64 = 1e-3;

const OVERLAP_EPS: f64 = 1e-10;
/// Along-push separations longer than this fall back to the minimum
/// translation instead of shoving the object far ahead.
const MAX_CHAIN_STEP: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PushAction {
    pub start: Vec2,
    /// Unit vector in the table plane.
    pub direction: Vec2,
    pub distance: f64,
    pub sweep_width: f64,
    pub sweep_height: f64,
}

impl PushAction {
    /// Push with the default gripper; `direction` is normalized.
    pub fn new(start: Vec2, direction: Vec2, distance: f64) -> Result<Self> {
        let norm = direction[0].hypot(direction[1]);
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidPush(format!("direction {direction:?} has no length")));
        }
        let push = Self {
            start,
            direction: [direction[0] / norm, direction[1] / norm],
            distance,
            sweep_width: GRIPPER_WIDTH,
            sweep_height: SWEEP_HEIGHT,
        };
        push.check_shape()?;
        Ok(push)
    }

    fn check_shape(&self) -> Result<()> {
        let norm = self.direction[0].hypot(self.direction[1]);
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidPush(format!("direction norm {norm}")));
        }
        if !(self.distance > 0.0 && self.distance.is_finite()) {
            return Err(Error::InvalidPush(format!("distance {}", self.distance)));
        }
        if !(self.sweep_width > 0.0 && self.sweep_height > 0.0) {
            return Err(Error::InvalidPush("gripper must have positive size".into()));
        }
        Ok(())
    }

    pub fn validate(&self, workspace: &Workspace) -> Result<()> {
        self.check_shape()?;
        if !workspace.contains(self.start) {
            return Err(Error::InvalidPush(format!("start {:?} outside the workspace", self.start)));
        }
        Ok(())
    }

    pub fn end(&self) -> Vec2 {
        [
            self.start[0] + self.direction[0] * self.distance,
            self.start[1] + self.direction[1] * self.distance,
        ]
    }

    pub fn yaw(&self) -> f64 {
        self.direction[1].atan2(self.direction[0])
    }

    /// Area covered by the gripper over the whole stroke.
    pub fn swept_region(&self) -> ConvexPolygon {
        let mid = [
            self.start[0] + self.direction[0] * self.distance / 2.0,
            self.start[1] + self.direction[1] * self.distance / 2.0,
        ];
        let half = [(self.distance + self.sweep_width) / 2.0, self.sweep_width / 2.0];
        ConvexPolygon::rectangle(mid, half, self.yaw())
    }
}

/// Result of a simulated push with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PushOutcome {
    pub scene: SceneState,
    /// Objects touched directly by the gripper.
    pub contacted: Vec<usize>,
    /// Objects whose pose changed at all.
    pub moved: Vec<usize>,
    pub converged: bool,
    /// Deepest remaining penetration between solids, meters.
    pub residual: f64,
}

/// Executes `push` and returns the settled scene.
pub fn apply_push(scene: &SceneState, push: &PushAction, seed: u64) -> Result<SceneState> {
    simulate_push(scene, push, seed).map(|o| o.scene)
}

pub fn simulate_push(scene: &SceneState, push: &PushAction, seed: u64) -> Result<PushOutcome> {
    push.validate(&scene.workspace)?;
    let mut objects = scene.objects.clone();
    let swept = push.swept_region();
    let dir = push.direction;

    let contacted: Vec<usize> = objects
        .iter()
        .enumerate()
        .filter(|(_, o)| o.pose.z_base < push.sweep_height && o.footprint().overlap_area(&swept) > OVERLAP_EPS)
        .map(|(k, _)| k)
        .collect();

    let mut driven = vec![false; objects.len()];
    for &k in &contacted {
        let obj = &mut objects[k];
        let t = swept.separation_along(&obj.footprint(), dir).unwrap_or(0.0);
        shift(obj, [dir[0] * t, dir[1] * t]);
        let mut rng = seed::rng(seed, &[seed::stream::PUSH, k as u64]);
        obj.pose.yaw += rng.gen_range(-YAW_JITTER..=YAW_JITTER);
        driven[k] = true;
    }

    // Elevated objects whose support may have changed.
    let mut affected: Vec<bool> = (0..objects.len())
        .map(|k| {
            objects[k].pose.z_base > SUPPORT_TOL
                && contacted.iter().any(|&c| {
                    c != k
                        && scene.objects[c].top() <= scene.objects[k].pose.z_base + SUPPORT_TOL
                        && scene.objects[c].footprint().overlap_area(&scene.objects[k].footprint()) > 0.0
                })
        })
        .collect();

    let mut converged = false;
    if !contacted.is_empty() {
        for iteration in 0..MAX_RELAX_ITERATIONS {
            clamp_all(&mut objects, &scene.workspace, &mut driven);
            let along = iteration < MAX_RELAX_ITERATIONS / 2;
            let separated = relax_once(&mut objects, &mut driven, dir, along);
            let fell = settle(&mut objects, &mut affected, &driven);
            if !separated && !fell && all_inside(&objects, &scene.workspace) {
                converged = true;
                break;
            }
        }
    } else {
        converged = true;
    }

    let residual = max_penetration(&objects);
    if !converged && residual > RESIDUAL_TOLERANCE {
        log::warn!(
            "degenerate push from {:?}: {:.4} m penetration left after {} iterations",
            push.start,
            residual,
            MAX_RELAX_ITERATIONS
        );
    }
    let moved = objects
        .iter()
        .zip(&scene.objects)
        .enumerate()
        .filter(|(_, (a, b))| a.pose != b.pose)
        .map(|(k, _)| k)
        .collect();
    Ok(PushOutcome {
        scene: SceneState {
            seed: scene.seed,
            workspace: scene.workspace,
            objects,
        },
        contacted,
        moved,
        converged,
        residual,
    })
}

fn shift(obj: &mut PlacedObject, by: Vec2) {
    obj.pose.x += by[0];
    obj.pose.y += by[1];
}

fn clamp_all(objects: &mut [PlacedObject], ws: &Workspace, driven: &mut [bool]) {
    for (k, obj) in objects.iter_mut().enumerate() {
        let off = ws.clamp_offset(&obj.footprint());
        if off != [0.0, 0.0] {
            shift(obj, off);
            driven[k] = true;
        }
    }
}

fn all_inside(objects: &[PlacedObject], ws: &Workspace) -> bool {
    objects.iter().all(|o| ws.clamp_offset(&o.footprint()) == [0.0, 0.0])
}

fn interpenetrate(a: &PlacedObject, b: &PlacedObject) -> bool {
    a.vertically_overlaps(b) && a.footprint().overlap_area(&b.footprint()) > OVERLAP_EPS
}

/// One sweep over all pairs. Returns whether anything was moved.
fn relax_once(objects: &mut [PlacedObject], driven: &mut [bool], dir: Vec2, along: bool) -> bool {
    let mut changed = false;
    for a in 0..objects.len() {
        for b in a + 1..objects.len() {
            if !interpenetrate(&objects[a], &objects[b]) {
                continue;
            }
            // The object further along the push gives way, unless only one
            // of them is being driven, in which case the other yields.
            let ahead = |k: usize| dot(objects[k].footprint().centroid(), dir);
            let (pusher, yielder) = match (driven[a], driven[b]) {
                (true, false) => (a, b),
                (false, true) => (b, a),
                _ if ahead(b) >= ahead(a) => (a, b),
                _ => (b, a),
            };
            let fixed = objects[pusher].footprint();
            let moving = objects[yielder].footprint();
            let mtv = fixed.minimum_translation(&moving);
            let step = match fixed.separation_along(&moving, dir) {
                Some(t) if along && t <= MAX_CHAIN_STEP => [dir[0] * t, dir[1] * t],
                _ => mtv,
            };
            let scale = 1.001;
            let pad = [dir[0] * 1e-7, dir[1] * 1e-7];
            let by = if step == mtv {
                [mtv[0] * scale, mtv[1] * scale]
            } else {
                [step[0] * scale + pad[0], step[1] * scale + pad[1]]
            };
            shift(&mut objects[yielder], by);
            driven[yielder] = true;
            changed = true;
        }
    }
    changed
}

/// Drops elevated objects that lost their support. Returns whether any fell.
fn settle(objects: &mut [PlacedObject], affected: &mut [bool], driven: &[bool]) -> bool {
    let mut fell = false;
    for k in 0..objects.len() {
        let elevated = objects[k].pose.z_base > SUPPORT_TOL;
        if !elevated || !(affected[k] || driven[k]) {
            continue;
        }
        let fp = objects[k].footprint();
        let area = fp.area();
        let base = objects[k].pose.z_base;
        let fraction = |o: &PlacedObject| o.footprint().overlap_area(&fp) / area;
        let supported = objects
            .iter()
            .enumerate()
            .any(|(m, o)| m != k && (o.top() - base).abs() <= SUPPORT_TOL && fraction(o) >= SUPPORT_FRACTION);
        if supported {
            continue;
        }
        let landing = objects
            .iter()
            .enumerate()
            .filter(|(m, o)| *m != k && o.top() <= base + SUPPORT_TOL && fraction(o) >= SUPPORT_FRACTION)
            .map(|(_, o)| o.top())
            .fold(0.0, f64::max);
        objects[k].pose.z_base = landing;
        fell = true;
        // Anything resting on the fallen object must be re-checked.
        for (m, o) in objects.iter().enumerate() {
            if m != k && o.pose.z_base >= base + objects[k].height() - SUPPORT_TOL && o.footprint().overlap_area(&fp) > 0.0 {
                affected[m] = true;
            }
        }
    }
    fell
}

/// Largest minimum-translation length over interpenetrating pairs.
pub fn max_penetration(objects: &[PlacedObject]) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, a) in objects.iter().enumerate() {
        for b in &objects[i + 1..] {
            if interpenetrate(a, b) {
                let m = a.footprint().minimum_translation(&b.footprint());
                worst = worst.max(m[0].hypot(m[1]));
            }
        }
    }
    worst
}
