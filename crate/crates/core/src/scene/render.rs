//! Analytic ray casting of the scene into depth and instance images.

use nalgebra::{Point3, Vector3};

use super::{PlacedObject, SceneState, Shape};
use crate::geometry::{CameraModel, PixelRay, Resolution};

/// Instance id of pixels that see the table (or nothing).
pub const BACKGROUND: u32 = u32::MAX;

/// Per-pixel camera depth (m) and ground-truth instance id. Pixels whose ray
/// never meets the table plane carry `f64::INFINITY`.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub resolution: Resolution,
    pub depth: Vec<f64>,
    pub instance: Vec<u32>,
}

impl DepthImage {
    pub fn depth_at(&self, row: usize, col: usize) -> f64 {
        self.depth[self.resolution.index(row, col)]
    }

    pub fn instance_at(&self, row: usize, col: usize) -> Option<usize> {
        match self.instance[self.resolution.index(row, col)] {
            BACKGROUND => None,
            id => Some(id as usize),
        }
    }

    pub fn is_valid(&self, index: usize) -> bool {
        let d = self.depth[index];
        d.is_finite() && d > 0.0
    }
}

/// A render plus, per object, the number of pixels it would cover if it were
/// alone in the scene.
#[derive(Debug, Clone)]
pub struct Rendering {
    pub image: DepthImage,
    pub coverage: Vec<usize>,
}

impl Rendering {
    pub fn visible_pixels(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.coverage.len()];
        for &id in &self.image.instance {
            if id != BACKGROUND {
                counts[id as usize] += 1;
            }
        }
        counts
    }

    /// Visible fraction per object: 0 for objects not in view at all.
    pub fn visibility(&self) -> Vec<f64> {
        self.visible_pixels()
            .into_iter()
            .zip(&self.coverage)
            .map(|(v, &c)| if c == 0 { 0.0 } else { v as f64 / c as f64 })
            .collect()
    }
}

/// Entry depth of `ray` into the object, if it hits.
pub(crate) fn intersect(obj: &PlacedObject, ray: &PixelRay) -> Option<f64> {
    let (s, c) = obj.pose.yaw.sin_cos();
    // World -> object frame (origin at base center, yaw removed).
    let ox = ray.origin.x - obj.pose.x;
    let oy = ray.origin.y - obj.pose.y;
    let o = Vector3::new(c * ox + s * oy, -s * ox + c * oy, ray.origin.z - obj.pose.z_base);
    let d = Vector3::new(
        c * ray.direction.x + s * ray.direction.y,
        -s * ray.direction.x + c * ray.direction.y,
        ray.direction.z,
    );
    match obj.spec.shape {
        Shape::Box {
            length,
            width,
            height,
        } => slab(&o, &d, [length / 2.0, width / 2.0], height),
        Shape::Cylinder { diameter, height } => cylinder(&o, &d, diameter / 2.0, height),
    }
}

fn slab(o: &Vector3<f64>, d: &Vector3<f64>, half: [f64; 2], height: f64) -> Option<f64> {
    let lo = [-half[0], -half[1], 0.0];
    let hi = [half[0], half[1], height];
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for a in 0..3 {
        if d[a].abs() < 1e-15 {
            if o[a] < lo[a] || o[a] > hi[a] {
                return None;
            }
            continue;
        }
        let inv = 1.0 / d[a];
        let (mut ta, mut tb) = ((lo[a] - o[a]) * inv, (hi[a] - o[a]) * inv);
        if ta > tb {
            std::mem::swap(&mut ta, &mut tb);
        }
        t0 = t0.max(ta);
        t1 = t1.min(tb);
        if t0 > t1 {
            return None;
        }
    }
    (t0 > 0.0).then_some(t0)
}

fn cylinder(o: &Vector3<f64>, d: &Vector3<f64>, radius: f64, height: f64) -> Option<f64> {
    // Interval of t inside the infinite cylinder.
    let a = d.x * d.x + d.y * d.y;
    let b = 2.0 * (o.x * d.x + o.y * d.y);
    let c = o.x * o.x + o.y * o.y - radius * radius;
    let (mut t0, mut t1) = if a < 1e-18 {
        if c > 0.0 {
            return None;
        }
        (f64::NEG_INFINITY, f64::INFINITY)
    } else {
        let disc = b * b - 4.0 * a * c;
        if disc < 0.0 {
            return None;
        }
        let sq = disc.sqrt();
        ((-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a))
    };
    // Clip against the slab 0 <= z <= height.
    if d.z.abs() < 1e-15 {
        if o.z < 0.0 || o.z > height {
            return None;
        }
    } else {
        let (mut za, mut zb) = (-o.z / d.z, (height - o.z) / d.z);
        if za > zb {
            std::mem::swap(&mut za, &mut zb);
        }
        t0 = t0.max(za);
        t1 = t1.min(zb);
    }
    (t0 <= t1 && t0 > 0.0).then_some(t0)
}

/// Pixel rectangle `(row0, row1, col0, col1)` (half-open) that can contain
/// the object's image.
fn pixel_bounds(obj: &PlacedObject, camera: &CameraModel) -> (usize, usize, usize, usize) {
    let res = camera.resolution;
    let full = (0, res.height, 0, res.width);
    let r = obj.spec.shape.footprint_radius();
    let (mut umin, mut umax, mut vmin, mut vmax) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &z in &[obj.pose.z_base, obj.top()] {
        for &(sx, sy) in &[(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)] {
            let corner = Point3::new(obj.pose.x + sx * r, obj.pose.y + sy * r, z);
            let Some((u, v, _)) = camera.project(&corner) else {
                return full;
            };
            umin = umin.min(u);
            umax = umax.max(u);
            vmin = vmin.min(v);
            vmax = vmax.max(v);
        }
    }
    let clamp = |x: f64, n: usize| x.max(0.0).min(n as f64) as usize;
    (
        clamp(vmin.floor() - 1.0, res.height),
        clamp(vmax.ceil() + 1.0, res.height),
        clamp(umin.floor() - 1.0, res.width),
        clamp(umax.ceil() + 1.0, res.width),
    )
}

/// Renders the scene and counts each object's stand-alone coverage.
pub fn render_with_coverage(scene: &SceneState, camera: &CameraModel) -> Rendering {
    let res = camera.resolution;
    let mut depth = vec![f64::INFINITY; res.pixel_count()];
    let mut instance = vec![BACKGROUND; res.pixel_count()];
    for row in 0..res.height {
        for col in 0..res.width {
            let ray = camera.pixel_ray(row, col);
            if ray.direction.z < 0.0 {
                let t = -ray.origin.z / ray.direction.z;
                if t > 0.0 {
                    depth[res.index(row, col)] = t;
                }
            }
        }
    }
    let mut coverage = vec![0usize; scene.objects.len()];
    for (id, obj) in scene.objects.iter().enumerate() {
        let (r0, r1, c0, c1) = pixel_bounds(obj, camera);
        for row in r0..r1 {
            for col in c0..c1 {
                let ray = camera.pixel_ray(row, col);
                if let Some(t) = intersect(obj, &ray) {
                    coverage[id] += 1;
                    let idx = res.index(row, col);
                    if t < depth[idx] {
                        depth[idx] = t;
                        instance[idx] = id as u32;
                    }
                }
            }
        }
    }
    Rendering {
        image: DepthImage {
            resolution: res,
            depth,
            instance,
        },
        coverage,
    }
}

pub fn render_depth(scene: &SceneState, camera: &CameraModel) -> DepthImage {
    render_with_coverage(scene, camera).image
}

/// Fraction of the object's stand-alone pixels where it is the nearest hit.
pub fn visibility_ratio(scene: &SceneState, camera: &CameraModel, object_index: usize) -> f64 {
    render_with_coverage(scene, camera).visibility()[object_index]
}
