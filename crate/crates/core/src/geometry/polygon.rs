//! Convex polygons in the table plane (object footprints, gripper sweeps).

use serde::{Deserialize, Serialize};

pub type Vec2 = [f64; 2];

#[inline]
fn sub(a: Vec2, b: Vec2) -> Vec2 {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
fn cross(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[1] - a[1] * b[0]
}

#[inline]
pub fn dot(a: Vec2, b: Vec2) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Counter-clockwise convex polygon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon {
    pub vertices: Vec<Vec2>,
}

impl ConvexPolygon {
    /// Rectangle centered at `center` with half-extents `half` rotated by `yaw`.
    pub fn rectangle(center: Vec2, half: Vec2, yaw: f64) -> Self {
        let (s, c) = yaw.sin_cos();
        let corners = [[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]];
        Self {
            vertices: corners
                .iter()
                .map(|k| {
                    let lx = k[0] * half[0];
                    let ly = k[1] * half[1];
                    [center[0] + c * lx - s * ly, center[1] + s * lx + c * ly]
                })
                .collect(),
        }
    }

    /// Regular `sides`-gon inscribed in a circle.
    pub fn regular(center: Vec2, radius: f64, sides: usize, phase: f64) -> Self {
        Self {
            vertices: (0..sides)
                .map(|k| {
                    let a = phase + std::f64::consts::TAU * k as f64 / sides as f64;
                    [center[0] + radius * a.cos(), center[1] + radius * a.sin()]
                })
                .collect(),
        }
    }

    pub fn area(&self) -> f64 {
        let n = self.vertices.len();
        if n < 3 {
            return 0.0;
        }
        let mut twice = 0.0;
        for k in 0..n {
            twice += cross(self.vertices[k], self.vertices[(k + 1) % n]);
        }
        0.5 * twice.abs()
    }

    pub fn centroid(&self) -> Vec2 {
        let n = self.vertices.len() as f64;
        let sum = self
            .vertices
            .iter()
            .fold([0.0, 0.0], |acc, v| [acc[0] + v[0], acc[1] + v[1]]);
        [sum[0] / n, sum[1] / n]
    }

    pub fn translated(&self, by: Vec2) -> Self {
        Self {
            vertices: self
                .vertices
                .iter()
                .map(|v| [v[0] + by[0], v[1] + by[1]])
                .collect(),
        }
    }

    /// `(min, max)` corners of the bounding box.
    pub fn bounds(&self) -> (Vec2, Vec2) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for a in 0..2 {
                lo[a] = lo[a].min(v[a]);
                hi[a] = hi[a].max(v[a]);
            }
        }
        (lo, hi)
    }

    pub fn contains(&self, p: Vec2) -> bool {
        let n = self.vertices.len();
        (0..n).all(|k| {
            let a = self.vertices[k];
            let b = self.vertices[(k + 1) % n];
            cross(sub(b, a), sub(p, a)) >= 0.0
        })
    }

    /// Projection interval onto `axis`.
    pub fn project(&self, axis: Vec2) -> (f64, f64) {
        self.vertices
            .iter()
            .map(|v| dot(*v, axis))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
                (lo.min(d), hi.max(d))
            })
    }

    /// Intersection of two convex polygons (Sutherland-Hodgman).
    pub fn intersection(&self, clip: &ConvexPolygon) -> ConvexPolygon {
        let mut output = self.vertices.clone();
        let n = clip.vertices.len();
        for k in 0..n {
            if output.is_empty() {
                break;
            }
            let a = clip.vertices[k];
            let b = clip.vertices[(k + 1) % n];
            let edge = sub(b, a);
            let inside = |p: Vec2| cross(edge, sub(p, a)) >= 0.0;
            let input = std::mem::take(&mut output);
            for (idx, &cur) in input.iter().enumerate() {
                let prev = input[(idx + input.len() - 1) % input.len()];
                let (cur_in, prev_in) = (inside(cur), inside(prev));
                if cur_in != prev_in {
                    let d = sub(cur, prev);
                    let denom = cross(edge, d);
                    if denom.abs() > 0.0 {
                        let t = (cross(edge, sub(a, prev)) / denom).clamp(0.0, 1.0);
                        output.push([prev[0] + d[0] * t, prev[1] + d[1] * t]);
                    }
                }
                if cur_in {
                    output.push(cur);
                }
            }
        }
        ConvexPolygon { vertices: output }
    }

    pub fn overlap_area(&self, other: &ConvexPolygon) -> f64 {
        let (alo, ahi) = self.bounds();
        let (blo, bhi) = other.bounds();
        if alo[0] >= bhi[0] || blo[0] >= ahi[0] || alo[1] >= bhi[1] || blo[1] >= ahi[1] {
            return 0.0;
        }
        self.intersection(other).area()
    }

    fn edge_normals(&self) -> impl Iterator<Item = Vec2> + '_ {
        let n = self.vertices.len();
        (0..n).filter_map(move |k| {
            let e = sub(self.vertices[(k + 1) % n], self.vertices[k]);
            let len = (e[0] * e[0] + e[1] * e[1]).sqrt();
            (len > 0.0).then(|| [e[1] / len, -e[0] / len])
        })
    }

    /// Smallest `t >= 0` such that `other` translated by `t * dir` no longer
    /// overlaps `self` (touching counts as separated). `None` if no such `t`
    /// exists along `dir`.
    pub fn separation_along(&self, other: &ConvexPolygon, dir: Vec2) -> Option<f64> {
        let mut best: Option<f64> = None;
        for axis in self.edge_normals().chain(other.edge_normals()) {
            let (amin, amax) = self.project(axis);
            let (bmin, bmax) = other.project(axis);
            let rate = dot(axis, dir);
            let t = if bmin >= amax || bmax <= amin {
                0.0
            } else if rate > 1e-12 {
                (amax - bmin) / rate
            } else if rate < -1e-12 {
                (amin - bmax) / rate
            } else {
                continue;
            };
            best = Some(best.map_or(t, |b: f64| b.min(t)));
        }
        best
    }

    /// Minimum translation for `other` that separates it from `self`.
    pub fn minimum_translation(&self, other: &ConvexPolygon) -> Vec2 {
        let mut best = f64::INFINITY;
        let mut best_vec = [0.0, 0.0];
        for axis in self.edge_normals().chain(other.edge_normals()) {
            let (amin, amax) = self.project(axis);
            let (bmin, bmax) = other.project(axis);
            if bmin >= amax || bmax <= amin {
                return [0.0, 0.0];
            }
            // Push `other` toward whichever side needs less travel.
            let forward = amax - bmin;
            let backward = bmax - amin;
            let (depth, sign) = if forward <= backward {
                (forward, 1.0)
            } else {
                (backward, -1.0)
            };
            if depth < best {
                best = depth;
                best_vec = [axis[0] * depth * sign, axis[1] * depth * sign];
            }
        }
        best_vec
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rectangle_area_and_overlap() {
        let a = ConvexPolygon::rectangle([0.0, 0.0], [0.05, 0.05], 0.0);
        assert!((a.area() - 0.01).abs() < 1e-15);
        let b = ConvexPolygon::rectangle([0.05, 0.0], [0.05, 0.05], 0.0);
        assert!((a.overlap_area(&b) - 0.005).abs() < 1e-12);
        let rotated = ConvexPolygon::rectangle([0.0, 0.0], [0.05, 0.05], 0.7);
        assert!((rotated.area() - 0.01).abs() < 1e-12);
        assert!((a.overlap_area(&a) - 0.01).abs() < 1e-12);
        let far = ConvexPolygon::rectangle([1.0, 0.0], [0.05, 0.05], 0.3);
        assert_eq!(a.overlap_area(&far), 0.0);
    }

    #[test]
    fn overlap_matches_sampling() {
        let a = ConvexPolygon::rectangle([0.0, 0.0], [0.08, 0.03], 0.4);
        let b = ConvexPolygon::regular([0.03, 0.02], 0.05, 24, 0.0);
        let n = 400;
        let mut hits = 0;
        for i in 0..n {
            for j in 0..n {
                let p = [-0.1 + 0.2 * (i as f64 + 0.5) / n as f64, -0.1 + 0.2 * (j as f64 + 0.5) / n as f64];
                if a.contains(p) && b.contains(p) {
                    hits += 1;
                }
            }
        }
        let sampled = hits as f64 * (0.2 / n as f64).powi(2);
        assert!((a.overlap_area(&b) - sampled).abs() < 2e-5, "{} vs {sampled}", a.overlap_area(&b));
    }

    #[test]
    fn separation_along_direction() {
        let a = ConvexPolygon::rectangle([0.0, 0.0], [0.05, 0.05], 0.0);
        let b = ConvexPolygon::rectangle([0.08, 0.0], [0.05, 0.05], 0.0);
        let t = a.separation_along(&b, [1.0, 0.0]).unwrap();
        assert!((t - 0.02).abs() < 1e-12);
        let moved = b.translated([t, 0.0]);
        assert!(a.overlap_area(&moved) < 1e-12);
        let mtv = a.minimum_translation(&b);
        assert!((mtv[0] - 0.02).abs() < 1e-12 && mtv[1].abs() < 1e-12);
    }
}
