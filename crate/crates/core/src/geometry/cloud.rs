//! World-frame point sets: voxel downsampling and the Chamfer distance used
//! as the cross-view merge gate.

use std::collections::HashMap;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Where a point came from: the view index and the flat pixel index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointSource {
    pub view: usize,
    pub pixel: usize,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Point3<f64>>,
    /// Parallel to `points` when present.
    pub sources: Option<Vec<PointSource>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3<f64>>) -> Self {
        Self {
            points,
            sources: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Appends `other`. Provenance survives only if both sides carry it.
    pub fn extend(&mut self, other: &PointCloud) {
        match (&mut self.sources, &other.sources) {
            (Some(mine), Some(theirs)) => mine.extend_from_slice(theirs),
            (sources, _) => *sources = None,
        }
        self.points.extend_from_slice(&other.points);
    }

    /// Replaces the points falling in each `voxel`-sized cube by their
    /// centroid. Output order follows the first point seen in each voxel.
    pub fn voxel_downsample(&self, voxel: f64) -> PointCloud {
        let mut slots: HashMap<[i64; 3], usize> = HashMap::with_capacity(self.points.len() / 2);
        let mut acc: Vec<([f64; 3], usize)> = Vec::new();
        for p in &self.points {
            let key = [
                (p.x / voxel).floor() as i64,
                (p.y / voxel).floor() as i64,
                (p.z / voxel).floor() as i64,
            ];
            let slot = *slots.entry(key).or_insert_with(|| {
                acc.push(([0.0; 3], 0));
                acc.len() - 1
            });
            let (sum, n) = &mut acc[slot];
            sum[0] += p.x;
            sum[1] += p.y;
            sum[2] += p.z;
            *n += 1;
        }
        PointCloud::new(
            acc.into_iter()
                .map(|(s, n)| {
                    let n = n as f64;
                    Point3::new(s[0] / n, s[1] / n, s[2] / n)
                })
                .collect(),
        )
    }

    /// Axis-aligned bounds `(min, max)`; `None` for an empty cloud.
    pub fn bounds(&self) -> Option<([f64; 3], [f64; 3])> {
        let first = self.points.first()?;
        let mut lo = [first.x, first.y, first.z];
        let mut hi = lo;
        for p in &self.points[1..] {
            for (axis, v) in [p.x, p.y, p.z].into_iter().enumerate() {
                lo[axis] = lo[axis].min(v);
                hi[axis] = hi[axis].max(v);
            }
        }
        Some((lo, hi))
    }
}

#[inline]
pub(crate) fn squared_distance(a: &Point3<f64>, b: &Point3<f64>) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

/// Uniform hash grid over a point set for exact nearest-neighbor queries.
pub struct NearestNeighbors<'a> {
    points: &'a [Point3<f64>],
    cell: f64,
    buckets: HashMap<[i64; 3], Vec<u32>>,
}

/// Rings searched before falling back to a linear scan.
const MAX_RINGS: i64 = 3;

impl<'a> NearestNeighbors<'a> {
    pub fn new(points: &'a [Point3<f64>], cell: f64) -> Self {
        let mut buckets: HashMap<[i64; 3], Vec<u32>> = HashMap::new();
        for (idx, p) in points.iter().enumerate() {
            buckets.entry(Self::key(p, cell)).or_default().push(idx as u32);
        }
        Self {
            points,
            cell,
            buckets,
        }
    }

    #[inline]
    fn key(p: &Point3<f64>, cell: f64) -> [i64; 3] {
        [
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        ]
    }

    /// Smallest squared distance from `query` to the set. The value is the
    /// same float a linear scan produces: only the candidate set is pruned.
    pub fn nearest_squared(&self, query: &Point3<f64>) -> f64 {
        let center = Self::key(query, self.cell);
        let mut best = f64::INFINITY;
        for ring in 0..=MAX_RINGS {
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    for dz in -ring..=ring {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != ring {
                            continue;
                        }
                        let key = [center[0] + dx, center[1] + dy, center[2] + dz];
                        if let Some(bucket) = self.buckets.get(&key) {
                            for &idx in bucket {
                                best = best.min(squared_distance(query, &self.points[idx as usize]));
                            }
                        }
                    }
                }
            }
            // Anything outside rings 0..=ring is at least ring * cell away.
            let reach = ring as f64 * self.cell;
            if best <= reach * reach {
                return best;
            }
        }
        self.points
            .iter()
            .map(|p| squared_distance(query, p))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Hash cell edge used by [`chamfer_distance`].
pub const NN_CELL: f64 = 0.01;

/// Symmetric Chamfer distance in m^2: the average of the two directed means of
/// squared nearest-neighbor distances.
pub fn chamfer_distance(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    Ok(0.5 * (directed_mean(&a.points, &b.points) + directed_mean(&b.points, &a.points)))
}

fn directed_mean(from: &[Point3<f64>], to: &[Point3<f64>]) -> f64 {
    let index = NearestNeighbors::new(to, NN_CELL);
    let total: f64 = from.iter().map(|p| index.nearest_squared(p)).sum();
    total / from.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(a: &PointCloud, b: &PointCloud) -> f64 {
        let directed = |x: &[Point3<f64>], y: &[Point3<f64>]| {
            let mut total = 0.0;
            for p in x {
                let mut best = f64::INFINITY;
                for q in y {
                    let d = (p.x - q.x).powi(2) + (p.y - q.y).powi(2) + (p.z - q.z).powi(2);
                    if d < best {
                        best = d;
                    }
                }
                total += best;
            }
            total / x.len() as f64
        };
        0.5 * (directed(&a.points, &b.points) + directed(&b.points, &a.points))
    }

    fn random_cloud(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> PointCloud {
        PointCloud::new(
            (0..n)
                .map(|_| {
                    Point3::new(
                        rng.gen_range(0.0..spread),
                        rng.gen_range(0.0..spread),
                        rng.gen_range(0.0..spread / 4.0),
                    )
                })
                .collect(),
        )
    }

    #[test]
    fn chamfer_examples() {
        let a = PointCloud::new(vec![Point3::origin()]);
        let b = PointCloud::new(vec![Point3::new(0.01, 0.0, 0.0)]);
        assert!((chamfer_distance(&a, &b).unwrap() - 1e-4).abs() < 1e-18);
        assert_eq!(chamfer_distance(&a, &a).unwrap(), 0.0);
        assert!(matches!(
            chamfer_distance(&a, &PointCloud::default()),
            Err(Error::EmptyCloud)
        ));
    }

    #[test]
    fn chamfer_matches_brute_force_on_fifty_point_clouds() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for spread in [0.02, 0.1, 0.5] {
            let a = random_cloud(&mut rng, 50, spread);
            let b = random_cloud(&mut rng, 50, spread);
            assert_eq!(chamfer_distance(&a, &b).unwrap(), brute_force(&a, &b));
        }
    }

    #[test]
    fn downsample_keeps_one_point_per_voxel() {
        let cloud = PointCloud::new(vec![
            Point3::new(0.001, 0.001, 0.001),
            Point3::new(0.003, 0.001, 0.001),
            Point3::new(0.011, 0.001, 0.001),
        ]);
        let down = cloud.voxel_downsample(0.005);
        assert_eq!(down.len(), 2);
        assert!((down.points[0].x - 0.002).abs() < 1e-15);
        assert!((down.points[1].x - 0.011).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn chamfer_is_symmetric_and_exact(seed in any::<u64>(), na in 1usize..40, nb in 1usize..40) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_cloud(&mut rng, na, 0.3);
            let b = random_cloud(&mut rng, nb, 0.3);
            let ab = chamfer_distance(&a, &b).unwrap();
            let ba = chamfer_distance(&b, &a).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(ab, ba);
            prop_assert_eq!(ab, brute_force(&a, &b));
        }

        #[test]
        fn chamfer_zero_on_duplicated_sets(seed in any::<u64>(), n in 1usize..30) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_cloud(&mut rng, n, 0.2);
            // Same set, reversed and with repeats.
            let mut pts: Vec<_> = a.points.iter().rev().copied().collect();
            pts.extend_from_slice(&a.points[..n / 2]);
            prop_assert_eq!(chamfer_distance(&a, &PointCloud::new(pts)).unwrap(), 0.0);
        }
    }
}
