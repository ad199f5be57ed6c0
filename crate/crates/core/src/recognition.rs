//! Cross-view instance recognition: per-view point-cloud partitions are
//! merged when they share a class and lie within the Chamfer gate.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{chamfer_distance, CameraModel, PointCloud};
use crate::perception::{pixel_label_map, SegmentationResult};
use crate::scene::DepthImage;

/// Voxel edge used to thin partitions before any Chamfer evaluation (m).
pub const PARTITION_VOXEL: f64 = 0.005;

/// Default merge gate on the Chamfer distance (m^2).
pub const DEFAULT_CHAMFER_THRESHOLD: f64 = 0.001;

/// World points of one detection in one view.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewPartition {
    pub view: usize,
    pub index: usize,
    pub points: PointCloud,
    pub class_id: usize,
    pub confidence: f64,
}

/// A group of partitions believed to be the same physical object.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceHypothesis {
    /// Indices into the partition list handed to [`merge_partitions`].
    pub members: Vec<usize>,
    pub points: PointCloud,
    pub class_id: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecognizedInstance {
    pub class_id: usize,
    /// (view, partition index) of every member.
    pub members: Vec<(usize, usize)>,
    pub points: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RecognitionResult {
    pub counts: BTreeMap<usize, usize>,
    pub instances: Vec<RecognizedInstance>,
}

impl RecognitionResult {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }
}

/// Lifts every valid-depth pixel of each instance mask into the world.
/// Overlapping masks give their shared pixels to the most confident
/// detection. Partitions are voxel-thinned to `voxel` and dropped when empty.
pub fn extract_partitions(
    depth: &DepthImage,
    seg: &SegmentationResult,
    camera: &CameraModel,
    voxel: f64,
) -> Result<Vec<ViewPartition>> {
    if depth.resolution != seg.resolution || depth.resolution != camera.resolution {
        return Err(Error::Dimension(format!(
            "depth {:?}, segmentation {:?}, camera {:?}",
            depth.resolution, seg.resolution, camera.resolution
        )));
    }
    let labels = pixel_label_map(seg);
    let res = depth.resolution;
    let mut raw: Vec<Vec<nalgebra::Point3<f64>>> = vec![Vec::new(); seg.detections.len()];
    for row in 0..res.height {
        for col in 0..res.width {
            let idx = res.index(row, col);
            let Some(owner) = labels.owner[idx] else {
                continue;
            };
            if !depth.is_valid(idx) {
                continue;
            }
            raw[owner as usize].push(camera.pixel_ray(row, col).at(depth.depth[idx]));
        }
    }
    let mut partitions = Vec::new();
    for (det, points) in seg.detections.iter().zip(raw) {
        let thinned = PointCloud::new(points).voxel_downsample(voxel);
        if thinned.is_empty() {
            continue;
        }
        partitions.push(ViewPartition {
            view: seg.view,
            index: det.index,
            points: thinned,
            class_id: det.predicted_class(),
            confidence: det.confidence(),
        });
    }
    Ok(partitions)
}

/// Lower bound on the Chamfer distance from distances to bounding boxes.
fn chamfer_lower_bound(a: &PointCloud, b: &PointCloud) -> f64 {
    fn box_dist2(p: &nalgebra::Point3<f64>, lo: &[f64; 3], hi: &[f64; 3]) -> f64 {
        let mut d = 0.0;
        for (axis, v) in [p.x, p.y, p.z].into_iter().enumerate() {
            let e = if v < lo[axis] {
                lo[axis] - v
            } else if v > hi[axis] {
                v - hi[axis]
            } else {
                0.0
            };
            d += e * e;
        }
        d
    }
    let (Some((alo, ahi)), Some((blo, bhi))) = (a.bounds(), b.bounds()) else {
        return 0.0;
    };
    let ab: f64 = a.points.iter().map(|p| box_dist2(p, &blo, &bhi)).sum::<f64>() / a.len() as f64;
    let ba: f64 = b.points.iter().map(|p| box_dist2(p, &alo, &ahi)).sum::<f64>() / b.len() as f64;
    0.5 * (ab + ba)
}

/// Fixed-point merge of partitions into instance hypotheses.
///
/// Every partition starts as its own hypothesis, in input order. A pass visits
/// hypotheses in ascending index; each one absorbs, in ascending order, every
/// later surviving hypothesis of the same class whose merged cloud is within
/// Chamfer distance `threshold` of its current (growing) cloud. Passes repeat
/// until one absorbs nothing.
pub fn merge_partitions(partitions: &[ViewPartition], threshold: f64) -> Vec<InstanceHypothesis> {
    let mut hyps: Vec<Option<InstanceHypothesis>> = partitions
        .iter()
        .enumerate()
        .map(|(k, p)| {
            Some(InstanceHypothesis {
                members: vec![k],
                points: p.points.clone(),
                class_id: p.class_id,
            })
        })
        .collect();
    loop {
        let mut grew = false;
        for i in 0..hyps.len() {
            if hyps[i].is_none() {
                continue;
            }
            for j in i + 1..hyps.len() {
                let eligible = match (&hyps[i], &hyps[j]) {
                    (Some(a), Some(b)) => {
                        a.class_id == b.class_id
                            && chamfer_lower_bound(&b.points, &a.points) < threshold
                            && chamfer_distance(&b.points, &a.points)
                                .is_ok_and(|d| d < threshold)
                    }
                    _ => false,
                };
                if eligible {
                    let absorbed = hyps[j].take().expect("checked above");
                    let target = hyps[i].as_mut().expect("checked above");
                    target.members.extend(absorbed.members);
                    target.points.extend(&absorbed.points);
                    grew = true;
                }
            }
        }
        if !grew {
            break;
        }
    }
    hyps.into_iter().flatten().collect()
}

/// Each hypothesis counts as one object of its class.
pub fn recognize(hypotheses: &[InstanceHypothesis], partitions: &[ViewPartition]) -> RecognitionResult {
    let mut result = RecognitionResult::default();
    for h in hypotheses {
        *result.counts.entry(h.class_id).or_insert(0) += 1;
        result.instances.push(RecognizedInstance {
            class_id: h.class_id,
            members: h
                .members
                .iter()
                .map(|&m| (partitions[m].view, partitions[m].index))
                .collect(),
            points: h.points.len(),
        });
    }
    result
}
