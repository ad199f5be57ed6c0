use serde::{Deserialize, Serialize};

use super::SegmentationResult;
use crate::geometry::Resolution;

/// Per-pixel owning detection and its predicted class, or background.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PixelLabelMap {
    pub view: usize,
    pub resolution: Resolution,
    /// Index into the detection list, `None` for background.
    pub owner: Vec<Option<u32>>,
    pub labels: Vec<Option<u32>>,
}

impl PixelLabelMap {
    pub fn label_at(&self, row: usize, col: usize) -> Option<usize> {
        self.labels[self.resolution.index(row, col)].map(|c| c as usize)
    }

    pub fn owner_at(&self, row: usize, col: usize) -> Option<usize> {
        self.owner[self.resolution.index(row, col)].map(|d| d as usize)
    }
}

/// Labels each masked pixel with the class of the most confident detection
/// covering it (lower detection index on ties).
pub fn pixel_label_map(result: &SegmentationResult) -> PixelLabelMap {
    let res = result.resolution;
    let mut owner: Vec<Option<u32>> = vec![None; res.pixel_count()];
    let mut best_conf = vec![f64::NEG_INFINITY; res.pixel_count()];
    for (d_idx, det) in result.detections.iter().enumerate() {
        let conf = det.confidence();
        let b = det.bbox;
        for row in b.row0..b.row1 {
            for col in b.col0..b.col1 {
                if !det.in_mask(row, col) {
                    continue;
                }
                let idx = res.index(row, col);
                // Strict comparison keeps the earlier detection on ties.
                if conf > best_conf[idx] {
                    best_conf[idx] = conf;
                    owner[idx] = Some(d_idx as u32);
                }
            }
        }
    }
    let labels = owner
        .iter()
        .map(|o| o.map(|d| result.detections[d as usize].predicted_class() as u32))
        .collect();
    PixelLabelMap {
        view: result.view,
        resolution: res,
        owner,
        labels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perception::{Detection, PixelRect};

    fn det(index: usize, rect: PixelRect, class: usize, conf: f64, classes: usize) -> Detection {
        let mut class_probs = vec![(1.0 - conf) / (classes - 1) as f64; classes];
        class_probs[class] = conf;
        Detection {
            view: 0,
            index,
            bbox: rect,
            class_probs,
            foreground: vec![1.0; rect.area()],
            source_object: None,
        }
    }

    fn rect(row0: usize, col0: usize, row1: usize, col1: usize) -> PixelRect {
        PixelRect {
            row0,
            col0,
            row1,
            col1,
        }
    }

    #[test]
    fn empty_result_is_background() {
        let map = pixel_label_map(&SegmentationResult::empty(0, Resolution::new(8, 6)));
        assert!(map.labels.iter().all(Option::is_none));
    }

    #[test]
    fn disjoint_masks_keep_their_labels() {
        let mut seg = SegmentationResult::empty(0, Resolution::new(10, 10));
        seg.detections.push(det(0, rect(0, 0, 3, 3), 2, 0.9, 5));
        seg.detections.push(det(1, rect(5, 5, 8, 8), 4, 0.6, 5));
        let map = pixel_label_map(&seg);
        assert_eq!(map.label_at(1, 1), Some(2));
        assert_eq!(map.label_at(6, 6), Some(4));
        assert_eq!(map.label_at(4, 4), None);
    }

    #[test]
    fn overlap_goes_to_most_confident_then_lowest_index() {
        let res = Resolution::new(12, 12);
        let mut seg = SegmentationResult::empty(0, res);
        seg.detections.push(det(0, rect(0, 0, 8, 8), 1, 0.7, 5));
        seg.detections.push(det(1, rect(4, 4, 12, 12), 3, 0.9, 5));
        seg.detections.push(det(2, rect(6, 0, 12, 6), 0, 0.7, 5));
        let map = pixel_label_map(&seg);
        // Exhaustive reference over all pixels.
        for row in 0..12 {
            for col in 0..12 {
                let mut best: Option<(f64, usize)> = None;
                for (k, d) in seg.detections.iter().enumerate() {
                    if d.in_mask(row, col) {
                        let c = d.confidence();
                        if best.is_none_or(|(bc, _)| c > bc) {
                            best = Some((c, k));
                        }
                    }
                }
                let expected = best.map(|(_, k)| seg.detections[k].predicted_class());
                assert_eq!(map.label_at(row, col), expected, "({row}, {col})");
            }
        }
        assert_eq!(map.label_at(5, 5), Some(3));
        assert_eq!(map.label_at(7, 3), Some(1));
    }
}
