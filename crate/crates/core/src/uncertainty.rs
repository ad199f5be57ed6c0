//! Top-down recognition uncertainty: projected segmentation entropy plus
//! weighted multi-view class disagreement.

use std::path::Path;

use image::{GrayImage, Luma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
pub use crate::geometry::TopDownGrid;
use crate::geometry::{CameraModel, WorkspaceGrid};
use crate::perception::{PixelLabelMap, SegmentationResult};
use crate::scene::DepthImage;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyConfig {
    /// Weight of the disagreement term.
    pub lambda: f64,
}

impl Default for UncertaintyConfig {
    fn default() -> Self {
        Self { lambda: 0.1 }
    }
}

/// `-p ln p` with the continuous extension at zero.
#[inline]
pub fn plogp(p: f64) -> f64 {
    if p > 0.0 {
        -p * p.ln()
    } else {
        0.0
    }
}

/// Shannon entropy (nats) of a discrete distribution.
pub fn class_entropy(probs: &[f64]) -> f64 {
    probs.iter().map(|&p| plogp(p)).sum()
}

/// Entropy of a foreground/background split.
#[inline]
pub fn binary_entropy(p: f64) -> f64 {
    plogp(p) + plogp(1.0 - p)
}

/// Segmentation entropy at one pixel: over every box containing it, the
/// class entropy of the box plus the foreground entropy at the pixel.
pub fn pixel_entropy(seg: &SegmentationResult, row: usize, col: usize) -> f64 {
    seg.detections
        .iter()
        .filter_map(|d| d.foreground_at(row, col).map(|fg| class_entropy(&d.class_probs) + binary_entropy(fg)))
        .sum()
}

/// [`pixel_entropy`] for every pixel of the view, row-major.
pub fn entropy_image(seg: &SegmentationResult) -> Vec<f64> {
    let res = seg.resolution;
    let mut out = vec![0.0; res.pixel_count()];
    for det in &seg.detections {
        let h_class = class_entropy(&det.class_probs);
        let b = det.bbox;
        for row in b.row0..b.row1 {
            for col in b.col0..b.col1 {
                let fg = det.foreground[(row - b.row0) * b.width() + (col - b.col0)];
                out[res.index(row, col)] += h_class + binary_entropy(fg);
            }
        }
    }
    out
}

/// Top-down cell index of every valid-depth pixel (`None` when the depth is
/// invalid or the point falls outside the workspace).
pub fn project_pixels(camera: &CameraModel, depth: &DepthImage, grid: &WorkspaceGrid) -> Vec<Option<u32>> {
    let res = depth.resolution;
    let mut cells = vec![None; res.pixel_count()];
    for row in 0..res.height {
        for col in 0..res.width {
            let idx = res.index(row, col);
            if !depth.is_valid(idx) {
                continue;
            }
            let p = camera.pixel_ray(row, col).at(depth.depth[idx]);
            cells[idx] = grid.topdown_cell(&p).map(|c| grid.index(c) as u32);
        }
    }
    cells
}

/// One camera's data as consumed by the map builders.
#[derive(Clone, Copy)]
pub struct ViewInput<'a> {
    pub camera: &'a CameraModel,
    pub depth: &'a DepthImage,
    pub segmentation: &'a SegmentationResult,
    pub labels: &'a PixelLabelMap,
}

fn check_view(view: &ViewInput<'_>) -> Result<()> {
    if view.depth.resolution != view.camera.resolution
        || view.segmentation.resolution != view.camera.resolution
        || view.labels.resolution != view.camera.resolution
    {
        return Err(Error::Dimension(format!(
            "view {} inputs disagree on resolution",
            view.segmentation.view
        )));
    }
    Ok(())
}

/// Sums each view's pixel entropies into the cells their back-projected
/// centers land in. Views are accumulated separately and reduced in order,
/// so the result does not depend on the worker count.
pub fn entropy_map(views: &[ViewInput<'_>], grid: &WorkspaceGrid) -> Result<TopDownGrid> {
    views.iter().try_for_each(check_view)?;
    let partials: Vec<Vec<f64>> = views
        .par_iter()
        .map(|v| {
            let cells = project_pixels(v.camera, v.depth, grid);
            let entropy = entropy_image(v.segmentation);
            let mut acc = vec![0.0; grid.len()];
            for (cell, u) in cells.iter().zip(&entropy) {
                if let Some(c) = cell {
                    acc[*c as usize] += u;
                }
            }
            acc
        })
        .collect();
    let mut map = TopDownGrid::zeros(*grid);
    for partial in &partials {
        for (dst, src) in map.values_mut().iter_mut().zip(partial) {
            *dst += src;
        }
    }
    Ok(map)
}

/// Number of distinct foreground classes whose pixels land in each cell.
pub fn disagreement_map(views: &[ViewInput<'_>], grid: &WorkspaceGrid, num_classes: usize) -> Result<TopDownGrid> {
    views.iter().try_for_each(check_view)?;
    let words = num_classes.div_ceil(64).max(1);
    let mut bits = vec![0u64; grid.len() * words];
    let projected: Vec<Vec<Option<u32>>> = views
        .par_iter()
        .map(|v| project_pixels(v.camera, v.depth, grid))
        .collect();
    for (v, cells) in views.iter().zip(&projected) {
        for (cell, label) in cells.iter().zip(&v.labels.labels) {
            if let (Some(c), Some(class)) = (cell, label) {
                let class = *class as usize;
                if class >= num_classes {
                    return Err(Error::Dimension(format!(
                        "class {class} outside a {num_classes}-class catalog"
                    )));
                }
                bits[*c as usize * words + class / 64] |= 1u64 << (class % 64);
            }
        }
    }
    let values = bits
        .chunks(words)
        .map(|w| w.iter().map(|x| x.count_ones()).sum::<u32>() as f64)
        .collect();
    TopDownGrid::from_values(*grid, values)
}

/// `U = U_seg + lambda * U_obj`, elementwise.
pub fn combined_map(seg: &TopDownGrid, obj: &TopDownGrid, cfg: &UncertaintyConfig) -> Result<TopDownGrid> {
    if !seg.same_geometry(obj) {
        return Err(Error::Dimension("entropy and disagreement grids differ".into()));
    }
    let values = seg
        .values()
        .iter()
        .zip(obj.values())
        .map(|(s, o)| s + cfg.lambda * o)
        .collect();
    TopDownGrid::from_values(*seg.geometry(), values)
}

/// All three fields of one observation.
#[derive(Debug, Clone)]
pub struct UncertaintyField {
    pub entropy: TopDownGrid,
    pub disagreement: TopDownGrid,
    pub combined: TopDownGrid,
}

/// Builds the full field. With a single camera the disagreement term is
/// left at zero: one view cannot disagree with itself.
pub fn uncertainty_field(
    views: &[ViewInput<'_>],
    grid: &WorkspaceGrid,
    num_classes: usize,
    cfg: &UncertaintyConfig,
) -> Result<UncertaintyField> {
    let entropy = entropy_map(views, grid)?;
    let disagreement = if views.len() > 1 {
        disagreement_map(views, grid, num_classes)?
    } else {
        TopDownGrid::zeros(*grid)
    };
    let combined = combined_map(&entropy, &disagreement, cfg)?;
    Ok(UncertaintyField {
        entropy,
        disagreement,
        combined,
    })
}

/// Writes the grid as an 8-bit grayscale PNG, min-max normalized, one pixel
/// per cell with rows along the image height.
pub fn write_heatmap_png(grid: &TopDownGrid, path: &Path) -> Result<()> {
    let (lo, hi) = (grid.min(), grid.max());
    let span = if hi > lo { hi - lo } else { 1.0 };
    let img = GrayImage::from_fn(grid.cols() as u32, grid.rows() as u32, |x, y| {
        let v = (grid.get(y as usize, x as usize) - lo) / span;
        Luma([(255.0 * v).round() as u8])
    });
    img.save(path)?;
    Ok(())
}

/// Raw cell values, one grid row per CSV record.
pub fn write_grid_csv(grid: &TopDownGrid, path: &Path) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for i in 0..grid.rows() {
        w.write_record((0..grid.cols()).map(|j| grid.get(i, j).to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a grid written by [`write_grid_csv`] back onto `geometry`.
pub fn read_grid_csv(path: &Path, geometry: WorkspaceGrid) -> Result<TopDownGrid> {
    let mut r = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    let mut values = Vec::with_capacity(geometry.len());
    for record in r.records() {
        for field in record?.iter() {
            values.push(field.parse::<f64>().map_err(|e| Error::Parse {
                what: "grid csv",
                message: e.to_string(),
            })?);
        }
    }
    TopDownGrid::from_values(geometry, values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Cell, Resolution};
    use crate::perception::{pixel_label_map, Detection, PixelRect};
    use proptest::prelude::*;

    fn det(rect: PixelRect, probs: Vec<f64>, fg: f64) -> Detection {
        Detection {
            view: 0,
            index: 0,
            bbox: rect,
            foreground: vec![fg; rect.area()],
            class_probs: probs,
            source_object: None,
        }
    }

    #[test]
    fn pixel_entropy_cases() {
        let rect = PixelRect {
            row0: 2,
            col0: 2,
            row1: 5,
            col1: 5,
        };
        let mut seg = SegmentationResult::empty(0, Resolution::new(8, 8));
        seg.detections.push(det(rect, vec![0.0, 1.0, 0.0, 0.0], 1.0));
        assert_eq!(pixel_entropy(&seg, 0, 0), 0.0);
        assert_eq!(pixel_entropy(&seg, 3, 3), 0.0);
        seg.detections[0] = det(rect, vec![0.25; 4], 0.5);
        let expected = 4.0f64.ln() + 2.0f64.ln();
        assert!((pixel_entropy(&seg, 3, 3) - expected).abs() < 1e-12);
        assert!((expected - 2.0794).abs() < 1e-4);
        // Two stacked boxes add up.
        seg.detections.push(det(rect, vec![0.25; 4], 0.5));
        assert!((pixel_entropy(&seg, 3, 3) - 2.0 * expected).abs() < 1e-12);
        let img = entropy_image(&seg);
        assert!((img[3 * 8 + 3] - pixel_entropy(&seg, 3, 3)).abs() < 1e-15);
    }

    #[test]
    fn combined_examples() {
        let g = WorkspaceGrid::new([0.0, 0.0], 0.01, 3, 3).unwrap();
        let mut seg = TopDownGrid::zeros(g);
        let mut obj = TopDownGrid::zeros(g);
        seg.set(1, 1, 1.0);
        obj.set(1, 1, 3.0);
        let u = combined_map(&seg, &obj, &UncertaintyConfig::default()).unwrap();
        assert!((u.get(1, 1) - 1.3).abs() < 1e-15);
        let u0 = combined_map(&seg, &obj, &UncertaintyConfig { lambda: 0.0 }).unwrap();
        assert_eq!(u0, seg);
        assert_eq!(UncertaintyConfig::default().lambda, 0.1);
        let other = TopDownGrid::zeros(WorkspaceGrid::new([0.0, 0.0], 0.01, 3, 4).unwrap());
        assert!(combined_map(&seg, &other, &UncertaintyConfig::default()).is_err());
    }

    #[test]
    fn single_deposit_and_distinct_classes() {
        use crate::geometry::{CameraModel, Intrinsics};
        use nalgebra::{Point3, Vector3};
        // A one-pixel camera looking straight down at a known cell.
        let grid = WorkspaceGrid::default();
        let target = grid.cell_center(Cell::new(10, 20));
        let cam = CameraModel::look_at(
            Point3::new(target[0], target[1], 1.0),
            Point3::new(target[0], target[1], 0.0),
            Vector3::y(),
            Intrinsics {
                fx: 10.0,
                fy: 10.0,
                cx: 0.5,
                cy: 0.5,
            },
            Resolution::new(1, 1),
        )
        .unwrap();
        let depth = DepthImage {
            resolution: Resolution::new(1, 1),
            depth: vec![1.0],
            instance: vec![0],
        };
        let rect = PixelRect {
            row0: 0,
            col0: 0,
            row1: 1,
            col1: 1,
        };
        // class entropy 0, foreground entropy tuned to 0.7 is awkward; use a
        // class split whose entropy we compute directly.
        let probs = vec![0.7, 0.3];
        let mut seg = SegmentationResult::empty(0, Resolution::new(1, 1));
        seg.detections.push(det(rect, probs.clone(), 1.0));
        let labels = pixel_label_map(&seg);
        let view = ViewInput {
            camera: &cam,
            depth: &depth,
            segmentation: &seg,
            labels: &labels,
        };
        let map = entropy_map(&[view], &grid).unwrap();
        let u = class_entropy(&probs);
        assert!((map.get(10, 20) - u).abs() < 1e-15);
        assert!((map.sum() - u).abs() < 1e-15);

        // Three views labelling the cell {0, 0, 1} -> two distinct classes.
        let mut seg_b = seg.clone();
        seg_b.detections[0].class_probs = vec![0.2, 0.8];
        let labels_b = pixel_label_map(&seg_b);
        let view_b = ViewInput {
            segmentation: &seg_b,
            labels: &labels_b,
            ..view
        };
        let obj = disagreement_map(&[view, view, view_b], &grid, 2).unwrap();
        assert_eq!(obj.get(10, 20), 2.0);
        assert_eq!(obj.sum(), 2.0);
        let same = disagreement_map(&[view, view], &grid, 2).unwrap();
        assert_eq!(same.get(10, 20), 1.0);
    }

    #[test]
    fn grid_exports_round_trip() {
        let g = WorkspaceGrid::new([0.0, 0.0], 0.01, 4, 6).unwrap();
        let values: Vec<f64> = (0..24).map(|k| k as f64 * 0.37).collect();
        let grid = TopDownGrid::from_values(g, values).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("u.csv");
        write_grid_csv(&grid, &csv_path).unwrap();
        assert_eq!(read_grid_csv(&csv_path, g).unwrap(), grid);
        let png = dir.path().join("u.png");
        write_heatmap_png(&grid, &png).unwrap();
        let img = image::open(&png).unwrap().to_luma8();
        assert_eq!(img.dimensions(), (6, 4));
        assert_eq!(img.get_pixel(0, 0)[0], 0);
        assert_eq!(img.get_pixel(5, 3)[0], 255);
    }

    proptest! {
        #[test]
        fn entropy_terms_are_bounded(raw in proptest::collection::vec(0.0f64..1.0, 2..40), fg in 0.0f64..=1.0) {
            let total: f64 = raw.iter().sum();
            prop_assume!(total > 0.0);
            let probs: Vec<f64> = raw.iter().map(|r| r / total).collect();
            let h = class_entropy(&probs);
            prop_assert!(h >= -1e-12 && h <= (probs.len() as f64).ln() + 1e-12);
            let b = binary_entropy(fg);
            prop_assert!(b >= 0.0 && b <= 2.0f64.ln() + 1e-12);
        }
    }
}
