//! Segmentation results and the synthetic segmenter that produces them from
//! ground-truth renders.
//!
//! Every downstream stage reads only [`Detection`] fields: a box-level class
//! distribution and per-pixel foreground probabilities inside the box.

mod labels;
mod oracle;

pub use labels::{pixel_label_map, PixelLabelMap};
pub use oracle::{OracleNoiseConfig, SeedPolicy, SegmentationOracle};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Resolution;

/// Half-open pixel rectangle `[row0, row1) x [col0, col1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PixelRect {
    pub row0: usize,
    pub col0: usize,
    pub row1: usize,
    pub col1: usize,
}

impl PixelRect {
    pub fn width(&self) -> usize {
        self.col1 - self.col0
    }

    pub fn height(&self) -> usize {
        self.row1 - self.row0
    }

    pub fn area(&self) -> usize {
        self.width() * self.height()
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        row >= self.row0 && row < self.row1 && col >= self.col0 && col < self.col1
    }
}

/// One instance found in one view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub view: usize,
    pub index: usize,
    pub bbox: PixelRect,
    /// Class distribution shared by every pixel of the box.
    pub class_probs: Vec<f64>,
    /// Foreground probability per box pixel, row-major over `bbox`.
    pub foreground: Vec<f64>,
    /// Ground-truth object behind the detection (bookkeeping only).
    pub source_object: Option<usize>,
}

/// Foreground threshold defining the binary instance mask.
pub const MASK_THRESHOLD: f64 = 0.5;

impl Detection {
    pub fn predicted_class(&self) -> usize {
        // First maximum wins.
        let mut best = 0;
        for (c, &p) in self.class_probs.iter().enumerate() {
            if p > self.class_probs[best] {
                best = c;
            }
        }
        best
    }

    pub fn confidence(&self) -> f64 {
        self.class_probs.iter().copied().fold(0.0, f64::max)
    }

    /// Foreground probability at an image pixel, `None` outside the box.
    #[inline]
    pub fn foreground_at(&self, row: usize, col: usize) -> Option<f64> {
        self.bbox.contains(row, col).then(|| {
            self.foreground[(row - self.bbox.row0) * self.bbox.width() + (col - self.bbox.col0)]
        })
    }

    #[inline]
    pub fn in_mask(&self, row: usize, col: usize) -> bool {
        self.foreground_at(row, col)
            .is_some_and(|p| p >= MASK_THRESHOLD)
    }

    pub fn mask_pixels(&self) -> usize {
        self.foreground.iter().filter(|&&p| p >= MASK_THRESHOLD).count()
    }

    pub fn check(&self) -> std::result::Result<(), String> {
        let total: f64 = self.class_probs.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(format!("class probabilities sum to {total}"));
        }
        if self.class_probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err("class probability outside [0, 1]".into());
        }
        if self.foreground.len() != self.bbox.area() {
            return Err("foreground map does not match the box".into());
        }
        if self.foreground.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err("foreground probability outside [0, 1]".into());
        }
        Ok(())
    }
}

/// Detections of one view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationResult {
    pub view: usize,
    pub resolution: Resolution,
    pub detections: Vec<Detection>,
}

impl SegmentationResult {
    pub fn empty(view: usize, resolution: Resolution) -> Self {
        Self {
            view,
            resolution,
            detections: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse {
            what: "segmentation result",
            message: e.to_string(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            what: "segmentation result",
            message: e.to_string(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
