use std::path::Path;

use image::{GrayImage, Luma};

use crate::error::Result;
use crate::scene::DepthImage;

/// Depth as 8-bit grayscale: near is bright, no hit is black.
pub fn write_depth_png(depth: &DepthImage, path: &Path) -> Result<()> {
    let res = depth.resolution;
    let finite = depth.depth.iter().copied().filter(|d| d.is_finite());
    let (lo, hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| (lo.min(d), hi.max(d)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    let img = GrayImage::from_fn(res.width as u32, res.height as u32, |x, y| {
        let d = depth.depth[res.index(y as usize, x as usize)];
        let v = if d.is_finite() { 255.0 - 223.0 * (d - lo) / span } else { 0.0 };
        Luma([v.round() as u8])
    });
    img.save(path)?;
    Ok(())
}
