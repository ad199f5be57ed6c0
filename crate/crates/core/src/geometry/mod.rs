//! Cameras, coordinate transforms and point-set distances.

mod camera;
mod cloud;
mod grid;
mod polygon;

pub use camera::{CameraModel, Intrinsics, PixelRay, Resolution, RigConfig, ViewSet};
pub use cloud::{chamfer_distance, NearestNeighbors, PointCloud, PointSource, NN_CELL};
pub use grid::{Cell, TopDownGrid, WorkspaceGrid};
pub use polygon::{dot, ConvexPolygon, Vec2};


use nalgebra::Point3;

use crate::error::Result;

/// World point seen at `pixel = (row, col)` with camera depth `depth`.
pub fn backproject_pixel(pixel: (usize, usize), depth: f64, camera: &CameraModel) -> Result<Point3<f64>> {
    camera.backproject_pixel(pixel.0, pixel.1, depth)
}

/// Top-down cell of `point`; `None` marks a point outside the workspace.
pub fn topdown_cell(point: &Point3<f64>, grid: &WorkspaceGrid) -> Option<Cell> {
    grid.topdown_cell(point)
}
