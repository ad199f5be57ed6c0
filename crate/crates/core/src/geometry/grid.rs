//! Planar top-down discretization of the workspace.
//!
//! Row index `i` runs along world x and column index `j` along world y, so the
//! default 750 x 500 grid at 2 mm covers 1.50 m x 1.00 m.

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub i: usize,
    pub j: usize,
}

impl Cell {
    pub const fn new(i: usize, j: usize) -> Self {
        Self { i, j }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceGrid {
    /// World (x, y) of the corner of cell (0, 0).
    pub origin: [f64; 2],
    pub cell_size: f64,
    pub rows: usize,
    pub cols: usize,
}

impl Default for WorkspaceGrid {
    fn default() -> Self {
        Self {
            origin: [0.0, 0.0],
            cell_size: 0.002,
            rows: 750,
            cols: 500,
        }
    }
}

impl WorkspaceGrid {
    pub fn new(origin: [f64; 2], cell_size: f64, rows: usize, cols: usize) -> Result<Self> {
        if !(cell_size > 0.0 && cell_size.is_finite()) || rows == 0 || cols == 0 {
            return Err(Error::Config(format!(
                "invalid grid {rows}x{cols} with cell size {cell_size}"
            )));
        }
        Ok(Self {
            origin,
            cell_size,
            rows,
            cols,
        })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Extent along x and y in meters.
    pub fn size(&self) -> [f64; 2] {
        [
            self.rows as f64 * self.cell_size,
            self.cols as f64 * self.cell_size,
        ]
    }

    pub fn max_corner(&self) -> [f64; 2] {
        let [sx, sy] = self.size();
        [self.origin[0] + sx, self.origin[1] + sy]
    }

    pub fn center(&self) -> Point3<f64> {
        let [sx, sy] = self.size();
        Point3::new(self.origin[0] + sx / 2.0, self.origin[1] + sy / 2.0, 0.0)
    }

    #[inline]
    pub fn index(&self, cell: Cell) -> usize {
        cell.i * self.cols + cell.j
    }

    /// Cell containing the (x, y) of `point`, or `None` outside the workspace.
    /// Points on a cell boundary belong to the higher-index cell.
    #[inline]
    pub fn topdown_cell(&self, point: &Point3<f64>) -> Option<Cell> {
        self.cell_of_xy(point.x, point.y)
    }

    #[inline]
    pub fn cell_of_xy(&self, x: f64, y: f64) -> Option<Cell> {
        let fi = ((x - self.origin[0]) / self.cell_size).floor();
        let fj = ((y - self.origin[1]) / self.cell_size).floor();
        if !(fi >= 0.0 && fj >= 0.0) || fi >= self.rows as f64 || fj >= self.cols as f64 {
            return None;
        }
        Some(Cell::new(fi as usize, fj as usize))
    }

    /// World (x, y) of the center of `cell`.
    pub fn cell_center(&self, cell: Cell) -> [f64; 2] {
        [
            self.origin[0] + (cell.i as f64 + 0.5) * self.cell_size,
            self.origin[1] + (cell.j as f64 + 0.5) * self.cell_size,
        ]
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        let [mx, my] = self.max_corner();
        x >= self.origin[0] && y >= self.origin[1] && x <= mx && y <= my
    }
}

/// Scalar field over a [`WorkspaceGrid`], stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TopDownGrid {
    geometry: WorkspaceGrid,
    values: Vec<f64>,
}

impl TopDownGrid {
    pub fn zeros(geometry: WorkspaceGrid) -> Self {
        Self {
            values: vec![0.0; geometry.len()],
            geometry,
        }
    }

    pub fn from_values(geometry: WorkspaceGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != geometry.len() {
            return Err(Error::Dimension(format!(
                "{} values for a {}x{} grid",
                values.len(),
                geometry.rows,
                geometry.cols
            )));
        }
        Ok(Self { geometry, values })
    }

    pub fn geometry(&self) -> &WorkspaceGrid {
        &self.geometry
    }

    pub fn rows(&self) -> usize {
        self.geometry.rows
    }

    pub fn cols(&self) -> usize {
        self.geometry.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.geometry.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        let cols = self.geometry.cols;
        self.values[i * cols + j] = value;
    }

    #[inline]
    pub fn add(&mut self, cell: Cell, value: f64) {
        let idx = self.geometry.index(cell);
        self.values[idx] += value;
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.values.len() as f64
    }

    pub fn same_geometry(&self, other: &TopDownGrid) -> bool {
        self.geometry == other.geometry
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_grid_covers_the_workspace() {
        let g = WorkspaceGrid::default();
        assert_eq!((g.rows, g.cols), (750, 500));
        let [sx, sy] = g.size();
        assert!((sx - 1.5).abs() < 1e-12 && (sy - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cell_lookup() {
        let g = WorkspaceGrid::new([0.2, 0.1], 0.002, 750, 500).unwrap();
        assert_eq!(g.topdown_cell(&Point3::new(0.2, 0.1, 0.3)), Some(Cell::new(0, 0)));
        assert_eq!(
            g.topdown_cell(&Point3::new(0.2 + 0.003, 0.1 + 0.001, 0.0)),
            Some(Cell::new(1, 0))
        );
        let [mx, my] = g.max_corner();
        assert_eq!(g.topdown_cell(&Point3::new(mx + 0.001, 0.5, 0.0)), None);
        assert_eq!(g.topdown_cell(&Point3::new(0.5, my + 0.001, 0.0)), None);
        assert_eq!(g.topdown_cell(&Point3::new(0.1999, 0.5, 0.0)), None);
        assert_eq!(g.topdown_cell(&Point3::new(f64::NAN, 0.5, 0.0)), None);
    }

    #[test]
    fn boundary_points_go_to_the_higher_cell() {
        let g = WorkspaceGrid::new([0.0, 0.0], 0.25, 4, 4).unwrap();
        assert_eq!(g.cell_of_xy(0.25, 0.5), Some(Cell::new(1, 2)));
    }

    proptest! {
        // Dyadic coordinates keep the subtraction exact, so the property is
        // about the cell rule rather than float rounding.
        #[test]
        fn translation_consistent(
            px in 0i64..2048, py in 0i64..2048,
            sx in -4096i64..4096, sy in -4096i64..4096,
        ) {
            let q = 1.0 / 1024.0;
            let g = WorkspaceGrid::new([0.0, 0.0], 1.0 / 512.0, 1000, 1000).unwrap();
            let shifted = WorkspaceGrid { origin: [sx as f64 * q, sy as f64 * q], ..g };
            let p = Point3::new(px as f64 * q, py as f64 * q, 0.0);
            let ps = Point3::new(p.x + sx as f64 * q, p.y + sy as f64 * q, 0.0);
            prop_assert_eq!(g.topdown_cell(&p), shifted.topdown_cell(&ps));
        }
    }
}
