use crate::error::{Error, Result};
use crate::geometry::{CameraModel, TopDownGrid, WorkspaceGrid};

use super::DepthImage;

/// Height above the table per top-down cell, from the overhead view.
#[derive(Debug, Clone, PartialEq)]
pub struct HeightMap(pub TopDownGrid);

impl HeightMap {
    pub fn grid(&self) -> &TopDownGrid {
        &self.0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }
}

/// Every valid overhead pixel deposits `max(0, z)` into its cell; a cell keeps
/// the maximum deposit and untouched cells stay at zero.
pub fn height_map(overhead_depth: &DepthImage, camera: &CameraModel, grid: &WorkspaceGrid) -> Result<HeightMap> {
    if !camera.is_overhead() {
        return Err(Error::WrongCamera);
    }
    if overhead_depth.resolution != camera.resolution {
        return Err(Error::Dimension("depth image does not match the camera".into()));
    }
    let mut map = TopDownGrid::zeros(*grid);
    let res = camera.resolution;
    for row in 0..res.height {
        for col in 0..res.width {
            let idx = res.index(row, col);
            if !overhead_depth.is_valid(idx) {
                continue;
            }
            let p = camera.pixel_ray(row, col).at(overhead_depth.depth[idx]);
            if let Some(cell) = grid.topdown_cell(&p) {
                let slot = &mut map.values_mut()[grid.index(cell)];
                *slot = slot.max(p.z.max(0.0));
            }
        }
    }
    Ok(HeightMap(map))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Intrinsics, Resolution};
    use crate::scene::{render_depth, ObjectSpec, PlacedObject, Pose, SceneState, Shape, Workspace};
    use nalgebra::{Point3, Vector3};

    fn fine_overhead() -> CameraModel {
        // 1 mm per pixel at the table so that every 2 mm cell is sampled.
        CameraModel::look_at(
            Point3::new(0.75, 0.5, 1.0),
            Point3::new(0.75, 0.5, 0.0),
            Vector3::y(),
            Intrinsics {
                fx: 1000.0,
                fy: 1000.0,
                cx: 200.0,
                cy: 200.0,
            },
            Resolution::new(400, 400),
        )
        .unwrap()
    }

    fn block(class_id: usize, half: f64, h: f64, x: f64, y: f64, z: f64) -> PlacedObject {
        PlacedObject {
            spec: ObjectSpec {
                class_id,
                shape: Shape::Box {
                    length: 2.0 * half,
                    width: 2.0 * half,
                    height: h,
                },
                color: String::new(),
            },
            pose: Pose { x, y, yaw: 0.0, z_base: z },
        }
    }

    /// Tallest solid top over the cell center, from the scene description.
    fn analytic_height(scene: &SceneState, x: f64, y: f64) -> f64 {
        scene
            .objects
            .iter()
            .filter(|o| o.footprint().contains([x, y]))
            .map(PlacedObject::top)
            .fold(0.0, f64::max)
    }

    #[test]
    fn empty_scene_is_flat() {
        let cam = fine_overhead();
        let scene = SceneState::empty(Workspace::default());
        let hm = height_map(&render_depth(&scene, &cam), &cam, &WorkspaceGrid::default()).unwrap();
        assert_eq!(hm.grid().max(), 0.0);
    }

    #[test]
    fn single_box_and_stacked_pair() {
        let cam = fine_overhead();
        let grid = WorkspaceGrid::default();
        let mut scene = SceneState::empty(Workspace::default());
        scene.objects.push(block(0, 0.05, 0.05, 0.7, 0.5, 0.0));
        let hm = height_map(&render_depth(&scene, &cam), &cam, &grid).unwrap();
        let mut inside = 0;
        for i in 0..grid.rows {
            for j in 0..grid.cols {
                let [x, y] = grid.cell_center(crate::geometry::Cell::new(i, j));
                let v = hm.get(i, j);
                let interior = (x - 0.7).abs() < 0.048 && (y - 0.5).abs() < 0.048;
                let exterior = (x - 0.7).abs() > 0.052 || (y - 0.5).abs() > 0.052;
                if interior {
                    assert!((v - 0.05).abs() < 1e-6, "cell ({i}, {j}) = {v}");
                    inside += 1;
                } else if exterior {
                    assert_eq!(v, 0.0);
                }
            }
        }
        assert!(inside > 500);

        scene.objects.push(block(1, 0.04, 0.04, 0.74, 0.5, 0.05));
        let hm = height_map(&render_depth(&scene, &cam), &cam, &grid).unwrap();
        for i in 0..grid.rows {
            for j in 0..grid.cols {
                let [x, y] = grid.cell_center(crate::geometry::Cell::new(i, j));
                // Skip cells straddling an edge.
                let near_edge = [0.65, 0.75, 0.70, 0.78]
                    .iter()
                    .any(|e| (x - e).abs() < 0.003)
                    || [0.45, 0.55, 0.46, 0.54].iter().any(|e| (y - e).abs() < 0.003);
                if !near_edge && hm.get(i, j) > 0.0 {
                    assert!((hm.get(i, j) - analytic_height(&scene, x, y)).abs() < 1e-6);
                }
            }
        }
        let overlap = grid.topdown_cell(&Point3::new(0.72, 0.5, 0.0)).unwrap();
        assert!((hm.get(overlap.i, overlap.j) - 0.09).abs() < 1e-6);
        assert!(hm.grid().max() <= scene.tallest_top() + 1e-9);
    }

    #[test]
    fn side_camera_is_rejected() {
        let cam = CameraModel::look_at(
            Point3::new(1.5, 0.5, 0.6),
            Point3::new(0.75, 0.5, 0.0),
            Vector3::z(),
            Intrinsics {
                fx: 100.0,
                fy: 100.0,
                cx: 20.0,
                cy: 20.0,
            },
            Resolution::new(40, 40),
        )
        .unwrap();
        let img = render_depth(&SceneState::empty(Workspace::default()), &cam);
        assert!(matches!(
            height_map(&img, &cam, &WorkspaceGrid::default()),
            Err(Error::WrongCamera)
        ));
    }
}
