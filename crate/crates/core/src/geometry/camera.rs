//! Pinhole cameras and the multi-view rig around the workspace.
//!
//! Camera frame convention: +x right, +y down, +z along the optical axis.
//! Pixel `(row, col)` has its center at continuous image coordinates
//! `(u, v) = (col + 0.5, row + 0.5)`. Depth is the camera-frame z coordinate.

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Focal lengths and principal point, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

/// Image size in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub width: usize,
    pub height: usize,
}

impl Resolution {
    pub const fn new(width: usize, height: usize) -> Self {
        Self { width, height }
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn index(&self, row: usize, col: usize) -> usize {
        row * self.width + col
    }

    pub fn contains(&self, row: usize, col: usize) -> bool {
        row < self.height && col < self.width
    }
}

/// Rigid pinhole camera; `rotation` maps camera-frame vectors to world frame
/// and `position` is the optical center in world meters.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub intrinsics: Intrinsics,
    pub rotation: Matrix3<f64>,
    pub position: Point3<f64>,
    pub resolution: Resolution,
}

/// A ray through a pixel center expressed in world frame. `direction` is not
/// normalized: it is scaled so that `origin + t * direction` has camera depth `t`.
#[derive(Debug, Clone, Copy)]
pub struct PixelRay {
    pub origin: Point3<f64>,
    pub direction: Vector3<f64>,
}

impl PixelRay {
    #[inline]
    pub fn at(&self, depth: f64) -> Point3<f64> {
        self.origin + self.direction * depth
    }
}

impl CameraModel {
    pub fn new(
        intrinsics: Intrinsics,
        rotation: Matrix3<f64>,
        position: Point3<f64>,
        resolution: Resolution,
    ) -> Result<Self> {
        let cam = Self {
            intrinsics,
            rotation,
            position,
            resolution,
        };
        cam.validate()?;
        Ok(cam)
    }

    /// Camera at `eye` looking at `target`. `up_hint` picks the image "up"
    /// direction and must not be parallel to the viewing direction.
    pub fn look_at(
        eye: Point3<f64>,
        target: Point3<f64>,
        up_hint: Vector3<f64>,
        intrinsics: Intrinsics,
        resolution: Resolution,
    ) -> Result<Self> {
        let forward = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::InvalidCamera("eye coincides with target".into()))?;
        let right = forward
            .cross(&up_hint)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::InvalidCamera("up hint parallel to view direction".into()))?;
        let down = forward.cross(&right);
        let rotation = Matrix3::from_columns(&[right, down, forward]);
        Self::new(intrinsics, rotation, eye, resolution)
    }

    pub fn validate(&self) -> Result<()> {
        let k = &self.intrinsics;
        if !(k.fx > 0.0 && k.fy > 0.0 && k.fx.is_finite() && k.fy.is_finite()) {
            return Err(Error::InvalidCamera("focal lengths must be positive".into()));
        }
        let err = (self.rotation * self.rotation.transpose() - Matrix3::identity()).abs().max();
        if err > 1e-9 {
            return Err(Error::InvalidCamera(format!(
                "rotation is not orthonormal (error {err:e})"
            )));
        }
        if self.resolution.width == 0 || self.resolution.height == 0 {
            return Err(Error::InvalidCamera("empty resolution".into()));
        }
        Ok(())
    }

    /// World-frame optical axis.
    pub fn forward(&self) -> Vector3<f64> {
        self.rotation.column(2).into_owned()
    }

    /// True when the optical axis points straight down (within 1e-9).
    pub fn is_overhead(&self) -> bool {
        (self.forward() - Vector3::new(0.0, 0.0, -1.0)).norm() < 1e-9
    }

    #[inline]
    pub fn pixel_ray(&self, row: usize, col: usize) -> PixelRay {
        let k = &self.intrinsics;
        let u = col as f64 + 0.5;
        let v = row as f64 + 0.5;
        let local = Vector3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0);
        PixelRay {
            origin: self.position,
            direction: self.rotation * local,
        }
    }

    /// World point seen at pixel `(row, col)` at camera depth `depth`.
    pub fn backproject_pixel(&self, row: usize, col: usize, depth: f64) -> Result<Point3<f64>> {
        if !(depth.is_finite() && depth > 0.0) {
            return Err(Error::InvalidDepth(depth));
        }
        if !self.resolution.contains(row, col) {
            return Err(Error::PixelOutOfBounds {
                row,
                col,
                width: self.resolution.width,
                height: self.resolution.height,
            });
        }
        Ok(self.pixel_ray(row, col).at(depth))
    }

    /// Continuous image coordinates `(u, v)` and camera depth of a world point.
    /// Returns `None` for points at or behind the camera plane.
    pub fn project(&self, point: &Point3<f64>) -> Option<(f64, f64, f64)> {
        let local = self.rotation.transpose() * (point - self.position);
        if local.z <= 0.0 {
            return None;
        }
        let k = &self.intrinsics;
        Some((
            k.fx * local.x / local.z + k.cx,
            k.fy * local.y / local.z + k.cy,
            local.z,
        ))
    }
}

/// Layout of the multi-camera rig around the workspace center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigConfig {
    /// Total number of cameras: one overhead plus `views - 1` side cameras.
    pub views: usize,
    pub resolution: Resolution,
    /// Overhead camera height above the table (m).
    pub overhead_height: f64,
    /// Overhead focal length at the configured resolution (px).
    pub overhead_focal: f64,
    /// Distance from each side camera to the workspace center (m).
    pub side_distance: f64,
    /// Angle between the side camera line of sight and the vertical (deg).
    pub side_tilt_deg: f64,
    /// Side camera focal length at the configured resolution (px).
    pub side_focal: f64,
    /// Azimuth of the first side camera (deg).
    pub first_azimuth_deg: f64,
}

impl Default for RigConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl RigConfig {
    pub const DESK_RESOLUTION: Resolution = Resolution::new(360, 256);
    pub const FULL_RESOLUTION: Resolution = Resolution::new(1440, 1024);

    pub fn desk() -> Self {
        Self {
            views: 5,
            resolution: Self::DESK_RESOLUTION,
            overhead_height: 1.2,
            overhead_focal: 323.0,
            side_distance: 1.2,
            side_tilt_deg: 60.0,
            side_focal: 380.0,
            first_azimuth_deg: 0.0,
        }
    }

    /// Same geometry at 1440x1024; focal lengths scale with the resolution.
    pub fn full_scale() -> Self {
        Self::desk().with_resolution(Self::FULL_RESOLUTION)
    }

    /// Rescales focal lengths so the field of view is preserved.
    pub fn with_resolution(mut self, resolution: Resolution) -> Self {
        let scale = resolution.width as f64 / self.resolution.width as f64;
        self.overhead_focal *= scale;
        self.side_focal *= scale;
        self.resolution = resolution;
        self
    }

    pub fn with_views(mut self, views: usize) -> Self {
        self.views = views;
        self
    }
}

/// Ordered camera list; index 0 is always the overhead camera.
#[derive(Debug, Clone, PartialEq)]
pub struct ViewSet {
    cameras: Vec<CameraModel>,
}

impl ViewSet {
    pub fn new(cameras: Vec<CameraModel>) -> Result<Self> {
        if cameras.is_empty() {
            return Err(Error::Config("a view set needs at least one camera".into()));
        }
        if !cameras[0].is_overhead() {
            return Err(Error::WrongCamera);
        }
        Ok(Self { cameras })
    }

    /// Builds the rig looking at `center` (world, on the table plane).
    pub fn rig(config: &RigConfig, center: Point3<f64>) -> Result<Self> {
        if config.views == 0 {
            return Err(Error::Config("views must be at least 1".into()));
        }
        let res = config.resolution;
        let half = |f: f64| Intrinsics {
            fx: f,
            fy: f,
            cx: res.width as f64 / 2.0,
            cy: res.height as f64 / 2.0,
        };
        let mut cameras = Vec::with_capacity(config.views);
        cameras.push(CameraModel::look_at(
            center + Vector3::new(0.0, 0.0, config.overhead_height),
            center,
            Vector3::y(),
            half(config.overhead_focal),
            res,
        )?);
        let sides = config.views - 1;
        let tilt = config.side_tilt_deg.to_radians();
        for s in 0..sides {
            let azimuth =
                config.first_azimuth_deg.to_radians() + std::f64::consts::TAU * s as f64 / sides as f64;
            let offset = Vector3::new(
                tilt.sin() * azimuth.cos(),
                tilt.sin() * azimuth.sin(),
                tilt.cos(),
            ) * config.side_distance;
            cameras.push(CameraModel::look_at(
                center + offset,
                center,
                Vector3::z(),
                half(config.side_focal),
                res,
            )?);
        }
        Ok(Self { cameras })
    }

    pub fn len(&self) -> usize {
        self.cameras.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cameras.is_empty()
    }

    pub fn overhead(&self) -> &CameraModel {
        &self.cameras[0]
    }

    pub fn cameras(&self) -> &[CameraModel] {
        &self.cameras
    }

    pub fn iter(&self) -> std::slice::Iter<'_, CameraModel> {
        self.cameras.iter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn overhead_at_center() -> CameraModel {
        // Odd resolution so pixel (50, 50) sits exactly on the optical axis.
        CameraModel::look_at(
            Point3::new(0.75, 0.5, 1.0),
            Point3::new(0.75, 0.5, 0.0),
            Vector3::y(),
            Intrinsics {
                fx: 100.0,
                fy: 100.0,
                cx: 50.5,
                cy: 50.5,
            },
            Resolution::new(101, 101),
        )
        .unwrap()
    }

    #[test]
    fn principal_pixel_backprojects_to_workspace_center() {
        let cam = overhead_at_center();
        let p = cam.backproject_pixel(50, 50, 1.0).unwrap();
        assert!((p - Point3::new(0.75, 0.5, 0.0)).norm() < 1e-12);
        let p = cam.backproject_pixel(50, 50, 0.9).unwrap();
        assert!((p - Point3::new(0.75, 0.5, 0.1)).norm() < 1e-12);
    }

    #[test]
    fn bad_depth_is_rejected() {
        let cam = overhead_at_center();
        for d in [0.0, -1.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(
                cam.backproject_pixel(3, 3, d),
                Err(Error::InvalidDepth(_))
            ));
        }
        assert!(matches!(
            cam.backproject_pixel(101, 0, 1.0),
            Err(Error::PixelOutOfBounds { .. })
        ));
    }

    #[test]
    fn rig_layout() {
        let rig = ViewSet::rig(&RigConfig::desk(), Point3::new(0.75, 0.5, 0.0)).unwrap();
        assert_eq!(rig.len(), 5);
        assert!(rig.overhead().is_overhead());
        for cam in &rig.cameras()[1..] {
            cam.validate().unwrap();
            let tilt = cam.forward().dot(&Vector3::new(0.0, 0.0, -1.0)).acos().to_degrees();
            assert!((tilt - 60.0).abs() < 1e-9, "tilt {tilt}");
            // The image center ray hits the workspace center.
            let center = cam.project(&Point3::new(0.75, 0.5, 0.0)).unwrap();
            assert!((center.0 - 180.0).abs() < 1e-9 && (center.1 - 128.0).abs() < 1e-9);
        }
        let single = ViewSet::rig(&RigConfig::desk().with_views(1), Point3::origin()).unwrap();
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn non_orthonormal_rotation_rejected() {
        let cam = overhead_at_center();
        let bad = CameraModel::new(
            cam.intrinsics,
            cam.rotation * 1.01,
            cam.position,
            cam.resolution,
        );
        assert!(bad.is_err());
    }
}
