//! Pinhole camera model and the world/image mapping.
//!
//! The world frame is metric with the ground plane at `Z = 0`. A camera is
//! described by its intrinsic matrix `K`, a world-to-camera rotation `R`, and
//! its center `t` expressed in world coordinates, so a world point `P` maps to
//! camera coordinates as `R (P - t)` and to pixels via `K`.

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

/// Maximum deviation from `RᵀR = I` accepted for a rotation matrix.
pub const ROTATION_TOL: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CameraError {
    #[error("rotation matrix is not orthonormal (max |R'R - I| = {0:.3e})")]
    InvalidRotation(f64),
    #[error("intrinsic matrix must be upper-triangular with positive diagonal")]
    InvalidIntrinsics,
    #[error("point has non-positive depth {0} in the camera frame")]
    DepthNonPositive(f64),
    #[error("viewing ray does not meet the ground plane in front of the camera")]
    RayParallelToGround,
}

/// A point on the world ground plane or above it, in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorldPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl WorldPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    /// A foot position on the ground plane (`Z = 0`).
    pub fn on_ground(x: f64, y: f64) -> Self {
        Self { x, y, z: 0.0 }
    }

    fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }
}

/// An image location in pixels.
///
/// The letter `v` here is the pixel row coordinate, not a velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelPoint {
    pub u: f64,
    pub v: f64,
}

impl PixelPoint {
    pub fn new(u: f64, v: f64) -> Self {
        Self { u, v }
    }
}

/// Calibrated pinhole camera.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    camera_id: String,
    intrinsics: Matrix3<f64>,
    rotation: Matrix3<f64>,
    position: Vector3<f64>,
    intrinsics_inv: Matrix3<f64>,
}

impl CameraModel {
    /// Builds a camera, validating that `rotation` is orthonormal and
    /// `intrinsics` is upper-triangular with a strictly positive diagonal.
    pub fn new(
        camera_id: impl Into<String>,
        intrinsics: Matrix3<f64>,
        rotation: Matrix3<f64>,
        position: Vector3<f64>,
    ) -> Result<Self, CameraError> {
        let gram = rotation.transpose() * rotation - Matrix3::identity();
        let dev = gram.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if dev > ROTATION_TOL {
            return Err(CameraError::InvalidRotation(dev));
        }
        let lower_ok = intrinsics[(1, 0)].abs() < 1e-9
            && intrinsics[(2, 0)].abs() < 1e-9
            && intrinsics[(2, 1)].abs() < 1e-9;
        let diag_ok =
            intrinsics[(0, 0)] > 0.0 && intrinsics[(1, 1)] > 0.0 && intrinsics[(2, 2)] > 0.0;
        if !lower_ok || !diag_ok {
            return Err(CameraError::InvalidIntrinsics);
        }
        let intrinsics_inv = intrinsics
            .try_inverse()
            .ok_or(CameraError::InvalidIntrinsics)?;
        Ok(Self {
            camera_id: camera_id.into(),
            intrinsics,
            rotation,
            position,
            intrinsics_inv,
        })
    }

    /// Builds a camera at `position` looking at `target`, with the image
    /// x-axis level and the image y-axis pointing downward in the world.
    pub fn look_at(
        camera_id: impl Into<String>,
        intrinsics: Matrix3<f64>,
        position: Vector3<f64>,
        target: Vector3<f64>,
    ) -> Result<Self, CameraError> {
        let forward = (target - position).normalize();
        let world_up = Vector3::z();
        let mut right = forward.cross(&world_up);
        if right.norm() < 1e-9 {
            // Looking straight up or down: any level direction works.
            right = Vector3::x();
        }
        let right = right.normalize();
        let down = forward.cross(&right).normalize();
        let rotation = Matrix3::from_rows(&[
            right.transpose(),
            down.transpose(),
            forward.transpose(),
        ]);
        Self::new(camera_id, intrinsics, rotation, position)
    }

    pub fn camera_id(&self) -> &str {
        &self.camera_id
    }

    pub fn intrinsics(&self) -> &Matrix3<f64> {
        &self.intrinsics
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    /// Camera center in world coordinates.
    pub fn position(&self) -> Vector3<f64> {
        self.position
    }

    /// Camera footprint on the ground plane, `[X_cam, Y_cam]`.
    pub fn ground_position(&self) -> [f64; 2] {
        [self.position.x, self.position.y]
    }

    /// Projects a world point into the image.
    pub fn project(&self, point: WorldPoint) -> Result<PixelPoint, CameraError> {
        let cam = self.rotation * (point.as_vector() - self.position);
        if cam.z <= 0.0 {
            return Err(CameraError::DepthNonPositive(cam.z));
        }
        let h = self.intrinsics * cam;
        Ok(PixelPoint::new(h.x / h.z, h.y / h.z))
    }

    /// Intersects the viewing ray of `pixel` with the ground plane `Z = 0`.
    pub fn back_project_to_ground(&self, pixel: PixelPoint) -> Result<WorldPoint, CameraError> {
        let dir_cam = self.intrinsics_inv * Vector3::new(pixel.u, pixel.v, 1.0);
        let dir_world = self.rotation.transpose() * dir_cam;
        if dir_world.z.abs() < 1e-12 {
            return Err(CameraError::RayParallelToGround);
        }
        let s = -self.position.z / dir_world.z;
        if s <= 0.0 {
            return Err(CameraError::RayParallelToGround);
        }
        let p = self.position + s * dir_world;
        Ok(WorldPoint::new(p.x, p.y, 0.0))
    }
}

/// Standard intrinsics with focal length `f`, square pixels, and principal
/// point `(cx, cy)`.
pub fn simple_intrinsics(f: f64, cx: f64, cy: f64) -> Matrix3<f64> {
    Matrix3::new(f, 0.0, cx, 0.0, f, cy, 0.0, 0.0, 1.0)
}
