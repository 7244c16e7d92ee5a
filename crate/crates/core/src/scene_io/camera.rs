use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Mat3, Ray, Rigid, Vec3};
use crate::scalar::Real;

/// Pinhole camera. The pose maps camera coordinates to world coordinates;
/// the camera looks down its local −z axis with +y up, and pixel rows grow
/// downwards.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Camera {
    pub width: u32,
    pub height: u32,
    pub focal_x: f64,
    pub focal_y: f64,
    pub principal_point: [f64; 2],
    pub pose: [[f64; 4]; 4],
}

impl Camera {
    /// Square pixels, centered principal point, focal length from the
    /// horizontal field of view.
    pub fn from_fov(width: u32, height: u32, camera_angle_x: f64, pose: [[f64; 4]; 4]) -> Self {
        let focal = focal_from_angle(width, camera_angle_x);
        Self {
            width,
            height,
            focal_x: focal,
            focal_y: focal,
            principal_point: [width as f64 / 2.0, height as f64 / 2.0],
            pose,
        }
    }

    /// Camera at `eye` looking at `target`, with `up` resolving the roll.
    pub fn look_at(
        eye: [f64; 3],
        target: [f64; 3],
        up: [f64; 3],
        width: u32,
        height: u32,
        camera_angle_x: f64,
    ) -> Self {
        let eye = Vec3::from_f64(eye);
        let forward = (Vec3::from_f64(target) - eye).normalized();
        let mut right = forward.cross(Vec3::from_f64(up));
        if right.norm() < 1e-9 {
            right = forward.cross(Vec3::new(0.0, 1.0, 0.0));
        }
        let right = right.normalized();
        let true_up = right.cross(forward);
        let back = -forward;
        let pose = [
            [right.x, true_up.x, back.x, eye.x],
            [right.y, true_up.y, back.y, eye.y],
            [right.z, true_up.z, back.z, eye.z],
            [0.0, 0.0, 0.0, 1.0],
        ];
        Self::from_fov(width, height, camera_angle_x, pose)
    }

    pub fn camera_angle_x(&self) -> f64 {
        2.0 * (self.width as f64 / (2.0 * self.focal_x)).atan()
    }

    pub fn rigid(&self) -> Rigid<f64> {
        Rigid {
            rotation: Mat3 {
                rows: [
                    [self.pose[0][0], self.pose[0][1], self.pose[0][2]],
                    [self.pose[1][0], self.pose[1][1], self.pose[1][2]],
                    [self.pose[2][0], self.pose[2][1], self.pose[2][2]],
                ],
            },
            translation: Vec3::new(self.pose[0][3], self.pose[1][3], self.pose[2][3]),
        }
    }

    pub fn center(&self) -> [f64; 3] {
        [self.pose[0][3], self.pose[1][3], self.pose[2][3]]
    }

    /// Checks intrinsics and that the rotation block is orthonormal within
    /// `tol`.
    pub fn validate(&self, tol: f64) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidInput("camera resolution must be >= 1".into()));
        }
        if !(self.focal_x > 0.0 && self.focal_y > 0.0) {
            return Err(Error::InvalidInput("focal lengths must be positive".into()));
        }
        let err = self.rigid().rotation.orthonormality_error();
        if !(err <= tol) {
            return Err(Error::InvalidPose(format!(
                "rotation orthonormality error {err:.3e} exceeds {tol:.0e}"
            )));
        }
        if self.pose.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPose("pose has non-finite entries".into()));
        }
        Ok(())
    }

    /// Unit ray through continuous pixel coordinates `(u, v)`; pixel
    /// `(i, j)` covers `[i, i+1) × [j, j+1)`.
    pub fn generate_ray<T: Real>(&self, u: f64, v: f64) -> Result<Ray<T>> {
        if !(u >= 0.0 && u < self.width as f64 && v >= 0.0 && v < self.height as f64) {
            return Err(Error::OutOfBounds {
                u,
                v,
                width: self.width,
                height: self.height,
            });
        }
        Ok(self.ray_unchecked(u, v))
    }

    /// Ray through the center of pixel `(x, y)`.
    #[inline]
    pub fn pixel_ray<T: Real>(&self, x: u32, y: u32) -> Ray<T> {
        self.ray_unchecked(x as f64 + 0.5, y as f64 + 0.5)
    }

    #[inline]
    fn ray_unchecked<T: Real>(&self, u: f64, v: f64) -> Ray<T> {
        let local = Vec3::new(
            (u - self.principal_point[0]) / self.focal_x,
            -(v - self.principal_point[1]) / self.focal_y,
            -1.0,
        );
        let rigid = self.rigid();
        let dir = rigid.apply_vector(local).normalized();
        Ray {
            origin: rigid.translation.cast(),
            direction: dir.cast(),
        }
    }
}

pub(crate) fn focal_from_angle(width: u32, camera_angle_x: f64) -> f64 {
    (width as f64 / 2.0) / (camera_angle_x / 2.0).tan()
}
