// Copyright 2026 the nbv-core authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

//! Stereo projection, quantization, triangulation, and propagation of pixel
//! noise to a 3x3 measurement covariance in global coordinates.
//!
//! Image coordinates are centered at the optical axis with pixel centers at
//! integer coordinates. A single image row `y` is shared between the left
//! and right images (rectified pair, epipolar constraint).

use nalgebra::{Matrix3, Vector3};

use crate::error::Error;
use crate::pose::{orthonormality_defect, Pose};
use crate::scalar::{real, widen, Real};
use crate::Result;

/// Minimum disparity (pixels) accepted by triangulation; guards `b/d^2`.
pub const MIN_DISPARITY_PX: f64 = 1e-6;

/// Stereo rig intrinsics and geometry.
///
/// `baseline` is the distance between the two camera centers and serves as
/// the characteristic world unit; `focal` is measured in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraRig<T: Real> {
    pub baseline: T,
    pub focal: T,
    pub image_width: T,
    pub image_height: T,
}

impl<T: Real> CameraRig<T> {
    pub fn new(baseline: T, focal: T, image_width: T, image_height: T) -> Self {
        assert!(
            baseline > T::zero() && focal > T::zero() && image_width > T::zero(),
            "rig parameters must be positive"
        );
        Self {
            baseline,
            focal,
            image_width,
            image_height,
        }
    }

    /// Derives the focal length from the full horizontal field-of-view
    /// half-angle: `f = w / (2 tan(fov_half))`.
    pub fn from_fov(baseline: T, image_width: T, image_height: T, fov_half_angle: T) -> Self {
        let focal = image_width / (real::<T>(2.0) * fov_half_angle.tan());
        Self::new(baseline, focal, image_width, image_height)
    }

    /// Minimum depth visible to both cameras, `b f / w`.
    pub fn min_depth(&self) -> T {
        self.baseline * self.focal / self.image_width
    }
}

/// Pixel coordinates of a point in both images: `(x_left, x_right, y)`,
/// with the row `y` shared per the epipolar constraint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelTriple<T: Real> {
    pub x_left: T,
    pub x_right: T,
    pub y: T,
}

impl<T: Real> PixelTriple<T> {
    pub fn new(x_left: T, x_right: T, y: T) -> Self {
        Self { x_left, x_right, y }
    }

    /// Horizontal disparity `x_left - x_right`.
    pub fn disparity(&self) -> T {
        self.x_left - self.x_right
    }

    pub fn as_vector(&self) -> Vector3<T> {
        Vector3::new(self.x_left, self.x_right, self.y)
    }
}

/// A triangulated point in the relative camera frame (`z > 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativePoint<T: Real> {
    pub p: Vector3<T>,
}

impl<T: Real> RelativePoint<T> {
    pub fn new(p: Vector3<T>) -> Self {
        Self { p }
    }
}

/// Covariance of the pixel error vector `(x_L, x_R, y)`, in pixels^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel<T: Real> {
    q: Matrix3<T>,
}

impl<T: Real> NoiseModel<T> {
    /// Builds a noise model; `q` must be symmetric positive definite.
    pub fn new(q: Matrix3<T>) -> Result<Self> {
        if (q - q.transpose()).norm() > real(1e-9) {
            return Err(Error::SingularInput);
        }
        if q.cholesky().is_none() {
            return Err(Error::SingularInput);
        }
        Ok(Self { q })
    }

    /// Unit pixel noise, `Q = I`.
    pub fn identity() -> Self {
        Self {
            q: Matrix3::identity(),
        }
    }

    /// Variance of uniform rounding error on `[-1/2, 1/2]`, `Q = I / 12`.
    pub fn uniform_quantization() -> Self {
        Self {
            q: Matrix3::identity() * real::<T>(1.0 / 12.0),
        }
    }

    pub fn matrix(&self) -> &Matrix3<T> {
        &self.q
    }
}

/// Second-order error statistic of a triangulated point, global frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementCovariance<T: Real> {
    pub sigma: Matrix3<T>,
}

fn check_disparity<T: Real>(d: T) -> Result<()> {
    if d <= real(MIN_DISPARITY_PX) {
        return Err(Error::NonPositiveDisparity { d: widen(d) });
    }
    Ok(())
}

/// Projects a relative-frame point onto both image planes.
///
/// Returns `(f/z) * (x + b/2, x - b/2, y)`; the inverse of [`triangulate`].
pub fn project<T: Real>(rig: &CameraRig<T>, p: &RelativePoint<T>) -> Result<PixelTriple<T>> {
    let z = p.p.z;
    if z <= T::zero() {
        return Err(Error::NonPositiveDepth { z: widen(z) });
    }
    let half_b = rig.baseline / real(2.0);
    let scale = rig.focal / z;
    Ok(PixelTriple::new(
        scale * (p.p.x + half_b),
        scale * (p.p.x - half_b),
        scale * p.p.y,
    ))
}

/// Rounds each pixel coordinate to the nearest pixel center (integer
/// coordinates, half away from zero). The row is quantized once and shared
/// by both images.
pub fn quantize<T: Real>(px: &PixelTriple<T>) -> PixelTriple<T> {
    PixelTriple::new(px.x_left.round(), px.x_right.round(), px.y.round())
}

/// Triangulates a pixel triple back to the relative camera frame:
/// `p = b/(x_L - x_R) * [(x_L + x_R)/2, y, f]`.
pub fn triangulate<T: Real>(rig: &CameraRig<T>, px: &PixelTriple<T>) -> Result<RelativePoint<T>> {
    let d = px.disparity();
    check_disparity(d)?;
    let scale = rig.baseline / d;
    Ok(RelativePoint::new(Vector3::new(
        scale * (px.x_left + px.x_right) / real(2.0),
        scale * px.y,
        scale * rig.focal,
    )))
}

/// Jacobian of [`triangulate`] with respect to `(x_L, x_R, y)`:
///
/// `J = b/d^2 * [[-x_R, x_L, 0], [-y, y, d], [-f, f, 0]]`.
pub fn jacobian<T: Real>(rig: &CameraRig<T>, px: &PixelTriple<T>) -> Result<Matrix3<T>> {
    let d = px.disparity();
    check_disparity(d)?;
    let s = rig.baseline / (d * d);
    Ok(Matrix3::new(
        -s * px.x_right,
        s * px.x_left,
        T::zero(),
        -s * px.y,
        s * px.y,
        s * d,
        -s * rig.focal,
        s * rig.focal,
        T::zero(),
    ))
}

/// Propagates pixel noise through the triangulation Jacobian and rotates
/// into the global frame: `Sigma = R J Q J^T R^T`.
pub fn measurement_covariance<T: Real>(
    rig: &CameraRig<T>,
    px: &PixelTriple<T>,
    rotation: &Matrix3<T>,
    noise: &NoiseModel<T>,
) -> Result<MeasurementCovariance<T>> {
    let defect = orthonormality_defect(rotation);
    if defect > real(1e-6) {
        return Err(Error::NotARotation {
            defect: widen(defect),
        });
    }
    let j = jacobian(rig, px)?;
    let rel = j * noise.matrix() * j.transpose();
    let sigma = rotation * rel * rotation.transpose();
    // Symmetrize to suppress rounding drift from the two congruences.
    let sigma = (sigma + sigma.transpose()) * real::<T>(0.5);
    Ok(MeasurementCovariance { sigma })
}

/// Maps a relative point to global coordinates, `x = R p + r`.
pub fn to_global<T: Real>(pose: &Pose<T>, p: &RelativePoint<T>) -> Vector3<T> {
    pose.to_global(p.p)
}
