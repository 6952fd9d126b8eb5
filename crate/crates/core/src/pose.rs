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

//! Camera pose in the global frame.
//!
//! The relative camera frame is oriented with the x-axis joining the two
//! camera centers and the positive z-axis measuring range, so the third
//! column of the rotation matrix is the viewing direction in global
//! coordinates.

use nalgebra::{Matrix3, Vector3};

use crate::error::Error;
use crate::scalar::{real, widen, Real};
use crate::Result;

/// Camera position and orientation in the global frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose<T: Real> {
    /// Position of the rig center.
    pub r: Vector3<T>,
    /// Rotation from the relative camera frame to the global frame.
    pub rot: Matrix3<T>,
}

/// Frobenius defect of orthonormality, `||R^T R - I||_F`.
pub fn orthonormality_defect<T: Real>(rot: &Matrix3<T>) -> T {
    (rot.transpose() * rot - Matrix3::identity()).norm()
}

impl<T: Real> Pose<T> {
    /// Builds a pose, checking that `rot` is a proper rotation.
    pub fn new(r: Vector3<T>, rot: Matrix3<T>) -> Result<Self> {
        let defect = orthonormality_defect(&rot);
        if defect > real(1e-6) || rot.determinant() <= T::zero() {
            return Err(Error::NotARotation {
                defect: widen(defect),
            });
        }
        Ok(Self { r, rot })
    }

    pub fn identity() -> Self {
        Self {
            r: Vector3::zeros(),
            rot: Matrix3::identity(),
        }
    }

    /// Pose at `r` whose viewing axis points at `target`, with the image
    /// x-axis kept horizontal (relative to the global z-up convention).
    pub fn looking_at(r: Vector3<T>, target: Vector3<T>) -> Result<Self> {
        let dir = target - r;
        let norm = dir.norm();
        if norm < real(1e-12) {
            return Err(Error::DegenerateGoal);
        }
        let cz = dir / norm;
        let up = Vector3::z();
        let mut cx = up.cross(&cz);
        if cx.norm() < real(1e-9) {
            // Viewing straight up or down; any horizontal x-axis works.
            cx = Vector3::x();
        }
        cx.normalize_mut();
        let cy = cz.cross(&cx);
        Ok(Self {
            r,
            rot: Matrix3::from_columns(&[cx, cy, cz]),
        })
    }

    /// Viewing direction (relative z-axis) in global coordinates.
    pub fn view_axis(&self) -> Vector3<T> {
        self.rot.column(2).into()
    }

    /// Maps a point from the relative frame to global coordinates.
    pub fn to_global(&self, p: Vector3<T>) -> Vector3<T> {
        self.rot * p + self.r
    }

    /// Maps a global point into the relative camera frame.
    pub fn to_relative(&self, x: Vector3<T>) -> Vector3<T> {
        self.rot.transpose() * (x - self.r)
    }
}

/// Projects a near-rotation matrix onto SO(3) (polar retraction).
///
/// Returns the nearest rotation in the Frobenius sense, with the sign of
/// the last singular direction flipped if needed to keep `det > 0`.
pub fn nearest_rotation<T: Real>(m: &Matrix3<T>) -> Matrix3<T> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd requested u");
    let vt = svd.v_t.expect("svd requested v_t");
    let mut r = u * vt;
    if r.determinant() < T::zero() {
        let mut u = u;
        let col = u.column(2) * real::<T>(-1.0);
        u.set_column(2, &col);
        r = u * vt;
    }
    r
}
