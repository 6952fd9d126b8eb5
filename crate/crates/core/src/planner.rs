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

//! Next-best-view selection in the relative camera frame.
//!
//! Given the predicted prior covariance of an objective target, the
//! uncertainty potential `h(p)` is the trace of the fused position
//! covariance when a new measurement is simulated at the relative position
//! `p`. The planner descends `h` with its analytic gradient to find the
//! relative view from which a new image is most informative. The camera
//! rotation is frozen at its value from the previous observation instant
//! during the relative update.

use nalgebra::{Matrix3, Vector3};

use crate::error::Error;
use crate::kalman::fused_position_covariance;
use crate::pose::Pose;
use crate::scalar::{real, Real};
use crate::stereo::{
    jacobian, measurement_covariance, project, CameraRig, MeasurementCovariance, NoiseModel,
    PixelTriple, RelativePoint,
};
use crate::Result;

/// Which aggregate of the target set drives the planner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Worst-localized target: maximal trace of the prior covariance.
    Supremum,
    /// Pseudo-target at the mean predicted position with the averaged
    /// prior covariance.
    Centroid,
}

/// The target (or pseudo-target) the planner optimizes for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveTarget<T: Real> {
    /// Predicted prior position covariance `H U H^T`, global frame.
    pub prior_cov: Matrix3<T>,
    /// Predicted position in global coordinates.
    pub predicted_position: Vector3<T>,
    /// Predicted position in the relative camera frame.
    pub relative_position: RelativePoint<T>,
    /// Index of the selected target; `None` for the centroid pseudo-target.
    pub index: Option<usize>,
}

/// Gains and limits for the relative-frame gradient descent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NbvConfig<T: Real> {
    /// Diagonal positive gain matrix applied to the gradient.
    pub gain: Vector3<T>,
    /// Total integration interval.
    pub horizon: T,
    /// Euler substep.
    pub step: T,
    /// Maximum displacement of the relative view from its start.
    pub max_travel: T,
}

impl<T: Real> NbvConfig<T> {
    /// Gains and travel limit used by the reference simulations:
    /// `K = diag(1, 1, 7)`, travel clamp of a tenth of the baseline.
    pub fn with_travel(max_travel: T) -> Self {
        Self {
            gain: Vector3::new(T::one(), T::one(), real(7.0)),
            horizon: T::one(),
            step: real(0.01),
            max_travel,
        }
    }
}

/// Chooses the objective target from per-target priors and predictions.
///
/// `Supremum` picks the target with maximal prior trace (ties broken by
/// the lowest index); `Centroid` builds a pseudo-target from the means.
pub fn select_objective<T: Real>(
    objective: Objective,
    targets: &[(Matrix3<T>, Vector3<T>)],
    pose: &Pose<T>,
) -> Result<ObjectiveTarget<T>> {
    if targets.is_empty() {
        return Err(Error::EmptyTargetSet);
    }
    let (prior_cov, predicted_position, index) = match objective {
        Objective::Supremum => {
            let mut best = 0;
            let mut best_trace = targets[0].0.trace();
            for (i, (cov, _)) in targets.iter().enumerate().skip(1) {
                let tr = cov.trace();
                if tr > best_trace {
                    best = i;
                    best_trace = tr;
                }
            }
            (targets[best].0, targets[best].1, Some(best))
        }
        Objective::Centroid => {
            let n = real::<T>(targets.len() as f64);
            let mut cov = Matrix3::zeros();
            let mut pos = Vector3::zeros();
            for (c, x) in targets {
                cov += c;
                pos += x;
            }
            (cov / n, pos / n, None)
        }
    };
    Ok(ObjectiveTarget {
        prior_cov,
        predicted_position,
        relative_position: RelativePoint::new(pose.to_relative(predicted_position)),
        index,
    })
}

/// Regularizes a nearly singular prior before inversion.
fn conditioned_prior<T: Real>(prior: &Matrix3<T>) -> Matrix3<T> {
    let eig = prior.symmetric_eigenvalues();
    let mut lo = eig[0];
    let mut hi = eig[0];
    for i in 1..3 {
        lo = lo.min(eig[i]);
        hi = hi.max(eig[i]);
    }
    if lo <= T::zero() || hi / lo > real(1e12) {
        let bump = real::<T>(1e-9) * prior.trace() / real(3.0) + real(1e-300);
        prior + Matrix3::identity() * bump
    } else {
        *prior
    }
}

fn sigma_at<T: Real>(
    rig: &CameraRig<T>,
    p: &RelativePoint<T>,
    rotation: &Matrix3<T>,
    noise: &NoiseModel<T>,
) -> Result<(PixelTriple<T>, MeasurementCovariance<T>)> {
    let px = project(rig, p)?;
    let sigma = measurement_covariance(rig, &px, rotation, noise)?;
    Ok((px, sigma))
}

/// Uncertainty potential `h(p)`: trace of the fused position covariance
/// if a new measurement were taken with the target at `p`.
pub fn uncertainty_potential<T: Real>(
    obj: &ObjectiveTarget<T>,
    rig: &CameraRig<T>,
    rotation: &Matrix3<T>,
    noise: &NoiseModel<T>,
) -> Result<T> {
    let prior = conditioned_prior(&obj.prior_cov);
    let (_, sigma) = sigma_at(rig, &obj.relative_position, rotation, noise)?;
    let fused =
        fused_position_covariance(&prior, &sigma).map_err(|_| Error::SingularCovariance)?;
    Ok(fused.xi.trace())
}

/// Partial derivatives of the triangulation Jacobian with respect to each
/// pixel coordinate, evaluated at `px`.
fn jacobian_pixel_derivatives<T: Real>(
    rig: &CameraRig<T>,
    px: &PixelTriple<T>,
) -> [Matrix3<T>; 3] {
    let d = px.disparity();
    let b = rig.baseline;
    let s = b / (d * d);
    let two_over_d = real::<T>(2.0) / d;
    let m = Matrix3::new(
        -px.x_right,
        px.x_left,
        T::zero(),
        -px.y,
        px.y,
        d,
        -rig.focal,
        rig.focal,
        T::zero(),
    );
    let zero = T::zero();
    let one = T::one();
    // dM/dx_L, dM/dx_R, dM/dy.
    let el = Matrix3::new(zero, one, zero, zero, zero, one, zero, zero, zero);
    let er = Matrix3::new(-one, zero, zero, zero, zero, -one, zero, zero, zero);
    let ey = Matrix3::new(zero, zero, zero, -one, one, zero, zero, zero, zero);
    [
        (el - m * two_over_d) * s,
        (er + m * two_over_d) * s,
        ey * s,
    ]
}

/// Derivatives of the pixel coordinates with respect to the relative point:
/// row `i` is `d(x_L, x_R, y)[i] / dp`.
fn pixel_point_derivatives<T: Real>(rig: &CameraRig<T>, p: &Vector3<T>) -> Matrix3<T> {
    let z = p.z;
    let f_over_z = rig.focal / z;
    let inv_z = T::one() / z;
    let half_b = rig.baseline / real(2.0);
    Matrix3::new(
        f_over_z,
        T::zero(),
        -f_over_z * (p.x + half_b) * inv_z,
        f_over_z,
        T::zero(),
        -f_over_z * (p.x - half_b) * inv_z,
        T::zero(),
        f_over_z,
        -f_over_z * p.y * inv_z,
    )
}

/// Analytic gradient of the uncertainty potential with respect to the
/// relative position, with the rotation held constant:
/// `dh/dp_j = tr(Sigma^{-1} Xi^2 Sigma^{-1} dSigma/dp_j)`.
pub fn grad_h<T: Real>(
    obj: &ObjectiveTarget<T>,
    rig: &CameraRig<T>,
    rotation: &Matrix3<T>,
    noise: &NoiseModel<T>,
) -> Result<Vector3<T>> {
    let prior = conditioned_prior(&obj.prior_cov);
    let p = obj.relative_position;
    let (px, sigma) = sigma_at(rig, &p, rotation, noise)?;
    let sigma_inv = sigma
        .sigma
        .cholesky()
        .ok_or(Error::SingularCovariance)?
        .inverse();
    let xi = fused_position_covariance(&prior, &sigma)
        .map_err(|_| Error::SingularCovariance)?
        .xi;
    let weight = sigma_inv * xi * xi * sigma_inv;

    let j = jacobian(rig, &px)?;
    let dj_dpix = jacobian_pixel_derivatives(rig, &px);
    let dpix_dp = pixel_point_derivatives(rig, &p.p);
    let q = noise.matrix();

    let mut grad = Vector3::zeros();
    for coord in 0..3 {
        let mut dj = Matrix3::zeros();
        for pix in 0..3 {
            dj += dj_dpix[pix] * dpix_dp[(pix, coord)];
        }
        let d_rel = dj * q * j.transpose() + j * q * dj.transpose();
        let d_sigma = rotation * d_rel * rotation.transpose();
        grad[coord] = (weight * d_sigma).trace();
    }
    Ok(grad)
}

/// Integrates the relative-frame gradient descent to the next best view.
///
/// Follows the descent field `-K grad_h` with arc-length substeps of
/// `max_travel * step / horizon`, so the integration interval adapts to
/// the travel limit: the view moves along the flow path until either the
/// displacement from the start reaches `max_travel` (the final substep is
/// shortened so the clamp binds exactly), the gradient vanishes, or the
/// view reaches the minimum stereo depth. Each substep must not increase
/// the potential; substeps are halved when they would.
pub fn next_best_view<T: Real>(
    obj: &ObjectiveTarget<T>,
    cfg: &NbvConfig<T>,
    rig: &CameraRig<T>,
    rotation: &Matrix3<T>,
    noise: &NoiseModel<T>,
) -> Result<RelativePoint<T>> {
    let start = obj.relative_position.p;
    let mut current = *obj;
    let substeps = crate::scalar::widen(cfg.horizon / cfg.step).round().max(1.0) as usize;
    let arc = cfg.max_travel / real(substeps as f64);
    let mut h_cur = uncertainty_potential(&current, rig, rotation, noise)?;
    for _ in 0..substeps {
        let g = grad_h(&current, rig, rotation, noise)?;
        let mut dir = Vector3::new(cfg.gain.x * g.x, cfg.gain.y * g.y, cfg.gain.z * g.z);
        let norm = dir.norm();
        if crate::scalar::widen(norm) < 1e-15 {
            break;
        }
        dir /= norm;
        let mut step_len = arc;
        let mut advanced = false;
        for _ in 0..12 {
            let next = current.relative_position.p - dir * step_len;
            // Keep the candidate in front of the camera.
            if next.z <= rig.min_depth() {
                step_len *= real(0.5);
                continue;
            }
            let displacement = (next - start).norm();
            let clamped = if displacement >= cfg.max_travel {
                // Shorten the final substep so the clamp binds exactly.
                start + (next - start) * (cfg.max_travel / displacement)
            } else {
                next
            };
            let mut candidate = current;
            candidate.relative_position = RelativePoint::new(clamped);
            match uncertainty_potential(&candidate, rig, rotation, noise) {
                Ok(h_next) if h_next <= h_cur => {
                    current = candidate;
                    h_cur = h_next;
                    advanced = true;
                    if displacement >= cfg.max_travel {
                        return Ok(current.relative_position);
                    }
                    break;
                }
                _ => step_len *= real(0.5),
            }
        }
        if !advanced {
            break;
        }
    }
    Ok(current.relative_position)
}
