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

use thiserror::Error;

/// Errors surfaced by the geometric, filtering, and planning primitives.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Point at or behind the camera plane; cannot be projected.
    #[error("non-positive depth: z = {z}")]
    NonPositiveDepth { z: f64 },
    /// Disparity at or below the minimum; triangulation would blow up.
    #[error("non-positive disparity: d = {d}")]
    NonPositiveDisparity { d: f64 },
    /// Matrix fails the orthonormality check for a rotation.
    #[error("not a rotation matrix: ||R^T R - I|| = {defect}")]
    NotARotation { defect: f64 },
    /// Time step must be strictly positive.
    #[error("non-positive time step: dt = {dt}")]
    NonPositiveDt { dt: f64 },
    /// Kalman innovation matrix is numerically singular.
    #[error("singular innovation matrix (condition number above {limit:e})")]
    SingularInnovation { limit: f64 },
    /// A covariance input could not be inverted.
    #[error("singular covariance input")]
    SingularInput,
    /// Measurement covariance is not invertible at the requested view.
    #[error("singular measurement covariance")]
    SingularCovariance,
    /// Objective selection requires at least one target.
    #[error("empty target set")]
    EmptyTargetSet,
    /// Goal position coincides with the estimated target location.
    #[error("degenerate goal: target and goal position coincide")]
    DegenerateGoal,
    /// A target left (or started outside) the stereo field of view.
    #[error("pose out of field-of-view set: barrier {index} is non-positive")]
    OutOfFov { index: usize },
    /// The flow integrator could not find a descending step.
    #[error("gradient flow step diverged (potential increased at minimum step)")]
    StepDiverged,
    /// Feature construction requires nonzero disparity.
    #[error("zero disparity in feature vector")]
    ZeroDisparity,
    /// Regression design matrix is rank deficient.
    #[error("rank-deficient design matrix (condition number above {limit:e})")]
    RankDeficient { limit: f64 },
}
