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

//! Active-vision building blocks for a mobile stereo rig that localizes
//! point targets under pixel quantization noise.
//!
//! The crate is organized around the stages of the closed loop:
//!
//! * [`stereo`]: projection, quantization, triangulation, and propagation
//!   of pixel noise to a 3x3 measurement covariance.
//! * [`kalman`]: per-target 9-state filters (position/velocity/acceleration)
//!   and the closed-form fused position covariance.
//! * [`planner`]: the uncertainty potential over candidate relative views,
//!   its analytic gradient, and the next-best-view integration.
//! * [`controller`]: realizing a relative view in the global frame by
//!   gradient flow on R^3 x SO(3) with field-of-view barrier potentials.
//! * [`calibration`]: data-driven pixel bias correction and empirical
//!   noise covariance estimation.
//!
//! All numerics are generic over the scalar type through [`scalar::Real`]
//! (`f32` or `f64`); concrete `f64` aliases are exported at the crate root.

pub mod calibration;
pub mod controller;
pub mod error;
pub mod kalman;
pub mod planner;
pub mod pose;
pub mod scalar;
pub mod stereo;

pub use error::Error;
pub use scalar::Real;

/// Crate-wide result type.
pub type Result<T, E = Error> = std::result::Result<T, E>;

// Concrete aliases for the common double-precision instantiation.
pub type CameraRig64 = stereo::CameraRig<f64>;
pub type PixelTriple64 = stereo::PixelTriple<f64>;
pub type RelativePoint64 = stereo::RelativePoint<f64>;
pub type NoiseModel64 = stereo::NoiseModel<f64>;
pub type MeasurementCovariance64 = stereo::MeasurementCovariance<f64>;
pub type Pose64 = pose::Pose<f64>;
pub type TargetState64 = kalman::TargetState<f64>;
pub type StateCovariance64 = kalman::StateCovariance<f64>;
