// Copyright 2026 the nbv-sim authors
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

//! Closed-loop simulation harness for the stereo next-best-view controller.
//!
//! Scenarios are pure data; a trial is a deterministic function of the
//! scenario and a seed. The harness executes the hybrid control loop
//! (relative-frame view planning, global-frame gradient flow) alongside
//! the baseline controllers it is compared against, and writes per-target
//! metrics as CSV.

pub mod controllers;
pub mod olympic;
pub mod output;
pub mod scenario;
pub mod trial;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("initial pose leaves a target outside the stereo field of view")]
    InitialPoseOutOfFov,
    #[error("invalid scenario: {0}")]
    Schema(String),
    #[error(transparent)]
    Core(#[from] nbv_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
