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

//! Scenario description and JSON schema.

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use nbv_core::controller::FlowConfig;
use nbv_core::planner::NbvConfig;
use nbv_core::pose::Pose;
use nbv_core::stereo::{CameraRig, NoiseModel};

use crate::SimError;

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RigSpec {
    pub baseline: f64,
    pub focal: f64,
    pub image_width: f64,
    pub image_height: f64,
}

impl RigSpec {
    pub fn rig(&self) -> CameraRig<f64> {
        CameraRig::new(self.baseline, self.focal, self.image_width, self.image_height)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerKind {
    NbvSupremum,
    NbvCentroid,
    StraightBaseline,
    CircleBaseline,
    GridSquare,
    GridTriangular,
}

impl ControllerKind {
    /// Label used in the results CSV.
    pub fn label(&self) -> &'static str {
        match self {
            Self::NbvSupremum => "nbv_supremum",
            Self::NbvCentroid => "nbv_centroid",
            Self::StraightBaseline => "straight",
            Self::CircleBaseline => "circle",
            Self::GridSquare => "grid_square",
            Self::GridTriangular => "grid_triangular",
        }
    }
}

/// Targets are drawn uniformly from an axis-aligned cube, one layout per
/// trial seed.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TargetLayout {
    pub center: [f64; 3],
    pub extent: f64,
}

/// Ring pattern for mobile targets: five circles in the global x-y plane,
/// three over two with the standard overlap, each target orbiting its own
/// ring.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct RingPattern {
    pub center: [f64; 3],
    pub radius: f64,
    /// Center-to-center spacing along y within a row.
    pub spacing: f64,
    /// Angular rate in rad/s, shared by all rings.
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetMotion {
    Static,
    OlympicRings(RingPattern),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PoseSpec {
    pub position: [f64; 3],
    /// Unit quaternion, `[w, x, y, z]`.
    pub orientation: [f64; 4],
}

impl PoseSpec {
    pub fn pose(&self) -> Result<Pose<f64>, SimError> {
        let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(
            self.orientation[0],
            self.orientation[1],
            self.orientation[2],
            self.orientation[3],
        ));
        let rot: Matrix3<f64> = q.to_rotation_matrix().into_inner();
        Pose::new(Vector3::from(self.position), rot).map_err(SimError::Core)
    }

    pub fn from_pose(pose: &Pose<f64>) -> Self {
        let q = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(pose.rot));
        Self {
            position: pose.r.into(),
            orientation: [q.w, q.i, q.j, q.k],
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PlannerSpec {
    pub gain: [f64; 3],
    pub horizon: f64,
    pub step: f64,
    pub max_travel: f64,
}

impl PlannerSpec {
    pub fn config(&self) -> NbvConfig<f64> {
        NbvConfig {
            gain: Vector3::from(self.gain),
            horizon: self.horizon,
            step: self.step,
            max_travel: self.max_travel,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct BarrierSpec {
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FlowSpec {
    pub step: f64,
    pub duration: f64,
    pub retraction_interval: usize,
    pub tolerance: f64,
}

impl FlowSpec {
    pub fn config(&self, max_travel: Option<f64>) -> FlowConfig<f64> {
        FlowConfig {
            step: self.step,
            duration: self.duration,
            retraction_interval: self.retraction_interval,
            tolerance: self.tolerance,
            max_travel,
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_halt_fraction() -> f64 {
    0.05
}

fn default_loose_prior() -> f64 {
    100.0
}

/// A complete simulation description. Everything a trial does is a pure
/// function of this document and the seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub schema_version: u32,
    pub rig: RigSpec,
    pub controller: ControllerKind,
    pub n_targets: usize,
    pub target_layout: TargetLayout,
    pub target_motion: TargetMotion,
    pub initial_pose: PoseSpec,
    /// Pixel-noise covariance Q, row-major.
    pub pixel_noise: [f64; 9],
    pub planner_cfg: PlannerSpec,
    pub barrier_cfg: BarrierSpec,
    pub flow_cfg: FlowSpec,
    pub n_observations: usize,
    pub dt: f64,
    /// Grid controllers only.
    #[serde(default)]
    pub grid_edge: Option<f64>,
    pub seed: u64,
    /// Travel budget per iteration; defaults to 0.1 baselines.
    #[serde(default)]
    pub travel_budget: Option<f64>,
    /// Round projections to pixel centers.
    #[serde(default = "default_true")]
    pub quantize: bool,
    /// Std of extra white pixel noise added before quantization.
    #[serde(default)]
    pub additive_pixel_std: f64,
    /// Process-noise multiplier; 0 for static targets.
    #[serde(default)]
    pub process_noise_scale: f64,
    /// Straight baseline halts when any barrier falls below this fraction
    /// of its initial value.
    #[serde(default = "default_halt_fraction")]
    pub halt_fraction: f64,
    /// Initial variance of the unobserved velocity and acceleration states.
    #[serde(default = "default_loose_prior")]
    pub kf_loose_prior: f64,
}

impl Scenario {
    pub fn from_json(json: &str) -> Result<Self, SimError> {
        let scenario: Scenario = serde_json::from_str(json)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, SimError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.schema_version != SCENARIO_SCHEMA_VERSION {
            return Err(SimError::Schema(format!(
                "unsupported scenario schema version {}",
                self.schema_version
            )));
        }
        if self.n_observations == 0 {
            return Err(SimError::Schema("n_observations must be >= 1".into()));
        }
        if self.n_targets == 0 {
            return Err(SimError::Schema("n_targets must be >= 1".into()));
        }
        if self.dt <= 0.0 {
            return Err(SimError::Schema("dt must be positive".into()));
        }
        if matches!(
            self.controller,
            ControllerKind::GridSquare | ControllerKind::GridTriangular
        ) && self.grid_edge.is_none()
        {
            return Err(SimError::Schema(
                "grid controllers require grid_edge".into(),
            ));
        }
        self.noise_model()?;
        self.initial_pose.pose()?;
        Ok(())
    }

    pub fn noise_model(&self) -> Result<NoiseModel<f64>, SimError> {
        let q = Matrix3::from_row_slice(&self.pixel_noise);
        NoiseModel::new(q).map_err(SimError::Core)
    }

    pub fn travel_budget(&self) -> f64 {
        self.travel_budget.unwrap_or(0.1 * self.rig.baseline)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub fn sample() -> Scenario {
        Scenario {
            schema_version: SCENARIO_SCHEMA_VERSION,
            rig: RigSpec {
                baseline: 1.0,
                focal: 731.2,
                image_width: 1024.0,
                image_height: 1024.0,
            },
            controller: ControllerKind::NbvSupremum,
            n_targets: 5,
            target_layout: TargetLayout {
                center: [0.0, 0.0, 0.0],
                extent: 1.0,
            },
            target_motion: TargetMotion::Static,
            initial_pose: PoseSpec {
                position: [-50.0, 0.0, 0.0],
                orientation: [1.0, 0.0, 0.0, 0.0],
            },
            pixel_noise: [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0],
            planner_cfg: PlannerSpec {
                gain: [1.0, 1.0, 7.0],
                horizon: 1.0,
                step: 0.01,
                max_travel: 2.0,
            },
            barrier_cfg: BarrierSpec { rho: 100.0 },
            flow_cfg: FlowSpec {
                step: 5e-3,
                duration: 3.0,
                retraction_interval: 1,
                tolerance: 1e-10,
            },
            n_observations: 25,
            dt: 0.1,
            grid_edge: None,
            seed: 7,
            travel_budget: Some(2.0),
            quantize: true,
            additive_pixel_std: 0.0,
            process_noise_scale: 0.0,
            halt_fraction: 0.05,
            kf_loose_prior: 100.0,
        }
    }

    #[test]
    fn json_round_trip() {
        let scenario = sample();
        let json = serde_json::to_string_pretty(&scenario).unwrap();
        let parsed = Scenario::from_json(&json).unwrap();
        assert_eq!(parsed.controller, scenario.controller);
        assert_relative_eq!(parsed.rig.baseline, scenario.rig.baseline);
        assert_eq!(parsed.n_observations, scenario.n_observations);
    }

    #[test]
    fn pose_spec_round_trip() {
        let pose = Pose::looking_at(
            Vector3::new(-50.0, 1.0, 0.5),
            Vector3::zeros(),
        )
        .unwrap();
        let spec = PoseSpec::from_pose(&pose);
        let back = spec.pose().unwrap();
        assert_relative_eq!(back.r, pose.r, epsilon = 1e-12);
        assert_relative_eq!(back.rot, pose.rot, epsilon = 1e-12);
    }

    #[test]
    fn schema_version_is_checked() {
        let mut scenario = sample();
        scenario.schema_version = 99;
        let json = serde_json::to_string(&scenario).unwrap();
        assert!(Scenario::from_json(&json).is_err());
    }

    #[test]
    fn grid_controller_requires_edge() {
        let mut scenario = sample();
        scenario.controller = ControllerKind::GridSquare;
        assert!(scenario.validate().is_err());
        scenario.grid_edge = Some(0.25);
        assert!(scenario.validate().is_ok());
    }

    #[test]
    fn default_travel_budget_scales_with_baseline() {
        let mut scenario = sample();
        scenario.travel_budget = None;
        assert_relative_eq!(scenario.travel_budget(), 0.1);
    }
}
