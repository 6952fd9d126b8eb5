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

//! Baseline controllers the view planner is compared against.

use nalgebra::{Matrix3, Vector3};

use nbv_core::controller::barriers;
use nbv_core::planner::{uncertainty_potential, ObjectiveTarget};
use nbv_core::pose::Pose;
use nbv_core::stereo::{CameraRig, NoiseModel, RelativePoint};

/// Straight-line approach toward the estimated cluster centroid. Latches
/// into a permanent halt once any FoV barrier drops below its configured
/// fraction of the value it had at the start of the trial.
#[derive(Debug, Clone, Default)]
pub struct StraightState {
    halted: bool,
    initial_barriers: Option<Vec<[f64; 3]>>,
}

impl StraightState {
    pub fn halted(&self) -> bool {
        self.halted
    }
}

pub fn straight_baseline_step(
    state: &mut StraightState,
    rig: &CameraRig<f64>,
    pose: &Pose<f64>,
    estimates: &[Vector3<f64>],
    budget: f64,
    halt_fraction: f64,
) -> Pose<f64> {
    if state.halted || estimates.is_empty() {
        return *pose;
    }
    let centroid = estimates.iter().sum::<Vector3<f64>>() / estimates.len() as f64;
    if state.initial_barriers.is_none() {
        state.initial_barriers = Some(barriers(rig, pose, estimates));
    }
    let offset = centroid - pose.r;
    let dist = offset.norm();
    if dist < 1e-12 {
        state.halted = true;
        return *pose;
    }
    let hop = budget.min(dist);
    let candidate_r = pose.r + offset / dist * hop;
    let Ok(candidate) = Pose::looking_at(candidate_r, centroid) else {
        state.halted = true;
        return *pose;
    };
    let initial = state.initial_barriers.as_ref().unwrap();
    let now = barriers(rig, &candidate, estimates);
    for (phis, phis0) in now.iter().zip(initial) {
        for (phi, phi0) in phis.iter().zip(phis0) {
            if *phi < halt_fraction * *phi0 {
                state.halted = true;
                return *pose;
            }
        }
    }
    candidate
}

/// Circular orbit about the cluster. The circle is fixed on the first call:
/// horizontal, through the current position, centered over the estimated
/// centroid.
#[derive(Debug, Clone, Default)]
pub struct CircleState {
    orbit: Option<Orbit>,
}

#[derive(Debug, Clone, Copy)]
struct Orbit {
    centroid: Vector3<f64>,
    center: Vector3<f64>,
    radius: f64,
    angle: f64,
}

pub fn circle_baseline_step(
    state: &mut CircleState,
    pose: &Pose<f64>,
    estimates: &[Vector3<f64>],
    budget: f64,
) -> Pose<f64> {
    let orbit = state.orbit.get_or_insert_with(|| {
        let centroid = estimates.iter().sum::<Vector3<f64>>() / estimates.len().max(1) as f64;
        let center = Vector3::new(centroid.x, centroid.y, pose.r.z);
        let offset = pose.r - center;
        Orbit {
            centroid,
            center,
            radius: offset.norm().max(1e-9),
            angle: offset.y.atan2(offset.x),
        }
    });
    orbit.angle += budget / orbit.radius;
    let r = orbit.center
        + Vector3::new(orbit.angle.cos(), orbit.angle.sin(), 0.0) * orbit.radius;
    Pose::looking_at(r, orbit.centroid).unwrap_or(*pose)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    Square,
    Triangular,
}

/// Candidate moves in the global x-y plane, stay-in-place first so ties
/// keep the pose.
fn grid_moves(kind: GridKind, edge: f64) -> Vec<Vector3<f64>> {
    let mut moves = vec![Vector3::zeros()];
    match kind {
        GridKind::Square => {
            // 4-connected: axis moves only, so every hop costs one edge.
            for (dx, dy) in [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)] {
                moves.push(Vector3::new(dx * edge, dy * edge, 0.0));
            }
        }
        GridKind::Triangular => {
            for k in 0..6 {
                let theta = k as f64 * std::f64::consts::FRAC_PI_3;
                moves.push(Vector3::new(theta.cos(), theta.sin(), 0.0) * edge);
            }
        }
    }
    moves
}

/// One step of the exhaustive grid heuristic: evaluate the predicted
/// worst-target fused trace at every reachable neighbor node (orientation
/// toward the worst-localized target's estimate) and move to the argmin.
///
/// Returns the chosen pose and the distance moved. Nodes that would exceed
/// `remaining_budget` or lose a target from the FoV are skipped.
pub fn grid_heuristic_step(
    kind: GridKind,
    edge: f64,
    rig: &CameraRig<f64>,
    pose: &Pose<f64>,
    targets: &[(Matrix3<f64>, Vector3<f64>)],
    noise: &NoiseModel<f64>,
    remaining_budget: f64,
) -> (Pose<f64>, f64) {
    let mut worst = 0;
    for (i, (cov, _)) in targets.iter().enumerate().skip(1) {
        if cov.trace() > targets[worst].0.trace() {
            worst = i;
        }
    }
    let aim = targets[worst].1;

    let mut best: Option<(f64, Pose<f64>, f64)> = None;
    for delta in grid_moves(kind, edge) {
        let hop = delta.norm();
        if hop > remaining_budget + 1e-12 {
            continue;
        }
        let r = pose.r + delta;
        let candidate = if hop == 0.0 {
            *pose
        } else {
            match Pose::looking_at(r, aim) {
                Ok(p) => p,
                Err(_) => continue,
            }
        };
        let mut objective = f64::NEG_INFINITY;
        let mut feasible = true;
        for (cov, x_hat) in targets {
            let obj = ObjectiveTarget {
                prior_cov: *cov,
                predicted_position: *x_hat,
                relative_position: RelativePoint::new(candidate.to_relative(*x_hat)),
                index: None,
            };
            match uncertainty_potential(&obj, rig, &candidate.rot, noise) {
                Ok(h) => objective = objective.max(h),
                Err(_) => {
                    feasible = false;
                    break;
                }
            }
        }
        if !feasible {
            continue;
        }
        // Strict improvement only, so earlier nodes win ties.
        if best.map_or(true, |(b, _, _)| objective < b - 1e-15) {
            best = Some((objective, candidate, hop));
        }
    }
    match best {
        Some((_, pose, hop)) => (pose, hop),
        None => (*pose, 0.0),
    }
}
