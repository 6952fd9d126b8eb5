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

//! Mobile-target trajectories: targets orbiting the five-ring pattern.

use nalgebra::Vector3;

use crate::scenario::RingPattern;

/// One target's parametric circular path in the global x-y plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobileTrajectory {
    pub center: Vector3<f64>,
    pub radius: f64,
    pub rate: f64,
    pub phase: f64,
}

impl MobileTrajectory {
    pub fn position(&self, t: f64) -> Vector3<f64> {
        let theta = self.phase + self.rate * t;
        self.center + Vector3::new(theta.cos(), theta.sin(), 0.0) * self.radius
    }
}

/// Ring centers for the three-over-two layout with the standard overlap:
/// the top row sits one radius above the pattern center, the bottom row one
/// radius below, with the bottom centers halfway between the top ones.
pub fn ring_centers(pattern: &RingPattern) -> [Vector3<f64>; 5] {
    let c = Vector3::from(pattern.center);
    let s = pattern.spacing;
    let dx = pattern.radius;
    [
        c + Vector3::new(dx, -s, 0.0),
        c + Vector3::new(dx, 0.0, 0.0),
        c + Vector3::new(dx, s, 0.0),
        c + Vector3::new(-dx, -s / 2.0, 0.0),
        c + Vector3::new(-dx, s / 2.0, 0.0),
    ]
}

/// One trajectory per target; targets beyond the fifth reuse rings in
/// order. Phases are staggered so targets start spread around their rings.
pub fn ring_trajectories(pattern: &RingPattern, n_targets: usize) -> Vec<MobileTrajectory> {
    let centers = ring_centers(pattern);
    (0..n_targets)
        .map(|i| MobileTrajectory {
            center: centers[i % 5],
            radius: pattern.radius,
            rate: pattern.rate,
            phase: i as f64 * std::f64::consts::FRAC_PI_3,
        })
        .collect()
}

/// Positions of every target at time `t`.
pub fn olympic_targets(t: f64, trajectories: &[MobileTrajectory]) -> Vec<Vector3<f64>> {
    trajectories.iter().map(|traj| traj.position(t)).collect()
}
