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

//! Realizing a relative next-best-view in the global frame.
//!
//! The camera descends the potential `psi = ||r - r*||^2 + ||R^T z - e3||^2`
//! by gradient flow on R^3 x SO(3). Rotational gradients are skew-symmetric
//! by construction, so the continuous flow stays on SO(3); the discrete
//! Euler integration re-orthonormalizes with a polar retraction. Barrier
//! potentials on the stereo field-of-view set keep every target visible to
//! both cameras along the way.

use nalgebra::{Matrix3, Vector3};

use crate::error::Error;
use crate::pose::{nearest_rotation, Pose};
use crate::scalar::{real, Real};
use crate::stereo::{CameraRig, RelativePoint};
use crate::Result;

/// Goal of the global-frame flow: position, estimated objective-target
/// location, and the unit direction from the goal to the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalSpec<T: Real> {
    pub r_star: Vector3<T>,
    pub target: Vector3<T>,
    pub z_hat: Vector3<T>,
}

/// Barrier weight and shape for the FoV constraints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierConfig<T: Real> {
    /// Penalty weight `rho >= 0`; zero disables the barrier.
    pub rho: T,
}

impl<T: Real> BarrierConfig<T> {
    pub fn disabled() -> Self {
        Self { rho: T::zero() }
    }
}

/// Barrier shape `g(a) = 1/a`, diverging at the FoV boundary.
#[inline]
fn barrier_g<T: Real>(a: T) -> T {
    T::one() / a
}

#[inline]
fn barrier_g_prime<T: Real>(a: T) -> T {
    -T::one() / (a * a)
}

/// Flow discretization controls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig<T: Real> {
    /// Euler step.
    pub step: T,
    /// Maximum integration time.
    pub duration: T,
    /// Steps between SO(3) retractions (1 = every step).
    pub retraction_interval: usize,
    /// Stop once the potential falls below this value.
    pub tolerance: T,
    /// Optional clamp on the path length of the position trajectory.
    pub max_travel: Option<T>,
}

impl<T: Real> Default for FlowConfig<T> {
    fn default() -> Self {
        Self {
            step: real(1e-3),
            duration: real(5.0),
            retraction_interval: 1,
            tolerance: real(1e-10),
            max_travel: None,
        }
    }
}

/// Builds the goal pose specification from the NBV output.
///
/// The goal position realizes the relative change of view in global
/// coordinates: with `p = R^T (x - r)`, reaching `p_next` at the prior
/// orientation requires `r* = r - R (p_next - p_prev)`. The goal viewing
/// direction points from `r*` at the estimated objective location.
pub fn goal_from_nbv<T: Real>(
    pose_prev: &Pose<T>,
    p_prev: &RelativePoint<T>,
    p_next: &RelativePoint<T>,
    target: Vector3<T>,
) -> Result<GoalSpec<T>> {
    let r_star = pose_prev.r - pose_prev.rot * (p_next.p - p_prev.p);
    let dir = target - r_star;
    let norm = dir.norm();
    if norm < real(1e-9) {
        return Err(Error::DegenerateGoal);
    }
    Ok(GoalSpec {
        r_star,
        target,
        z_hat: dir / norm,
    })
}

/// Pose potential `psi = ||r - r*||^2 + ||R^T z - e3||^2`.
pub fn psi<T: Real>(pose: &Pose<T>, goal: &GoalSpec<T>) -> T {
    let v = pose.rot.transpose() * goal.z_hat - Vector3::z();
    (pose.r - goal.r_star).norm_squared() + v.norm_squared()
}

/// Translational gradient, `2 (r - r*)`.
pub fn grad_psi_r<T: Real>(pose: &Pose<T>, goal: &GoalSpec<T>) -> Vector3<T> {
    (pose.r - goal.r_star) * real::<T>(2.0)
}

/// Rotational gradient, the skew-symmetric matrix
/// `R^T z (R^T z - e3)^T - (R^T z - e3) z^T R`.
pub fn grad_psi_rot<T: Real>(pose: &Pose<T>, goal: &GoalSpec<T>) -> Matrix3<T> {
    let rtz = pose.rot.transpose() * goal.z_hat;
    let v = rtz - Vector3::z();
    rtz * v.transpose() - v * rtz.transpose()
}

/// True iff a relative-frame point is visible to both cameras.
pub fn fov_contains<T: Real>(rig: &CameraRig<T>, p: &RelativePoint<T>) -> bool {
    let two_f = real::<T>(2.0) * rig.focal;
    let z = p.p.z;
    z > rig.min_depth()
        && p.p.x.abs() <= (rig.image_width * z - rig.baseline * rig.focal) / two_f
        && p.p.y.abs() <= z * rig.image_width / two_f
}

/// The three FoV barrier values for one relative point.
fn barrier_values<T: Real>(rig: &CameraRig<T>, p: &Vector3<T>) -> [T; 3] {
    let two_f = real::<T>(2.0) * rig.focal;
    let x_bound = (rig.image_width * p.z - rig.baseline * rig.focal) / two_f;
    let y_bound = rig.image_width * p.z / two_f;
    let z_min = rig.min_depth();
    [
        x_bound * x_bound - p.x * p.x,
        y_bound * y_bound - p.y * p.y,
        p.z * p.z - z_min * z_min,
    ]
}

/// Evaluates the barrier triple for every target estimate at `pose`.
///
/// All entries are positive exactly when every target is strictly inside
/// the stereo FoV.
pub fn barriers<T: Real>(
    rig: &CameraRig<T>,
    pose: &Pose<T>,
    target_estimates: &[Vector3<T>],
) -> Vec<[T; 3]> {
    target_estimates
        .iter()
        .map(|x| barrier_values(rig, &pose.to_relative(*x)))
        .collect()
}

/// Augmented potential `psi_hat = psi + (rho/n) sum_i sum_j g(phi_ij)`.
pub fn psi_hat<T: Real>(
    pose: &Pose<T>,
    goal: &GoalSpec<T>,
    rig: &CameraRig<T>,
    target_estimates: &[Vector3<T>],
    cfg: &BarrierConfig<T>,
) -> Result<T> {
    let base = psi(pose, goal);
    if cfg.rho == T::zero() || target_estimates.is_empty() {
        return Ok(base);
    }
    let mut penalty = T::zero();
    for (i, x_hat) in target_estimates.iter().enumerate() {
        let p = pose.to_relative(*x_hat);
        // The squared depth barrier cannot tell the two half-spaces apart.
        if p.z <= rig.min_depth() {
            return Err(Error::OutOfFov { index: 3 * i + 2 });
        }
        let phis = barrier_values(rig, &p);
        for (j, &phi) in phis.iter().enumerate() {
            if phi <= T::zero() {
                return Err(Error::OutOfFov { index: 3 * i + j });
            }
            penalty += barrier_g(phi);
        }
    }
    let n = real::<T>(target_estimates.len() as f64);
    Ok(base + cfg.rho / n * penalty)
}

/// Gradients of the augmented potential with respect to position and
/// rotation. The rotational part is exactly skew-symmetric.
pub fn grad_psi_hat<T: Real>(
    pose: &Pose<T>,
    goal: &GoalSpec<T>,
    rig: &CameraRig<T>,
    target_estimates: &[Vector3<T>],
    cfg: &BarrierConfig<T>,
) -> Result<(Vector3<T>, Matrix3<T>)> {
    let mut grad_r = grad_psi_r(pose, goal);
    let mut grad_rot = grad_psi_rot(pose, goal);
    if cfg.rho == T::zero() || target_estimates.is_empty() {
        return Ok((grad_r, grad_rot));
    }
    let n = real::<T>(target_estimates.len() as f64);
    let weight = cfg.rho / n;
    let two = real::<T>(2.0);
    let two_f = two * rig.focal;
    let w_over_2f = rig.image_width / two_f;

    for (i, x_hat) in target_estimates.iter().enumerate() {
        let offset = x_hat - pose.r;
        let p = pose.rot.transpose() * offset;
        if p.z <= rig.min_depth() {
            return Err(Error::OutOfFov { index: 3 * i + 2 });
        }
        let phis = barrier_values(rig, &p);
        for (j, &phi) in phis.iter().enumerate() {
            if phi <= T::zero() {
                return Err(Error::OutOfFov { index: 3 * i + j });
            }
        }
        let x_bound = (rig.image_width * p.z - rig.baseline * rig.focal) / two_f;
        let y_bound = rig.image_width * p.z / two_f;
        // d(phi_j)/d(p_x, p_y, p_z) per barrier.
        let dphi = [
            Vector3::new(-two * p.x, T::zero(), two * x_bound * w_over_2f),
            Vector3::new(T::zero(), -two * p.y, two * y_bound * w_over_2f),
            Vector3::new(T::zero(), T::zero(), two * p.z),
        ];
        // Gradients of the relative coordinates themselves.
        let grad_r_coords = [
            -Vector3::from(pose.rot.column(0)),
            -Vector3::from(pose.rot.column(1)),
            -Vector3::from(pose.rot.column(2)),
        ];
        let half = real::<T>(0.5);
        let grad_rot_coord = |axis: usize| -> Matrix3<T> {
            let e = Matrix3::identity().column(axis).into_owned();
            (p * e.transpose() - e * p.transpose()) * half
        };
        for (j, &phi) in phis.iter().enumerate() {
            let gp = weight * barrier_g_prime(phi);
            for coord in 0..3 {
                let c = dphi[j][coord];
                if c != T::zero() {
                    grad_r += grad_r_coords[coord] * (gp * c);
                    grad_rot += grad_rot_coord(coord) * (gp * c);
                }
            }
        }
    }
    Ok((grad_r, grad_rot))
}

/// One recorded pose of the flow trajectory.
pub type Trajectory<T> = Vec<Pose<T>>;

/// Integrates the gradient flow `r' = -grad_r psi_hat`,
/// `R' = -R grad_R psi_hat` with forward Euler.
///
/// Stops when the potential drops below `tolerance`, the duration elapses,
/// or the optional travel clamp binds. A step that increases the potential
/// is retried with a halved step; if the minimum step still increases it,
/// the integration fails with [`Error::StepDiverged`].
pub fn integrate_flow<T: Real>(
    pose0: &Pose<T>,
    goal: &GoalSpec<T>,
    rig: &CameraRig<T>,
    target_estimates: &[Vector3<T>],
    barrier_cfg: &BarrierConfig<T>,
    flow_cfg: &FlowConfig<T>,
) -> Result<Trajectory<T>> {
    let mut trajectory = vec![*pose0];
    let mut pose = *pose0;
    let mut value = psi_hat(&pose, goal, rig, target_estimates, barrier_cfg)?;
    let mut elapsed = T::zero();
    let mut travelled = T::zero();
    let mut steps_since_retraction = 0usize;
    let ascent_tol = real::<T>(1e-9) * flow_cfg.step;

    while elapsed < flow_cfg.duration && value > flow_cfg.tolerance {
        let (g_r, g_rot) = grad_psi_hat(&pose, goal, rig, target_estimates, barrier_cfg)?;
        let mut step = flow_cfg.step.min(flow_cfg.duration - elapsed);
        let mut accepted = None;
        for _ in 0..30 {
            let mut candidate = Pose {
                r: pose.r - g_r * step,
                rot: pose.rot * (Matrix3::identity() - g_rot * step),
            };
            steps_since_retraction += 1;
            if steps_since_retraction >= flow_cfg.retraction_interval {
                candidate.rot = nearest_rotation(&candidate.rot);
                steps_since_retraction = 0;
            }
            match psi_hat(&candidate, goal, rig, target_estimates, barrier_cfg) {
                Ok(v) if v <= value + ascent_tol => {
                    accepted = Some((candidate, v, step));
                    break;
                }
                // Potential increased or a target left the FoV: the step
                // was too large, halve and retry.
                Ok(_) | Err(Error::OutOfFov { .. }) => step *= real(0.5),
                Err(e) => return Err(e),
            }
        }
        let Some((next, next_value, taken)) = accepted else {
            return Err(Error::StepDiverged);
        };
        if let Some(max_travel) = flow_cfg.max_travel {
            let hop = (next.r - pose.r).norm();
            if travelled + hop > max_travel {
                // Shorten the final hop so the clamp binds exactly.
                let remaining = max_travel - travelled;
                let scale = if hop > T::zero() {
                    remaining / hop
                } else {
                    T::zero()
                };
                let clamped = Pose {
                    r: pose.r + (next.r - pose.r) * scale,
                    rot: next.rot,
                };
                trajectory.push(clamped);
                return Ok(trajectory);
            }
            travelled += hop;
        }
        pose = next;
        value = next_value;
        elapsed += taken;
        trajectory.push(pose);
    }
    Ok(trajectory)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rig() -> CameraRig<f64> {
        CameraRig::from_fov(1.0, 1024.0, 1024.0, 35.0f64.to_radians())
    }

    fn random_pose(rng: &mut ChaCha8Rng) -> Pose<f64> {
        let r = Vector3::new(
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
        );
        let target = Vector3::new(
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
            rng.gen_range(-5.0..5.0),
        );
        Pose::looking_at(r, target).unwrap_or_else(|_| Pose::identity())
    }

    #[test]
    fn goal_from_nbv_hand_case() {
        let pose = Pose::identity();
        let p_prev = RelativePoint::new(Vector3::new(0.0, 0.0, 5.0));
        let p_next = RelativePoint::new(Vector3::new(0.0, 0.0, 4.0));
        let goal = goal_from_nbv(&pose, &p_prev, &p_next, Vector3::new(0.0, 0.0, 5.0)).unwrap();
        // Depth shrinks by one, so the camera advances one unit along its
        // viewing axis.
        assert_relative_eq!(goal.r_star, Vector3::new(0.0, 0.0, 1.0), epsilon = 1e-14);
        assert_relative_eq!(goal.z_hat, Vector3::new(0.0, 0.0, 1.0), epsilon = 1e-14);
    }

    #[test]
    fn goal_unchanged_when_view_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pose = random_pose(&mut rng);
        let p = RelativePoint::new(Vector3::new(0.1, 0.2, 8.0));
        let goal = goal_from_nbv(&pose, &p, &p, Vector3::new(10.0, 0.0, 0.0)).unwrap();
        assert_relative_eq!(goal.r_star, pose.r, epsilon = 1e-14);
    }

    #[test]
    fn degenerate_goal_rejected() {
        let pose = Pose::identity();
        let p = RelativePoint::new(Vector3::new(0.0, 0.0, 5.0));
        let err = goal_from_nbv(&pose, &p, &p, Vector3::zeros());
        assert!(matches!(err, Err(Error::DegenerateGoal)));
    }

    #[test]
    fn psi_zero_at_minimizer_and_bounded_orientation_term() {
        let goal = GoalSpec {
            r_star: Vector3::new(1.0, 2.0, 3.0),
            target: Vector3::new(1.0, 2.0, 13.0),
            z_hat: Vector3::z(),
        };
        let pose = Pose {
            r: goal.r_star,
            rot: Matrix3::identity(),
        };
        assert_relative_eq!(psi(&pose, &goal), 0.0, epsilon = 1e-14);

        // Orthogonal misalignment: orientation term is exactly 2.
        let goal_x = GoalSpec {
            r_star: Vector3::zeros(),
            target: Vector3::x() * 5.0,
            z_hat: Vector3::x(),
        };
        let pose = Pose::identity();
        assert_relative_eq!(psi(&pose, &goal_x), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn grad_psi_r_is_linear() {
        let goal = GoalSpec {
            r_star: Vector3::zeros(),
            target: Vector3::z() * 5.0,
            z_hat: Vector3::z(),
        };
        let pose = Pose {
            r: Vector3::x(),
            rot: Matrix3::identity(),
        };
        assert_relative_eq!(
            grad_psi_r(&pose, &goal),
            Vector3::new(2.0, 0.0, 0.0),
            epsilon = 1e-14
        );
    }

    #[test]
    fn grad_psi_rot_hand_case_and_skewness() {
        let goal = GoalSpec {
            r_star: Vector3::zeros(),
            target: Vector3::x() * 5.0,
            z_hat: Vector3::x(),
        };
        let pose = Pose::identity();
        let g = grad_psi_rot(&pose, &goal);
        let mut expected = Matrix3::zeros();
        expected[(2, 0)] = 1.0;
        expected[(0, 2)] = -1.0;
        assert_relative_eq!(g, expected, epsilon = 1e-14);
        assert_relative_eq!(g + g.transpose(), Matrix3::zeros(), epsilon = 1e-16);

        // Aligned: gradient vanishes.
        let aligned = GoalSpec {
            r_star: Vector3::zeros(),
            target: Vector3::z() * 5.0,
            z_hat: Vector3::z(),
        };
        assert_relative_eq!(
            grad_psi_rot(&pose, &aligned),
            Matrix3::zeros(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn fov_membership_cases() {
        let rig = rig();
        assert!(fov_contains(&rig, &RelativePoint::new(Vector3::new(0.0, 0.0, 1.0))));
        assert!(!fov_contains(&rig, &RelativePoint::new(Vector3::new(0.0, 0.0, 0.5))));
        assert!(!fov_contains(&rig, &RelativePoint::new(Vector3::new(10.0, 0.0, 1.0))));
    }

    #[test]
    fn barrier_boundary_values() {
        let rig = rig();
        let pose = Pose::identity();
        let z_min = rig.min_depth();
        let phis = barriers(&rig, &pose, &[Vector3::new(0.0, 0.0, z_min)]);
        assert_relative_eq!(phis[0][2], 0.0, epsilon = 1e-12);

        // x on the first barrier boundary.
        let z = 5.0;
        let x_bound = (rig.image_width * z - rig.baseline * rig.focal) / (2.0 * rig.focal);
        let phis = barriers(&rig, &pose, &[Vector3::new(x_bound, 0.0, z)]);
        assert!(phis[0][0].abs() < 1e-9);

        // Well inside: all positive.
        let phis = barriers(&rig, &pose, &[Vector3::new(0.1, 0.1, 10.0)]);
        assert!(phis[0].iter().all(|&p| p > 0.0));
    }

    #[test]
    fn psi_hat_reduces_to_psi_without_penalty() {
        let rig = rig();
        let goal = GoalSpec {
            r_star: Vector3::zeros(),
            target: Vector3::z() * 5.0,
            z_hat: Vector3::z(),
        };
        let pose = Pose {
            r: Vector3::new(0.5, 0.0, 0.0),
            rot: Matrix3::identity(),
        };
        let targets = vec![Vector3::new(0.0, 0.0, 10.0)];
        let base = psi(&pose, &goal);
        let hat = psi_hat(&pose, &goal, &rig, &targets, &BarrierConfig::disabled()).unwrap();
        assert_relative_eq!(base, hat, epsilon = 1e-14);

        // Out-of-FoV target makes the barrier fail.
        let behind = vec![Vector3::new(0.0, 0.0, -1.0)];
        let err = psi_hat(&pose, &goal, &rig, &behind, &BarrierConfig { rho: 1.0 });
        assert!(matches!(err, Err(Error::OutOfFov { .. })));
    }

    #[test]
    fn penalty_normalized_by_target_count() {
        let rig = rig();
        let goal = GoalSpec {
            r_star: Vector3::zeros(),
            target: Vector3::z() * 10.0,
            z_hat: Vector3::z(),
        };
        let pose = Pose::identity();
        let cfg = BarrierConfig { rho: 100.0 };
        let one = vec![Vector3::new(0.0, 0.0, 10.0)];
        let two = vec![Vector3::new(0.0, 0.0, 10.0), Vector3::new(0.0, 0.0, 10.0)];
        let h1 = psi_hat(&pose, &goal, &rig, &one, &cfg).unwrap();
        let h2 = psi_hat(&pose, &goal, &rig, &two, &cfg).unwrap();
        assert_relative_eq!(h1, h2, epsilon = 1e-12);
    }

    #[test]
    fn grad_psi_hat_reduces_without_penalty_and_is_skew() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rig = rig();
        let goal = GoalSpec {
            r_star: Vector3::zeros(),
            target: Vector3::z() * 10.0,
            z_hat: Vector3::z(),
        };
        let pose = random_pose(&mut rng);
        let targets = vec![pose.to_global(Vector3::new(0.2, -0.1, 8.0))];
        let (gr0, gq0) =
            grad_psi_hat(&pose, &goal, &rig, &targets, &BarrierConfig::disabled()).unwrap();
        assert_relative_eq!(gr0, grad_psi_r(&pose, &goal), epsilon = 1e-14);
        assert_relative_eq!(gq0, grad_psi_rot(&pose, &goal), epsilon = 1e-14);

        let (_, gq) =
            grad_psi_hat(&pose, &goal, &rig, &targets, &BarrierConfig { rho: 100.0 }).unwrap();
        assert_relative_eq!(gq + gq.transpose(), Matrix3::zeros(), epsilon = 1e-16);
    }

    #[test]
    fn grad_psi_hat_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rig = rig();
        let cfg = BarrierConfig { rho: 10.0 };
        let mut checked = 0;
        while checked < 50 {
            let pose = random_pose(&mut rng);
            // Targets well inside the FoV of this pose.
            let targets: Vec<_> = (0..3)
                .map(|_| {
                    pose.to_global(Vector3::new(
                        rng.gen_range(-0.5..0.5),
                        rng.gen_range(-0.5..0.5),
                        rng.gen_range(5.0..15.0),
                    ))
                })
                .collect();
            let goal = GoalSpec {
                r_star: pose.r
                    + Vector3::new(
                        rng.gen_range(-0.5..0.5),
                        rng.gen_range(-0.5..0.5),
                        rng.gen_range(-0.5..0.5),
                    ),
                target: targets[0],
                z_hat: (targets[0] - pose.r).normalize(),
            };
            let Ok((g_r, g_rot)) = grad_psi_hat(&pose, &goal, &rig, &targets, &cfg) else {
                continue;
            };
            let step = 1e-6;
            // Translational finite differences.
            for coord in 0..3 {
                let mut hi = pose;
                let mut lo = pose;
                hi.r[coord] += step;
                lo.r[coord] -= step;
                let (Ok(fh), Ok(fl)) = (
                    psi_hat(&hi, &goal, &rig, &targets, &cfg),
                    psi_hat(&lo, &goal, &rig, &targets, &cfg),
                ) else {
                    continue;
                };
                let fd = (fh - fl) / (2.0 * step);
                let scale = g_r.norm().max(1.0);
                assert!(
                    (g_r[coord] - fd).abs() / scale < 1e-5,
                    "translational coord {coord}: {} vs {}",
                    g_r[coord],
                    fd
                );
            }
            // Directional rotational differences along skew generators.
            for axis in 0..3 {
                let mut omega = Matrix3::zeros();
                let (a, b) = [(1, 2), (2, 0), (0, 1)][axis];
                omega[(a, b)] = -1.0;
                omega[(b, a)] = 1.0;
                let hi = Pose {
                    r: pose.r,
                    rot: pose.rot * (Matrix3::identity() + omega * step),
                };
                let lo = Pose {
                    r: pose.r,
                    rot: pose.rot * (Matrix3::identity() - omega * step),
                };
                let (Ok(fh), Ok(fl)) = (
                    psi_hat(&hi, &goal, &rig, &targets, &cfg),
                    psi_hat(&lo, &goal, &rig, &targets, &cfg),
                ) else {
                    continue;
                };
                let fd = (fh - fl) / (2.0 * step);
                // Directional derivative along Omega is <grad, Omega>.
                let analytic = (g_rot.transpose() * omega).trace();
                let scale = g_rot.norm().max(1.0);
                assert!(
                    (analytic - fd).abs() / scale < 1e-4,
                    "rotational axis {axis}: {analytic} vs {fd}"
                );
            }
            checked += 1;
        }
    }

    #[test]
    fn flow_stationary_at_minimizer() {
        let rig = rig();
        let goal = GoalSpec {
            r_star: Vector3::zeros(),
            target: Vector3::z() * 10.0,
            z_hat: Vector3::z(),
        };
        let pose0 = Pose::identity();
        let traj = integrate_flow(
            &pose0,
            &goal,
            &rig,
            &[],
            &BarrierConfig::disabled(),
            &FlowConfig {
                duration: 0.1,
                ..FlowConfig::default()
            },
        )
        .unwrap();
        let last = traj.last().unwrap();
        assert_relative_eq!(last.r, pose0.r, epsilon = 1e-12);
    }

    #[test]
    fn flow_translation_matches_closed_form() {
        // With rho = 0 and aligned orientation the position ODE is
        // r' = -2 (r - r*), so r(t) = r* + e^{-2t} (r0 - r*).
        let rig = rig();
        let goal = GoalSpec {
            r_star: Vector3::zeros(),
            target: Vector3::z() * 10.0,
            z_hat: Vector3::z(),
        };
        let pose0 = Pose {
            r: Vector3::new(1.0, -2.0, 0.5),
            rot: Matrix3::identity(),
        };
        let duration = 1.0;
        let traj = integrate_flow(
            &pose0,
            &goal,
            &rig,
            &[],
            &BarrierConfig::disabled(),
            &FlowConfig {
                step: 1e-3,
                duration,
                tolerance: 0.0,
                ..FlowConfig::default()
            },
        )
        .unwrap();
        let expected = pose0.r * (-2.0f64 * duration).exp();
        let got = traj.last().unwrap().r;
        assert!(
            (got - expected).norm() / expected.norm() < 0.01,
            "{got:?} vs {expected:?}"
        );
    }

    #[test]
    fn flow_converges_to_goal() {
        let rig = rig();
        let target = Vector3::new(3.0, 1.0, 2.0);
        let goal = GoalSpec {
            r_star: Vector3::new(1.0, 0.0, 0.0),
            target,
            z_hat: (target - Vector3::new(1.0, 0.0, 0.0)).normalize(),
        };
        let pose0 = Pose::looking_at(Vector3::new(-2.0, 1.0, -1.0), Vector3::new(5.0, 5.0, 5.0))
            .unwrap();
        let traj = integrate_flow(
            &pose0,
            &goal,
            &rig,
            &[],
            &BarrierConfig::disabled(),
            &FlowConfig {
                step: 1e-3,
                duration: 20.0,
                tolerance: 1e-8,
                ..FlowConfig::default()
            },
        )
        .unwrap();
        let last = traj.last().unwrap();
        assert!((last.r - goal.r_star).norm() < 1e-3);
        let v = last.rot.transpose() * goal.z_hat - Vector3::z();
        assert!(v.norm() < 1e-3, "orientation misalignment {}", v.norm());
    }

    #[test]
    fn barrier_keeps_targets_in_fov() {
        let rig = rig();
        // Start looking at a target near the FoV edge and ask the flow to
        // translate sideways; the barrier must keep the target visible.
        let pose0 = Pose::looking_at(Vector3::zeros(), Vector3::z() * 10.0).unwrap();
        let targets = vec![Vector3::new(1.5, 0.0, 5.0), Vector3::new(0.0, 0.0, 8.0)];
        let goal = GoalSpec {
            r_star: Vector3::new(-1.0, 0.0, 0.0),
            target: targets[1],
            z_hat: (targets[1] - Vector3::new(-1.0, 0.0, 0.0)).normalize(),
        };
        let traj = integrate_flow(
            &pose0,
            &goal,
            &rig,
            &targets,
            &BarrierConfig { rho: 100.0 },
            &FlowConfig {
                step: 1e-3,
                duration: 5.0,
                ..FlowConfig::default()
            },
        )
        .unwrap();
        for pose in &traj {
            for phis in barriers(&rig, pose, &targets) {
                assert!(phis.iter().all(|&p| p > 0.0), "barrier violated");
            }
        }
    }

    #[test]
    fn travel_clamp_binds_exactly() {
        let rig = rig();
        let goal = GoalSpec {
            r_star: Vector3::new(5.0, 0.0, 0.0),
            target: Vector3::new(15.0, 0.0, 0.0),
            z_hat: Vector3::x(),
        };
        let pose0 = Pose::looking_at(Vector3::zeros(), Vector3::new(15.0, 0.0, 0.0)).unwrap();
        let traj = integrate_flow(
            &pose0,
            &goal,
            &rig,
            &[],
            &BarrierConfig::disabled(),
            &FlowConfig {
                step: 1e-3,
                duration: 50.0,
                tolerance: 0.0,
                max_travel: Some(0.5),
                ..FlowConfig::default()
            },
        )
        .unwrap();
        let mut path = 0.0;
        for pair in traj.windows(2) {
            path += (pair[1].r - pair[0].r).norm();
        }
        assert!((path - 0.5).abs() < 1e-9, "path length {path}");
    }
}
