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

//! Closed-loop trial execution and Monte-Carlo batching.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use nbv_core::calibration::RegressionModel;
use nbv_core::controller::{fov_contains, goal_from_nbv, integrate_flow, BarrierConfig};
use nbv_core::kalman::{
    kf_predict, kf_update, phi_const_accel, phi_static, process_noise, ProcessNoise,
    StateCovariance, TargetState, TransitionModel,
};
use nbv_core::planner::{next_best_view, select_objective, Objective};
use nbv_core::pose::Pose;
use nbv_core::stereo::{
    measurement_covariance, project, quantize, triangulate, PixelTriple, RelativePoint,
};

use crate::controllers::{
    circle_baseline_step, grid_heuristic_step, straight_baseline_step, CircleState, GridKind,
    StraightState,
};
use crate::olympic::{olympic_targets, ring_trajectories};
use crate::scenario::{ControllerKind, Scenario, TargetMotion};
use crate::SimError;

/// One CSV row: metrics of one target at one observation instant.
#[derive(Debug, Clone, Copy)]
pub struct Record {
    pub trial: usize,
    pub iter: usize,
    pub controller: ControllerKind,
    pub target_id: usize,
    pub error: f64,
    pub trace: f64,
    pub objective: f64,
    pub pose: Pose<f64>,
}

#[derive(Debug, Clone)]
pub struct TrialResult {
    pub records: Vec<Record>,
    /// Per-iteration camera displacement (zero on the final iteration).
    pub displacements: Vec<f64>,
    /// Diagnostic message when a numeric error aborted the trial early.
    pub aborted: Option<String>,
}

/// How the motion budget is supplied.
#[derive(Debug, Clone, Copy)]
pub enum BudgetOverride<'a> {
    /// Use the scenario's per-iteration travel budget.
    Scenario,
    /// Exact per-iteration displacements to match (comparison mode).
    PerIteration(&'a [f64]),
    /// Total path-length budget over the whole trial (grid comparisons).
    Total(f64),
}

struct TargetFilter {
    state: TargetState<f64>,
    cov: StateCovariance<f64>,
}

fn true_positions(scenario: &Scenario, layout: &[Vector3<f64>], t: f64) -> Vec<Vector3<f64>> {
    match &scenario.target_motion {
        TargetMotion::Static => layout.to_vec(),
        TargetMotion::OlympicRings(pattern) => {
            olympic_targets(t, &ring_trajectories(pattern, scenario.n_targets))
        }
    }
}

fn sample_layout(scenario: &Scenario, rng: &mut ChaCha8Rng) -> Vec<Vector3<f64>> {
    match &scenario.target_motion {
        TargetMotion::Static => {
            let c = Vector3::from(scenario.target_layout.center);
            let h = scenario.target_layout.extent / 2.0;
            (0..scenario.n_targets)
                .map(|_| {
                    c + Vector3::new(
                        rng.gen_range(-h..=h),
                        rng.gen_range(-h..=h),
                        rng.gen_range(-h..=h),
                    )
                })
                .collect()
        }
        // Mobile targets start on their rings; the layout cube is unused.
        TargetMotion::OlympicRings(pattern) => {
            olympic_targets(0.0, &ring_trajectories(pattern, scenario.n_targets))
        }
    }
}

/// Runs one closed-loop trial. Deterministic given `(scenario, seed)`.
pub fn run_trial(
    scenario: &Scenario,
    trial_idx: usize,
    seed: u64,
    correction: Option<&RegressionModel<f64>>,
    budget: BudgetOverride<'_>,
) -> Result<TrialResult, SimError> {
    let rig = scenario.rig.rig();
    let noise = scenario.noise_model()?;
    let mut pose = scenario.initial_pose.pose()?;
    let planner_cfg = scenario.planner_cfg.config();
    let barrier_cfg = BarrierConfig {
        rho: scenario.barrier_cfg.rho,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = sample_layout(scenario, &mut rng);

    for x in &true_positions(scenario, &layout, 0.0) {
        if !fov_contains(&rig, &RelativePoint::new(pose.to_relative(*x))) {
            return Err(SimError::InitialPoseOutOfFov);
        }
    }

    let (model, w): (TransitionModel<f64>, ProcessNoise<f64>) = match scenario.target_motion {
        TargetMotion::Static => (
            phi_static(),
            process_noise(scenario.dt)?.scaled(scenario.process_noise_scale),
        ),
        TargetMotion::OlympicRings(_) => (
            phi_const_accel(scenario.dt)?,
            process_noise(scenario.dt)?.scaled(scenario.process_noise_scale),
        ),
    };

    let mut filters: Vec<Option<TargetFilter>> = (0..scenario.n_targets).map(|_| None).collect();
    let mut records = Vec::with_capacity(scenario.n_observations * scenario.n_targets);
    let mut displacements = vec![0.0; scenario.n_observations];
    let mut straight = StraightState::default();
    let mut circle = CircleState::default();
    let mut remaining_total = match budget {
        BudgetOverride::Total(total) => total,
        _ => f64::INFINITY,
    };

    let mut abort: Option<String> = None;
    'iterations: for k in 0..scenario.n_observations {
        let t = k as f64 * scenario.dt;
        let truths = true_positions(scenario, &layout, t);

        if k > 0 {
            for filter in filters.iter_mut().flatten() {
                let (state, cov) = kf_predict(&filter.state, &filter.cov, &model, &w);
                filter.state = state;
                filter.cov = cov;
            }
        }

        for (i, truth) in truths.iter().enumerate() {
            let p_rel = RelativePoint::new(pose.to_relative(*truth));
            // Pixel noise is drawn even for failed projections so the RNG
            // stream does not depend on control decisions.
            let jitter: [f64; 3] = [
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ];
            let observation = (|| -> nbv_core::Result<(Vector3<f64>, _)> {
                let mut px = project(&rig, &p_rel)?;
                if scenario.additive_pixel_std > 0.0 {
                    px = PixelTriple::new(
                        px.x_left + scenario.additive_pixel_std * jitter[0],
                        px.x_right + scenario.additive_pixel_std * jitter[1],
                        px.y + scenario.additive_pixel_std * jitter[2],
                    );
                }
                if scenario.quantize {
                    px = quantize(&px);
                }
                if let Some(model) = correction {
                    px = model.correct(&px)?;
                }
                let tri = triangulate(&rig, &px)?;
                let sigma = measurement_covariance(&rig, &px, &pose.rot, &noise)?;
                Ok((pose.to_global(tri.p), sigma))
            })();
            let (meas, sigma) = match observation {
                Ok(ok) => ok,
                Err(e) => {
                    abort = Some(format!("iteration {k}, target {i}: {e}"));
                    break 'iterations;
                }
            };
            match &mut filters[i] {
                Some(filter) => {
                    match kf_update(&filter.state, &filter.cov, &meas, &sigma) {
                        Ok((state, cov)) => {
                            filter.state = state;
                            filter.cov = cov;
                        }
                        Err(e) => {
                            abort = Some(format!("iteration {k}, target {i}: {e}"));
                            break 'iterations;
                        }
                    }
                }
                slot @ None => {
                    *slot = Some(TargetFilter {
                        state: TargetState::from_position(meas),
                        cov: StateCovariance::from_first_observation(
                            &sigma.sigma,
                            scenario.kf_loose_prior,
                        ),
                    });
                }
            }
        }

        let traces: Vec<f64> = filters
            .iter()
            .map(|f| f.as_ref().unwrap().cov.position_block().trace())
            .collect();
        let objective = match scenario.controller {
            ControllerKind::NbvCentroid => traces.iter().sum::<f64>() / traces.len() as f64,
            _ => traces.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        };
        for (i, truth) in truths.iter().enumerate() {
            let filter = filters[i].as_ref().unwrap();
            records.push(Record {
                trial: trial_idx,
                iter: k,
                controller: scenario.controller,
                target_id: i,
                error: (filter.state.position() - truth).norm(),
                trace: traces[i],
                objective,
                pose,
            });
        }

        if k + 1 == scenario.n_observations {
            break;
        }

        let iter_budget = match budget {
            BudgetOverride::Scenario => scenario.travel_budget(),
            BudgetOverride::PerIteration(b) => b.get(k).copied().unwrap_or(0.0),
            BudgetOverride::Total(_) => scenario.travel_budget(),
        };

        let estimates: Vec<Vector3<f64>> = filters
            .iter()
            .map(|f| f.as_ref().unwrap().state.position())
            .collect();
        let next_pose = match scenario.controller {
            ControllerKind::NbvSupremum | ControllerKind::NbvCentroid => {
                // Plan against the one-step-ahead priors.
                let predicted: Vec<_> = filters
                    .iter()
                    .map(|f| {
                        let f = f.as_ref().unwrap();
                        let (state, cov) = kf_predict(&f.state, &f.cov, &model, &w);
                        (cov.position_block(), state.position())
                    })
                    .collect();
                let objective_kind = if scenario.controller == ControllerKind::NbvSupremum {
                    Objective::Supremum
                } else {
                    Objective::Centroid
                };
                let step = (|| -> nbv_core::Result<Pose<f64>> {
                    let obj = select_objective(objective_kind, &predicted, &pose)?;
                    let mut cfg = planner_cfg;
                    cfg.max_travel = cfg.max_travel.min(iter_budget);
                    let p_next = next_best_view(&obj, &cfg, &rig, &pose.rot, &noise)?;
                    let goal = goal_from_nbv(
                        &pose,
                        &obj.relative_position,
                        &p_next,
                        obj.predicted_position,
                    )?;
                    let flow_cfg = scenario.flow_cfg.config(Some(iter_budget));
                    let traj = integrate_flow(
                        &pose, &goal, &rig, &estimates, &barrier_cfg, &flow_cfg,
                    )?;
                    Ok(*traj.last().unwrap())
                })();
                match step {
                    Ok(p) => p,
                    Err(e) => {
                        abort = Some(format!("iteration {k}: {e}"));
                        break 'iterations;
                    }
                }
            }
            ControllerKind::StraightBaseline => straight_baseline_step(
                &mut straight,
                &rig,
                &pose,
                &estimates,
                iter_budget,
                scenario.halt_fraction,
            ),
            ControllerKind::CircleBaseline => {
                circle_baseline_step(&mut circle, &pose, &estimates, iter_budget)
            }
            ControllerKind::GridSquare | ControllerKind::GridTriangular => {
                let kind = if scenario.controller == ControllerKind::GridSquare {
                    GridKind::Square
                } else {
                    GridKind::Triangular
                };
                let edge = scenario.grid_edge.expect("validated");
                let targets: Vec<_> = filters
                    .iter()
                    .map(|f| {
                        let f = f.as_ref().unwrap();
                        (f.cov.position_block(), f.state.position())
                    })
                    .collect();
                let (p, hop) = grid_heuristic_step(
                    kind,
                    edge,
                    &rig,
                    &pose,
                    &targets,
                    &noise,
                    remaining_total,
                );
                remaining_total -= hop;
                p
            }
        };
        displacements[k] = (next_pose.r - pose.r).norm();
        pose = next_pose;
    }

    if let Some(message) = &abort {
        // Diagnostic row so aborted trials are visible in the CSV.
        records.push(Record {
            trial: trial_idx,
            iter: scenario.n_observations,
            controller: scenario.controller,
            target_id: 0,
            error: f64::NAN,
            trace: f64::NAN,
            objective: f64::NAN,
            pose,
        });
        let _ = message;
    }

    Ok(TrialResult {
        records,
        displacements,
        aborted: abort,
    })
}

/// Aggregate metrics over a batch of seeded trials.
#[derive(Debug, Clone)]
pub struct BatchResult {
    pub trials: Vec<TrialResult>,
    /// Mean over trials of the per-iteration mean-over-targets error.
    pub mean_error: Vec<f64>,
    /// Mean over trials of the per-iteration mean-over-targets trace.
    pub mean_trace: Vec<f64>,
    /// Pearson correlation of the error and trace series, one per trial.
    pub correlations: Vec<f64>,
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    if n < 2.0 {
        return f64::NAN;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut va = 0.0;
    let mut vb = 0.0;
    for (&x, &y) in a.iter().zip(b) {
        cov += (x - ma) * (y - mb);
        va += (x - ma).powi(2);
        vb += (y - mb).powi(2);
    }
    cov / (va.sqrt() * vb.sqrt())
}

/// Per-iteration mean-over-targets series for one trial.
fn iteration_means(result: &TrialResult, n_iters: usize) -> (Vec<f64>, Vec<f64>) {
    let mut err = vec![0.0; n_iters];
    let mut tr = vec![0.0; n_iters];
    let mut count = vec![0usize; n_iters];
    for rec in &result.records {
        if rec.iter < n_iters && rec.error.is_finite() {
            err[rec.iter] += rec.error;
            tr[rec.iter] += rec.trace;
            count[rec.iter] += 1;
        }
    }
    for k in 0..n_iters {
        if count[k] > 0 {
            err[k] /= count[k] as f64;
            tr[k] /= count[k] as f64;
        }
    }
    (err, tr)
}

/// Runs `n_trials` trials seeded `base_seed + i` and aggregates in seed
/// order, so the result is independent of execution order.
pub fn batch_run(
    scenario: &Scenario,
    n_trials: usize,
    base_seed: u64,
    correction: Option<&RegressionModel<f64>>,
) -> Result<BatchResult, SimError> {
    let n_iters = scenario.n_observations;
    let mut trials = Vec::with_capacity(n_trials);
    let mut mean_error = vec![0.0; n_iters];
    let mut mean_trace = vec![0.0; n_iters];
    let mut correlations = Vec::with_capacity(n_trials);
    for i in 0..n_trials {
        let result = run_trial(
            scenario,
            i,
            base_seed.wrapping_add(i as u64),
            correction,
            BudgetOverride::Scenario,
        )?;
        let (err, tr) = iteration_means(&result, n_iters);
        for k in 0..n_iters {
            mean_error[k] += err[k] / n_trials as f64;
            mean_trace[k] += tr[k] / n_trials as f64;
        }
        correlations.push(pearson(&err, &tr));
        trials.push(result);
    }
    Ok(BatchResult {
        trials,
        mean_error,
        mean_trace,
        correlations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{
        BarrierSpec, FlowSpec, PlannerSpec, PoseSpec, RigSpec, TargetLayout,
        SCENARIO_SCHEMA_VERSION,
    };
    use approx::assert_relative_eq;

    pub fn desk_scenario() -> Scenario {
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
            initial_pose: PoseSpec::from_pose(
                &Pose::looking_at(Vector3::new(-50.0, 0.0, 0.0), Vector3::zeros()).unwrap(),
            ),
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
    fn noiseless_observation_is_exact() {
        let mut scenario = desk_scenario();
        scenario.quantize = false;
        scenario.n_observations = 1;
        let result = run_trial(&scenario, 0, 1, None, BudgetOverride::Scenario).unwrap();
        assert!(result.aborted.is_none());
        assert_eq!(result.records.len(), 5);
        for rec in &result.records {
            assert!(rec.error < 1e-9, "error {}", rec.error);
        }
    }

    #[test]
    fn trial_is_deterministic() {
        let mut scenario = desk_scenario();
        scenario.n_observations = 5;
        let a = run_trial(&scenario, 0, 42, None, BudgetOverride::Scenario).unwrap();
        let b = run_trial(&scenario, 0, 42, None, BudgetOverride::Scenario).unwrap();
        assert_eq!(a.records.len(), b.records.len());
        for (x, y) in a.records.iter().zip(&b.records) {
            assert_eq!(x.error.to_bits(), y.error.to_bits());
            assert_eq!(x.trace.to_bits(), y.trace.to_bits());
            assert_eq!(x.pose.r, y.pose.r);
        }
    }

    #[test]
    fn row_count_matches_contract() {
        let mut scenario = desk_scenario();
        scenario.n_observations = 4;
        let result = run_trial(&scenario, 0, 3, None, BudgetOverride::Scenario).unwrap();
        assert!(result.aborted.is_none());
        assert_eq!(result.records.len(), 4 * 5);
    }

    #[test]
    fn initial_pose_out_of_fov_is_rejected() {
        let mut scenario = desk_scenario();
        // Looking away from the cluster.
        scenario.initial_pose = PoseSpec::from_pose(
            &Pose::looking_at(Vector3::new(-50.0, 0.0, 0.0), Vector3::new(-100.0, 0.0, 0.0))
                .unwrap(),
        );
        let err = run_trial(&scenario, 0, 1, None, BudgetOverride::Scenario);
        assert!(matches!(err, Err(SimError::InitialPoseOutOfFov)));
    }

    #[test]
    fn displacement_respects_budget() {
        let mut scenario = desk_scenario();
        scenario.n_observations = 6;
        let result = run_trial(&scenario, 0, 9, None, BudgetOverride::Scenario).unwrap();
        assert!(result.aborted.is_none());
        for &d in &result.displacements {
            assert!(d <= scenario.travel_budget() + 1e-9, "displacement {d}");
        }
    }

    #[test]
    fn batch_of_one_equals_single_trial() {
        let mut scenario = desk_scenario();
        scenario.n_observations = 4;
        let batch = batch_run(&scenario, 1, 5, None).unwrap();
        let single = run_trial(&scenario, 0, 5, None, BudgetOverride::Scenario).unwrap();
        let (err, tr) = iteration_means(&single, 4);
        for k in 0..4 {
            assert_relative_eq!(batch.mean_error[k], err[k], epsilon = 1e-15);
            assert_relative_eq!(batch.mean_trace[k], tr[k], epsilon = 1e-15);
        }
    }

    #[test]
    fn pearson_of_identical_series_is_one() {
        let a = [1.0, 2.0, 3.5, 2.2, 0.1];
        assert_relative_eq!(pearson(&a, &a), 1.0, epsilon = 1e-12);
        let b: Vec<f64> = a.iter().map(|x| -x).collect();
        assert_relative_eq!(pearson(&a, &b), -1.0, epsilon = 1e-12);
    }
}
