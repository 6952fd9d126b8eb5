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

//! Command-line front end: run scenarios, compare controllers, calibrate
//! the pixel-noise model.

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nbv_core::calibration::{fit, CalibrationSample, RegressionModel, TrainingSet};
use nbv_core::stereo::{project, quantize, CameraRig, RelativePoint};

use nbv_sim::output::write_csv;
use nbv_sim::scenario::{ControllerKind, Scenario};
use nbv_sim::trial::{run_trial, BudgetOverride, Record};
use nbv_sim::SimError;

#[derive(Parser)]
#[command(name = "nbv-sim", about = "Stereo next-best-view simulation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the scenario file's controller for a number of seeded trials.
    Simulate {
        scenario: PathBuf,
        /// Base seed; defaults to the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Noise-model JSON used to de-bias raw pixels.
        #[arg(long)]
        noise_model: Option<PathBuf>,
    },
    /// Run every controller on the scenario with matched travel budgets.
    Compare {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        trials: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        noise_model: Option<PathBuf>,
    },
    /// Fit a pixel-noise model from synthetic quantized observations.
    Calibrate {
        /// Scenario file providing the camera rig; a default desk rig is
        /// used when omitted.
        #[arg(long)]
        scenario: Option<PathBuf>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "noise_model.json")]
        out: PathBuf,
    },
}

fn load_correction(path: &Option<PathBuf>) -> Result<Option<RegressionModel<f64>>, SimError> {
    match path {
        None => Ok(None),
        Some(p) => {
            let file = serde_json::from_str(&std::fs::read_to_string(p)?)?;
            Ok(Some(RegressionModel::from_file(&file)?))
        }
    }
}

fn emit(records: &[Record], out: &Option<PathBuf>) -> Result<(), SimError> {
    match out {
        Some(path) => write_csv(std::fs::File::create(path)?, records),
        None => write_csv(std::io::stdout().lock(), records),
    }
}

fn simulate(
    scenario: &Scenario,
    base_seed: u64,
    trials: usize,
    correction: Option<&RegressionModel<f64>>,
) -> Result<Vec<Record>, SimError> {
    let mut records = Vec::new();
    for i in 0..trials {
        let result = run_trial(
            scenario,
            i,
            base_seed.wrapping_add(i as u64),
            correction,
            BudgetOverride::Scenario,
        )?;
        if let Some(msg) = &result.aborted {
            eprintln!("trial {i} aborted: {msg}");
        }
        records.extend(result.records);
    }
    Ok(records)
}

fn compare(
    scenario: &Scenario,
    base_seed: u64,
    trials: usize,
    correction: Option<&RegressionModel<f64>>,
) -> Result<Vec<Record>, SimError> {
    let mut records = Vec::new();
    for i in 0..trials {
        let seed = base_seed.wrapping_add(i as u64);
        let with = |kind: ControllerKind| {
            let mut s = scenario.clone();
            s.controller = kind;
            s
        };
        let sup = run_trial(&with(ControllerKind::NbvSupremum), i, seed, correction,
            BudgetOverride::Scenario)?;
        let cen = run_trial(&with(ControllerKind::NbvCentroid), i, seed, correction,
            BudgetOverride::Scenario)?;
        // Budget parity: baselines travel exactly as far as the farther
        // NBV objective did, iteration by iteration.
        let budgets: Vec<f64> = sup
            .displacements
            .iter()
            .zip(&cen.displacements)
            .map(|(a, b)| a.max(*b))
            .collect();
        let total: f64 = budgets.iter().sum();
        records.extend(sup.records);
        records.extend(cen.records);
        for kind in [ControllerKind::StraightBaseline, ControllerKind::CircleBaseline] {
            let result = run_trial(&with(kind), i, seed, correction,
                BudgetOverride::PerIteration(&budgets))?;
            records.extend(result.records);
        }
        if scenario.grid_edge.is_some() {
            for kind in [ControllerKind::GridSquare, ControllerKind::GridTriangular] {
                let result =
                    run_trial(&with(kind), i, seed, correction, BudgetOverride::Total(total))?;
                records.extend(result.records);
            }
        }
    }
    Ok(records)
}

/// Builds a training set of quantization errors over the rig's FoV and
/// fits the bias regression to it.
fn calibrate_rig(
    rig: &CameraRig<f64>,
    samples: usize,
    seed: u64,
) -> Result<RegressionModel<f64>, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut set = Vec::with_capacity(samples);
    while set.len() < samples {
        let z = rng.gen_range(2.0 * rig.min_depth()..60.0 * rig.baseline);
        let p = RelativePoint::new(Vector3::new(
            rng.gen_range(-0.4..0.4) * z,
            rng.gen_range(-0.4..0.4) * z,
            z,
        ));
        let Ok(truth) = project(rig, &p) else { continue };
        let measured = quantize(&truth);
        if measured.disparity() <= 0.0 {
            continue;
        }
        set.push(CalibrationSample {
            pixels: measured,
            error: Vector3::new(
                measured.x_left - truth.x_left,
                measured.x_right - truth.x_right,
                measured.y - truth.y,
            ),
        });
    }
    fit(&TrainingSet::new(set)).map_err(SimError::Core)
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}

fn run() -> Result<(), SimError> {
    match Cli::parse().command {
        Command::Simulate {
            scenario,
            seed,
            trials,
            out,
            noise_model,
        } => {
            let scenario = Scenario::load(&scenario)?;
            let correction = load_correction(&noise_model)?;
            let records = simulate(
                &scenario,
                seed.unwrap_or(scenario.seed),
                trials,
                correction.as_ref(),
            )?;
            emit(&records, &out)
        }
        Command::Compare {
            scenario,
            seed,
            trials,
            out,
            noise_model,
        } => {
            let scenario = Scenario::load(&scenario)?;
            let correction = load_correction(&noise_model)?;
            let records = compare(
                &scenario,
                seed.unwrap_or(scenario.seed),
                trials,
                correction.as_ref(),
            )?;
            emit(&records, &out)
        }
        Command::Calibrate {
            scenario,
            samples,
            seed,
            out,
        } => {
            let rig = match scenario {
                Some(path) => Scenario::load(&path)?.rig.rig(),
                None => CameraRig::from_fov(1.0, 1024.0, 1024.0, 35.0f64.to_radians()),
            };
            let model = calibrate_rig(&rig, samples, seed)?;
            let json = serde_json::to_string_pretty(&model.to_file())?;
            std::fs::write(&out, json + "\n")?;
            eprintln!("wrote {}", out.display());
            Ok(())
        }
    }
}
