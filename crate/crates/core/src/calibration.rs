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

//! Empirical pixel-noise calibration.
//!
//! Raw stereo correspondences carry a systematic bias that depends on where
//! in the disparity space the measurement falls. A linear regression on six
//! pixel-space features predicts that bias so it can be subtracted before
//! triangulation; the residual scatter of the regression estimates the
//! covariance of the remaining zero-mean pixel noise.

use nalgebra::{DMatrix, Matrix3, SMatrix, SVector, Vector3};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::scalar::{real, widen, Real};
use crate::stereo::{NoiseModel, PixelTriple};
use crate::Result;

/// Condition-number limit for the regression design matrix.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Schema version of the serialized noise-model file.
pub const NOISE_MODEL_SCHEMA_VERSION: u32 = 1;

/// Regression feature vector for one pixel triple.
pub type FeatureVector<T> = SVector<T, 6>;

/// Features `[1, y, d, x_l + x_r, y d, (x_l + x_r) / d]`.
///
/// The disparity `d = x_l - x_r` must be nonzero.
pub fn features<T: Real>(pixels: &PixelTriple<T>) -> Result<FeatureVector<T>> {
    let d = pixels.disparity();
    if d == T::zero() {
        return Err(Error::ZeroDisparity);
    }
    let s = pixels.x_left + pixels.x_right;
    Ok(FeatureVector::from_column_slice(&[
        T::one(),
        pixels.y,
        d,
        s,
        pixels.y * d,
        s / d,
    ]))
}

/// Calibration sample: a raw pixel triple and its observed error, the raw
/// measurement minus the ground-truth projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationSample<T: Real> {
    pub pixels: PixelTriple<T>,
    pub error: Vector3<T>,
}

/// A set of calibration samples.
#[derive(Debug, Clone, Default)]
pub struct TrainingSet<T: Real> {
    pub samples: Vec<CalibrationSample<T>>,
}

impl<T: Real> TrainingSet<T> {
    pub fn new(samples: Vec<CalibrationSample<T>>) -> Self {
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Fitted bias regression and residual noise covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionModel<T: Real> {
    /// 6x3 coefficient matrix; column j predicts the error of pixel
    /// coordinate j in `(x_l, x_r, y)` order.
    pub beta: SMatrix<T, 6, 3>,
    /// Residual covariance of the de-biased pixel noise.
    pub q: Matrix3<T>,
}

impl<T: Real> RegressionModel<T> {
    /// Predicted measurement bias at a pixel triple.
    pub fn predict_bias(&self, pixels: &PixelTriple<T>) -> Result<Vector3<T>> {
        let f = features(pixels)?;
        Ok((self.beta.transpose() * f).into())
    }

    /// Subtracts the predicted bias from a raw measurement.
    pub fn correct(&self, pixels: &PixelTriple<T>) -> Result<PixelTriple<T>> {
        let bias = self.predict_bias(pixels)?;
        Ok(PixelTriple {
            x_left: pixels.x_left - bias.x,
            x_right: pixels.x_right - bias.y,
            y: pixels.y - bias.z,
        })
    }

    /// The residual covariance as a pixel noise model.
    pub fn noise_model(&self) -> Result<NoiseModel<T>> {
        NoiseModel::new(self.q)
    }
}

/// Fits the bias regression by least squares.
///
/// Requires more than six samples. Fails with [`Error::RankDeficient`] when
/// the design matrix is numerically rank deficient, which happens when the
/// samples do not excite all six features (for example, all at the same
/// disparity).
pub fn fit<T: Real>(training: &TrainingSet<T>) -> Result<RegressionModel<T>> {
    let n = training.len();
    if n <= 6 {
        return Err(Error::RankDeficient {
            limit: CONDITION_LIMIT,
        });
    }
    let mut x = DMatrix::<T>::zeros(n, 6);
    let mut y = DMatrix::<T>::zeros(n, 3);
    for (row, sample) in training.samples.iter().enumerate() {
        let f = features(&sample.pixels)?;
        for col in 0..6 {
            x[(row, col)] = f[col];
        }
        for col in 0..3 {
            y[(row, col)] = sample.error[col];
        }
    }
    let svd = x.clone().svd(true, true);
    let s_max = svd.singular_values[0];
    let s_min = svd.singular_values[svd.singular_values.len() - 1];
    if s_min <= T::zero() || widen(s_max / s_min).powi(2) > CONDITION_LIMIT {
        return Err(Error::RankDeficient {
            limit: CONDITION_LIMIT,
        });
    }
    let beta_dyn = svd
        .solve(&y, real(0.0))
        .map_err(|_| Error::RankDeficient {
            limit: CONDITION_LIMIT,
        })?;
    let mut beta = SMatrix::<T, 6, 3>::zeros();
    for row in 0..6 {
        for col in 0..3 {
            beta[(row, col)] = beta_dyn[(row, col)];
        }
    }
    // Residual covariance with the degrees-of-freedom correction.
    let residuals = y - x * beta_dyn;
    let mut q = Matrix3::<T>::zeros();
    for row in 0..n {
        let e = Vector3::new(residuals[(row, 0)], residuals[(row, 1)], residuals[(row, 2)]);
        q += e * e.transpose();
    }
    q /= real::<T>((n - 6) as f64);
    Ok(RegressionModel { beta, q })
}

/// Draws a synthetic training set from a known bias model and noise
/// covariance. Pixel triples are sampled uniformly over the given ranges
/// with strictly positive disparity.
pub fn synth_training_set<T: Real, R: Rng + ?Sized>(
    rng: &mut R,
    n: usize,
    beta: &SMatrix<T, 6, 3>,
    q: &Matrix3<T>,
) -> TrainingSet<T> {
    let chol = q
        .clone_owned()
        .cholesky()
        .map(|c| c.l())
        .unwrap_or_else(Matrix3::zeros);
    let mut samples = Vec::with_capacity(n);
    while samples.len() < n {
        let x_right: f64 = rng.gen_range(-400.0..400.0);
        let disparity: f64 = rng.gen_range(5.0..200.0);
        let y: f64 = rng.gen_range(-400.0..400.0);
        let pixels = PixelTriple {
            x_left: real::<T>(x_right + disparity),
            x_right: real(x_right),
            y: real(y),
        };
        let Ok(f) = features(&pixels) else { continue };
        let bias: Vector3<T> = beta.transpose() * f;
        let white = Vector3::new(
            real::<T>(rng.sample(StandardNormal)),
            real::<T>(rng.sample(StandardNormal)),
            real::<T>(rng.sample(StandardNormal)),
        );
        samples.push(CalibrationSample {
            pixels,
            error: bias + chol * white,
        });
    }
    TrainingSet::new(samples)
}

/// On-disk noise-model layout: row-major `beta` (18 values) and `q`
/// (9 values).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseModelFile {
    pub schema_version: u32,
    pub beta: Vec<f64>,
    pub q: Vec<f64>,
}

impl RegressionModel<f64> {
    pub fn to_file(&self) -> NoiseModelFile {
        NoiseModelFile {
            schema_version: NOISE_MODEL_SCHEMA_VERSION,
            beta: self.beta.transpose().as_slice().to_vec(),
            q: self.q.transpose().as_slice().to_vec(),
        }
    }

    pub fn from_file(file: &NoiseModelFile) -> Result<Self> {
        if file.schema_version != NOISE_MODEL_SCHEMA_VERSION
            || file.beta.len() != 18
            || file.q.len() != 9
        {
            return Err(Error::RankDeficient {
                limit: CONDITION_LIMIT,
            });
        }
        // Stored row-major; nalgebra slices are column-major.
        let beta = SMatrix::<f64, 3, 6>::from_column_slice(&file.beta).transpose();
        let q = Matrix3::from_column_slice(&file.q).transpose();
        Ok(Self { beta, q })
    }
}
