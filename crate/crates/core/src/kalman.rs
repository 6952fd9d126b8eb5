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

//! Per-target Kalman filtering on a 9-dimensional
//! position/velocity/acceleration state, plus the closed-form fused
//! position covariance.
//!
//! The observation matrix is `H = [I 0 0]`: only positions are measured.
//! Inversions go through Cholesky solves with a condition-number guard;
//! posterior covariances are re-symmetrized after every update.

use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

use crate::error::Error;
use crate::scalar::{real, widen, Real};
use crate::stereo::MeasurementCovariance;
use crate::Result;

/// Condition-number limit for the 3x3 solves inside the filter.
pub const CONDITION_LIMIT: f64 = 1e12;

pub type StateVector<T> = SVector<T, 9>;
pub type CovMatrix<T> = SMatrix<T, 9, 9>;

/// Full target state: `[position; velocity; acceleration]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TargetState<T: Real> {
    pub z: StateVector<T>,
}

impl<T: Real> TargetState<T> {
    pub fn new(z: StateVector<T>) -> Self {
        Self { z }
    }

    pub fn from_position(x: Vector3<T>) -> Self {
        let mut z = StateVector::zeros();
        z.fixed_rows_mut::<3>(0).copy_from(&x);
        Self { z }
    }

    pub fn position(&self) -> Vector3<T> {
        self.z.fixed_rows::<3>(0).into()
    }

    pub fn velocity(&self) -> Vector3<T> {
        self.z.fixed_rows::<3>(3).into()
    }
}

/// 9x9 state covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateCovariance<T: Real> {
    pub u: CovMatrix<T>,
}

impl<T: Real> StateCovariance<T> {
    pub fn new(u: CovMatrix<T>) -> Self {
        Self { u }
    }

    /// First-observation prior: position block from the measurement
    /// covariance, velocity and acceleration blocks at `loose` per axis.
    pub fn from_first_observation(sigma: &Matrix3<T>, loose: T) -> Self {
        let mut u = CovMatrix::zeros();
        u.fixed_view_mut::<3, 3>(0, 0).copy_from(sigma);
        for i in 3..9 {
            u[(i, i)] = loose;
        }
        Self { u }
    }

    /// Position block `H U H^T`.
    pub fn position_block(&self) -> Matrix3<T> {
        self.u.fixed_view::<3, 3>(0, 0).into()
    }
}

/// State transition matrix with its time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionModel<T: Real> {
    pub phi: CovMatrix<T>,
    pub dt: T,
}

/// Process noise covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessNoise<T: Real> {
    pub w: CovMatrix<T>,
}

impl<T: Real> ProcessNoise<T> {
    pub fn zero() -> Self {
        Self {
            w: CovMatrix::zeros(),
        }
    }

    pub fn scaled(&self, s: T) -> Self {
        Self { w: self.w * s }
    }
}

/// Posterior position covariance after fusing a new measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FusedCovariance<T: Real> {
    pub xi: Matrix3<T>,
}

/// Observation matrix `H = [I 0 0]` selecting the position block.
pub fn observation_matrix<T: Real>() -> SMatrix<T, 3, 9> {
    let mut h = SMatrix::<T, 3, 9>::zeros();
    for i in 0..3 {
        h[(i, i)] = T::one();
    }
    h
}

fn kron_block<T: Real>(block: Matrix3<T>) -> CovMatrix<T> {
    // block (x) I_3: entry (i, j) of `block` scales the 3x3 identity at
    // the (i, j) block position.
    let mut m = CovMatrix::zeros();
    for bi in 0..3 {
        for bj in 0..3 {
            for k in 0..3 {
                m[(3 * bi + k, 3 * bj + k)] = block[(bi, bj)];
            }
        }
    }
    m
}

/// Zero-velocity model: positions persist, dynamics are zeroed.
pub fn phi_static<T: Real>() -> TransitionModel<T> {
    let mut block = Matrix3::zeros();
    block[(0, 0)] = T::one();
    TransitionModel {
        phi: kron_block(block),
        dt: T::zero(),
    }
}

/// Constant-acceleration model over a step `dt`.
pub fn phi_const_accel<T: Real>(dt: T) -> Result<TransitionModel<T>> {
    if dt <= T::zero() {
        return Err(Error::NonPositiveDt { dt: widen(dt) });
    }
    let half = real::<T>(0.5);
    let block = Matrix3::new(
        T::one(),
        dt,
        half * dt * dt,
        T::zero(),
        T::one(),
        dt,
        T::zero(),
        T::zero(),
        T::one(),
    );
    Ok(TransitionModel {
        phi: kron_block(block),
        dt,
    })
}

/// Closed-form white-jerk process noise for a step `dt`.
pub fn process_noise<T: Real>(dt: T) -> Result<ProcessNoise<T>> {
    if dt <= T::zero() {
        return Err(Error::NonPositiveDt { dt: widen(dt) });
    }
    let d2 = dt * dt;
    let d3 = d2 * dt;
    let d4 = d3 * dt;
    let d5 = d4 * dt;
    let block = Matrix3::new(
        d5 / real(20.0),
        d4 / real(8.0),
        d3 / real(6.0),
        d4 / real(8.0),
        d3 / real(3.0),
        d2 / real(2.0),
        d3 / real(6.0),
        d2 / real(2.0),
        dt,
    );
    Ok(ProcessNoise {
        w: kron_block(block),
    })
}

/// Prediction step: `z' = Phi z`, `U' = Phi U Phi^T + W`.
pub fn kf_predict<T: Real>(
    state: &TargetState<T>,
    cov: &StateCovariance<T>,
    model: &TransitionModel<T>,
    w: &ProcessNoise<T>,
) -> (TargetState<T>, StateCovariance<T>) {
    let z = model.phi * state.z;
    let u = model.phi * cov.u * model.phi.transpose() + w.w;
    let u = (u + u.transpose()) * real::<T>(0.5);
    (TargetState::new(z), StateCovariance::new(u))
}

fn spd_condition<T: Real>(m: &Matrix3<T>) -> Option<T> {
    let eig = m.symmetric_eigenvalues();
    let mut lo = eig[0];
    let mut hi = eig[0];
    for i in 1..3 {
        if eig[i] < lo {
            lo = eig[i];
        }
        if eig[i] > hi {
            hi = eig[i];
        }
    }
    if lo <= T::zero() {
        None
    } else {
        Some(hi / lo)
    }
}

/// Measurement update with a position observation.
pub fn kf_update<T: Real>(
    pred_state: &TargetState<T>,
    pred_cov: &StateCovariance<T>,
    meas: &Vector3<T>,
    sigma: &MeasurementCovariance<T>,
) -> Result<(TargetState<T>, StateCovariance<T>)> {
    let h = observation_matrix::<T>();
    let hu = h * pred_cov.u; // 3x9
    let innovation = pred_cov.position_block() + sigma.sigma;
    let innovation = (innovation + innovation.transpose()) * real::<T>(0.5);
    match spd_condition(&innovation) {
        Some(cond) if cond <= real(CONDITION_LIMIT) => {}
        _ => {
            return Err(Error::SingularInnovation {
                limit: CONDITION_LIMIT,
            })
        }
    }
    let chol = innovation
        .cholesky()
        .ok_or(Error::SingularInnovation {
            limit: CONDITION_LIMIT,
        })?;
    // K = U H^T S^{-1}  =>  K^T = S^{-1} (H U).
    let kt = chol.solve(&hu);
    let gain = kt.transpose(); // 9x3
    let residual = meas - h * pred_state.z;
    let z = pred_state.z + gain * residual;
    let u = pred_cov.u - gain * hu;
    let u = (u + u.transpose()) * real::<T>(0.5);
    Ok((TargetState::new(z), StateCovariance::new(u)))
}

fn invert_spd<T: Real>(m: &Matrix3<T>) -> Result<Matrix3<T>> {
    m.cholesky().map(|c| c.inverse()).ok_or(Error::SingularInput)
}

/// Closed-form fused position covariance,
/// `Xi = [prior^{-1} + Sigma^{-1}]^{-1}`.
pub fn fused_position_covariance<T: Real>(
    prior: &Matrix3<T>,
    sigma: &MeasurementCovariance<T>,
) -> Result<FusedCovariance<T>> {
    let info = invert_spd(prior)? + invert_spd(&sigma.sigma)?;
    let xi = invert_spd(&info)?;
    let xi = (xi + xi.transpose()) * real::<T>(0.5);
    Ok(FusedCovariance { xi })
}
