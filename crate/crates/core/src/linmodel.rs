//! Hover linearization, measurement selectors and observability analysis.

use alloc::vec::Vec;

use nalgebra::DMatrix;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::math::{rank_svd, skew, Mat12, Mat12x4, Vec3, DEFAULT_RANK_TOL};
use crate::vehicle::{ControlInput, StateVector, VehicleParams};

/// Trim point for the linear models.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumPoint {
    pub state: StateVector,
    pub input: ControlInput,
}

impl EquilibriumPoint {
    /// Level hover at the origin with yaw `yaw`.
    pub fn hover(p: &VehicleParams, yaw: f64) -> Self {
        let state = StateVector { attitude: Vec3::new(0.0, 0.0, yaw), ..StateVector::zeros() };
        EquilibriumPoint { state, input: p.hover_input() }
    }
}

/// Sensor channel; each selects one 3-state block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum MeasurementKind {
    Position,
    Velocity,
    Attitude,
    BodyRates,
}

impl MeasurementKind {
    pub const ALL: [MeasurementKind; 4] =
        [MeasurementKind::Position, MeasurementKind::Velocity, MeasurementKind::Attitude, MeasurementKind::BodyRates];

    /// First state index of the selected block.
    pub fn offset(self) -> usize {
        match self {
            MeasurementKind::Position => 0,
            MeasurementKind::Velocity => 3,
            MeasurementKind::Attitude => 6,
            MeasurementKind::BodyRates => 9,
        }
    }
}

/// Sensor and process noise standard deviations.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct NoiseConfig {
    /// Accelerometer, m/s^2.
    pub sigma_f: f64,
    /// Angular-rate process noise, rad/s.
    pub sigma_omega: f64,
    /// Attitude sensor, rad.
    pub sigma_eta: f64,
    /// Gyroscope, rad/s.
    pub sigma_gyro: f64,
    /// GNSS position, m.
    pub sigma_gnss: f64,
    /// Zero-velocity pseudo-measurement, m/s.
    pub sigma_zupt: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        NoiseConfig {
            sigma_f: 0.002,
            sigma_omega: 0.001,
            sigma_eta: 0.001,
            sigma_gyro: 0.001,
            sigma_gnss: 3.0,
            sigma_zupt: 0.005,
        }
    }
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        let all = [self.sigma_f, self.sigma_omega, self.sigma_eta, self.sigma_gyro, self.sigma_gnss, self.sigma_zupt];
        if all.iter().all(|s| s.is_finite() && *s > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidConfig("noise standard deviations must be finite and positive"))
        }
    }

    pub fn sigma(&self, kind: MeasurementKind) -> f64 {
        match kind {
            MeasurementKind::Position => self.sigma_gnss,
            MeasurementKind::Velocity => self.sigma_zupt,
            MeasurementKind::Attitude => self.sigma_eta,
            MeasurementKind::BodyRates => self.sigma_gyro,
        }
    }
}

/// Hover model: dynamics, input, measurement and noise matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub a: Mat12,
    pub b: Mat12x4,
    pub kinds: Vec<MeasurementKind>,
    pub c: DMatrix<f64>,
    pub w: Mat12,
    pub v: DMatrix<f64>,
}

impl LinearModel {
    pub fn build(
        p: &VehicleParams,
        eq: &EquilibriumPoint,
        kinds: &[MeasurementKind],
        noise: &NoiseConfig,
        dt: f64,
    ) -> Result<Self> {
        let (a, b) = linearize_hover(p, eq);
        let kinds = normalize_kinds(kinds)?;
        Ok(LinearModel {
            a,
            b,
            c: measurement_matrix(&kinds)?,
            w: process_covariance(noise, dt),
            v: measurement_covariance(&kinds, noise)?,
            kinds,
        })
    }
}

/// Jacobians of the plant at a hover trim, using the small-angle kinematics.
pub fn linearize_hover(p: &VehicleParams, eq: &EquilibriumPoint) -> (Mat12, Mat12x4) {
    let mut a = Mat12::zeros();
    let eta_e = eq.state.attitude;
    a.fixed_view_mut::<3, 3>(0, 3).copy_from(&(nalgebra::Matrix3::identity() + skew(&eta_e)));
    a.fixed_view_mut::<3, 3>(3, 6).copy_from(&(-skew(&Vec3::new(0.0, 0.0, p.gravity))));
    a.fixed_view_mut::<3, 3>(6, 9).copy_from(&nalgebra::Matrix3::identity());

    let mut b = Mat12x4::zeros();
    b[(5, 0)] = 1.0 / p.mass;
    for i in 0..3 {
        b[(9 + i, 1 + i)] = 1.0 / p.inertia[i];
    }
    (a, b)
}

/// Forward-Euler discretization `(I + A dt, B dt)`.
pub fn discretize(a: &Mat12, b: &Mat12x4, dt: f64) -> (Mat12, Mat12x4) {
    (Mat12::identity() + a * dt, b * dt)
}

fn normalize_kinds(kinds: &[MeasurementKind]) -> Result<Vec<MeasurementKind>> {
    let mut k: Vec<MeasurementKind> = kinds.to_vec();
    k.sort();
    k.dedup();
    if k.is_empty() {
        Err(Error::EmptyMeasurementSet)
    } else {
        Ok(k)
    }
}

/// Row-stacked block selectors in state order.
pub fn measurement_matrix(kinds: &[MeasurementKind]) -> Result<DMatrix<f64>> {
    let kinds = normalize_kinds(kinds)?;
    let mut c = DMatrix::zeros(3 * kinds.len(), 12);
    for (row, kind) in kinds.iter().enumerate() {
        for i in 0..3 {
            c[(3 * row + i, kind.offset() + i)] = 1.0;
        }
    }
    Ok(c)
}

/// Diagonal sensor covariance matching [`measurement_matrix`] row order.
pub fn measurement_covariance(kinds: &[MeasurementKind], noise: &NoiseConfig) -> Result<DMatrix<f64>> {
    let kinds = normalize_kinds(kinds)?;
    let diag: Vec<f64> = kinds.iter().flat_map(|k| [noise.sigma(*k).powi(2); 3]).collect();
    Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)))
}

/// Stacked `[C; CA; ...; CA^11]`.
pub fn observability_matrix(a: &Mat12, c: &DMatrix<f64>) -> DMatrix<f64> {
    let m = c.nrows();
    let a_dyn = DMatrix::from_column_slice(12, 12, a.as_slice());
    let mut out = DMatrix::zeros(12 * m, 12);
    let mut block = c.clone();
    for k in 0..12 {
        out.view_mut((k * m, 0), (m, 12)).copy_from(&block);
        block = &block * &a_dyn;
    }
    out
}

pub fn observability_rank(a: &Mat12, c: &DMatrix<f64>) -> usize {
    rank_svd(&observability_matrix(a, c), DEFAULT_RANK_TOL)
}

/// Per-step process covariance with isotropic position, velocity, attitude and rate blocks.
pub fn process_covariance(noise: &NoiseConfig, dt: f64) -> Mat12 {
    let sf2 = noise.sigma_f * noise.sigma_f;
    let sw2 = noise.sigma_omega * noise.sigma_omega;
    let blocks = [sf2 * dt.powi(3) / 3.0, sf2 * dt, sw2 * dt, sw2 / dt];
    let mut w = Mat12::zeros();
    for (b, value) in blocks.iter().enumerate() {
        for i in 0..3 {
            w[(3 * b + i, 3 * b + i)] = *value;
        }
    }
    w
}
