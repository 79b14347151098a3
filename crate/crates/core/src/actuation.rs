//! Mixer inversion by non-negative least squares, speed clamping and first-order rotor lag.

use nalgebra::{DMatrix, DVector};

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::math::{Mat4, Vec4};
use crate::vehicle::{hover_rotor_speed, ControlInput, RotorSpeeds, VehicleParams};

/// Rotor speed envelope in rad/s.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ActuatorLimits {
    pub omega_min: f64,
    pub omega_max: f64,
}

impl ActuatorLimits {
    pub fn new(omega_min: f64, omega_max: f64) -> Result<Self> {
        if omega_min > 0.0 && omega_min < omega_max && omega_max.is_finite() {
            Ok(ActuatorLimits { omega_min, omega_max })
        } else {
            Err(Error::InvalidConfig("rotor limits must satisfy 0 < min < max"))
        }
    }

    /// Limits as fractions of the hover speed.
    pub fn from_hover(p: &VehicleParams, min_fraction: f64, max_fraction: f64) -> Result<Self> {
        let h = hover_rotor_speed(p);
        Self::new(min_fraction * h, max_fraction * h)
    }

    /// 0.1x and 1.5x hover speed.
    pub fn default_for(p: &VehicleParams) -> Self {
        Self::from_hover(p, 0.1, 1.5).expect("default fractions are ordered")
    }

    /// True when any desired speed lies outside the envelope.
    pub fn is_saturated(&self, des: &RotorSpeeds) -> bool {
        des.0.iter().any(|w| *w < self.omega_min || *w > self.omega_max)
    }
}

/// Result of the constrained mixer inversion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Allocation {
    /// Non-negative squared speeds.
    pub squared: Vec4,
    pub speeds: RotorSpeeds,
}

/// `argmin_{x >= 0} || u - M x ||` by the Lawson-Hanson active-set method.
pub fn nnls(m: &Mat4, u: &Vec4) -> Result<Vec4> {
    if let Some(inv) = m.try_inverse() {
        let x = inv * u;
        if x.iter().all(|v| *v >= 0.0) {
            return Ok(x);
        }
    }
    lawson_hanson(m, u)
}

fn lawson_hanson(m: &Mat4, u: &Vec4) -> Result<Vec4> {
    const N: usize = 4;
    let max_iter = 4 * N;
    let tol = 1e-12 * m.norm() * u.norm().max(1.0);
    let mut passive = [false; N];
    let mut x = Vec4::zeros();
    let mut iterations = 0;

    loop {
        let w = m.transpose() * (u - m * x);
        let candidate = (0..N).filter(|j| !passive[*j] && w[*j] > tol).max_by(|a, b| w[*a].total_cmp(&w[*b]));
        let Some(t) = candidate else {
            return Ok(x);
        };
        passive[t] = true;
        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(Error::NoConvergence { iterations: max_iter });
            }
            let z = passive_solve(m, u, &passive);
            if (0..N).filter(|j| passive[*j]).all(|j| z[j] > 0.0) {
                x = z;
                break;
            }
            let mut alpha = f64::INFINITY;
            for j in (0..N).filter(|j| passive[*j] && z[*j] <= 0.0) {
                alpha = alpha.min(x[j] / (x[j] - z[j]));
            }
            x += (z - x) * alpha;
            let floor = 1e-14 * x.amax();
            for j in 0..N {
                if passive[j] && x[j] <= floor {
                    passive[j] = false;
                    x[j] = 0.0;
                }
            }
        }
    }
}

/// Least squares on the passive columns; inactive entries are zero.
fn passive_solve(m: &Mat4, u: &Vec4, passive: &[bool; 4]) -> Vec4 {
    let cols: alloc::vec::Vec<usize> = (0..4).filter(|j| passive[*j]).collect();
    let sub = DMatrix::from_fn(4, cols.len(), |i, k| m[(i, cols[k])]);
    let rhs = DVector::from_column_slice(u.as_slice());
    let sol = sub.svd(true, true).solve(&rhs, 1e-15).expect("thin SVD solve");
    let mut z = Vec4::zeros();
    for (k, j) in cols.iter().enumerate() {
        z[*j] = sol[k];
    }
    z
}

/// KKT conditions of [`nnls`] at `x` with a relative tolerance.
pub fn nnls_kkt(m: &Mat4, u: &Vec4, x: &Vec4, tol: f64) -> bool {
    let w = m.transpose() * (u - m * x);
    let scale = m.norm() * u.norm().max(1.0);
    (0..4).all(|j| {
        if x[j] < 0.0 {
            false
        } else if x[j] == 0.0 {
            w[j] <= tol * scale
        } else {
            w[j].abs() <= tol * scale
        }
    })
}

/// Desired rotor speeds for a wrench request.
pub fn allocate_nnls(u: &ControlInput, m: &Mat4) -> Result<Allocation> {
    let squared = nnls(m, &u.to_vector())?;
    Ok(Allocation { squared, speeds: RotorSpeeds(squared.map(|v| v.max(0.0).sqrt())) })
}

/// Elementwise projection onto the speed envelope.
pub fn clamp_speeds(des: &RotorSpeeds, lim: &ActuatorLimits) -> RotorSpeeds {
    RotorSpeeds(des.0.map(|w| w.max(lim.omega_min).min(lim.omega_max)))
}

/// Rotor output speeds behind a first-order lag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotorLagState {
    pub omega_out: RotorSpeeds,
    /// s
    pub tau_rot: f64,
}

impl RotorLagState {
    pub fn new(omega_out: RotorSpeeds, tau_rot: f64) -> Self {
        RotorLagState { omega_out, tau_rot }
    }

    /// Exact zero-order-hold response over `dt`.
    pub fn step(&mut self, cmd: &RotorSpeeds, dt: f64) {
        let decay = (-dt / self.tau_rot).exp();
        self.omega_out = RotorSpeeds(cmd.0 + (self.omega_out.0 - cmd.0) * decay);
    }
}

pub fn rotor_lag_step(st: &RotorLagState, cmd: &RotorSpeeds, dt: f64) -> RotorLagState {
    let mut next = *st;
    next.step(cmd, dt);
    next
}

/// Wrench produced by the rotors: `M * omega^2`.
pub fn applied_wrench(omega_out: &RotorSpeeds, m: &Mat4) -> ControlInput {
    ControlInput::from_vector(&(m * omega_out.squared()))
}
