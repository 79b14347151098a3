//! Ground-truth rigid-body plant: kinematics, Newton-Euler dynamics, rotor model and mixer.

use core::f64::consts::PI;

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::math::{skew, Mat3, Mat4, Vec12, Vec3, Vec4};

/// Pitch guard band around +-pi/2.
pub const GIMBAL_GUARD: f64 = 1e-6;

/// 12-dimensional vehicle state in SI units.
///
/// Position is inertial, velocity and body rates are body-frame, and the
/// attitude is the z-y-x Euler triple `(roll, pitch, yaw)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StateVector {
    pub position: Vec3,
    pub velocity: Vec3,
    pub attitude: Vec3,
    pub body_rates: Vec3,
}

impl StateVector {
    /// Validated constructor: rejects non-finite entries and roll/pitch outside
    /// the open interval (-pi/2, pi/2); yaw is wrapped into (-pi, pi].
    pub fn new(position: Vec3, velocity: Vec3, attitude: Vec3, body_rates: Vec3) -> Result<Self> {
        let s = StateVector { position, velocity, attitude, body_rates }.wrapped();
        if !s.to_vector().iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteState);
        }
        let limit = PI / 2.0 - GIMBAL_GUARD;
        if s.attitude.x.abs() >= limit || s.attitude.y.abs() >= limit {
            return Err(Error::GimbalProximity { pitch: s.attitude.y });
        }
        Ok(s)
    }

    pub fn zeros() -> Self {
        Self::default()
    }

    pub fn from_vector(x: &Vec12) -> Self {
        StateVector {
            position: x.fixed_rows::<3>(0).into(),
            velocity: x.fixed_rows::<3>(3).into(),
            attitude: x.fixed_rows::<3>(6).into(),
            body_rates: x.fixed_rows::<3>(9).into(),
        }
    }

    pub fn to_vector(&self) -> Vec12 {
        let mut x = Vec12::zeros();
        x.fixed_rows_mut::<3>(0).copy_from(&self.position);
        x.fixed_rows_mut::<3>(3).copy_from(&self.velocity);
        x.fixed_rows_mut::<3>(6).copy_from(&self.attitude);
        x.fixed_rows_mut::<3>(9).copy_from(&self.body_rates);
        x
    }

    /// Copy with yaw mapped into (-pi, pi].
    pub fn wrapped(mut self) -> Self {
        self.attitude.z = wrap_angle(self.attitude.z);
        self
    }
}

/// Maps an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Collective thrust (N) and body torques (N m).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ControlInput {
    pub thrust: f64,
    pub roll_torque: f64,
    pub pitch_torque: f64,
    pub yaw_torque: f64,
}

impl ControlInput {
    pub fn new(thrust: f64, roll_torque: f64, pitch_torque: f64, yaw_torque: f64) -> Self {
        ControlInput { thrust, roll_torque, pitch_torque, yaw_torque }
    }

    pub fn from_vector(u: &Vec4) -> Self {
        ControlInput::new(u[0], u[1], u[2], u[3])
    }

    pub fn to_vector(&self) -> Vec4 {
        Vec4::new(self.thrust, self.roll_torque, self.pitch_torque, self.yaw_torque)
    }

    pub fn torques(&self) -> Vec3 {
        Vec3::new(self.roll_torque, self.pitch_torque, self.yaw_torque)
    }
}

/// Rotor angular speeds in rad/s, stored non-negative. Rotors 1 and 3 spin
/// clockwise, 2 and 4 counter-clockwise.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RotorSpeeds(pub Vec4);

impl RotorSpeeds {
    pub fn uniform(omega: f64) -> Self {
        RotorSpeeds(Vec4::repeat(omega))
    }

    /// Elementwise square (the mixer's input).
    pub fn squared(&self) -> Vec4 {
        self.0.component_mul(&self.0)
    }

    pub fn as_rpm(&self) -> Vec4 {
        self.0 * (60.0 / (2.0 * PI))
    }
}

/// Airframe, rotor and environment constants.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct VehicleParams {
    /// kg
    pub mass: f64,
    /// Principal moments (Jxx, Jyy, Jzz), kg m^2.
    pub inertia: Vec3,
    /// Rotor moment arm, m.
    pub arm_length: f64,
    /// Lumped thrust constant k_T, kg m / rad^2.
    pub thrust_constant: f64,
    /// Lumped drag-torque constant k_M, kg m^2 / rad^2.
    pub torque_constant: f64,
    /// m/s^2
    pub gravity: f64,
    pub air_density: f64,
    pub rotor_disk_area: f64,
    pub thrust_coefficient: f64,
    pub torque_coefficient: f64,
    pub blade_radius: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        VehicleParams {
            mass: 0.9689,
            inertia: Vec3::new(0.0159, 0.0140, 0.0279),
            arm_length: 0.15,
            thrust_constant: 6.01e-6,
            torque_constant: 6.33e-8,
            gravity: 9.81,
            air_density: 1.225,
            rotor_disk_area: 0.0491,
            thrust_coefficient: 6.38e-3,
            torque_coefficient: 5.392e-4,
            blade_radius: 0.125,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<()> {
        let scalars = [
            self.mass,
            self.arm_length,
            self.thrust_constant,
            self.torque_constant,
            self.gravity,
            self.air_density,
            self.rotor_disk_area,
            self.thrust_coefficient,
            self.torque_coefficient,
            self.blade_radius,
        ];
        if scalars.iter().chain(self.inertia.iter()).all(|v| v.is_finite() && *v > 0.0) {
            Ok(())
        } else {
            Err(Error::InvalidConfig("vehicle parameters must be finite and strictly positive"))
        }
    }

    pub fn weight(&self) -> f64 {
        self.mass * self.gravity
    }

    pub fn inertia_matrix(&self) -> Mat3 {
        Mat3::from_diagonal(&self.inertia)
    }

    /// Hover input `(m g, 0, 0, 0)`.
    pub fn hover_input(&self) -> ControlInput {
        ControlInput::new(self.weight(), 0.0, 0.0, 0.0)
    }
}

/// Body-to-inertial rotation `Rz(yaw) * Ry(pitch) * Rx(roll)`.
pub fn rotation_body_to_inertial(eta: &Vec3) -> Result<Mat3> {
    check_gimbal(eta.y)?;
    Ok(rotation_unchecked(eta))
}

fn rotation_unchecked(eta: &Vec3) -> Mat3 {
    let (sf, cf) = eta.x.sin_cos();
    let (st, ct) = eta.y.sin_cos();
    let (sp, cp) = eta.z.sin_cos();
    Mat3::new(
        cp * ct,
        cp * st * sf - sp * cf,
        cp * st * cf + sp * sf,
        sp * ct,
        sp * st * sf + cp * cf,
        sp * st * cf - cp * sf,
        -st,
        ct * sf,
        ct * cf,
    )
}

/// Inertial z-axis expressed in the body frame (third row of R).
pub fn gravity_direction_body(eta: &Vec3) -> Vec3 {
    let (sf, cf) = eta.x.sin_cos();
    let (st, ct) = eta.y.sin_cos();
    Vec3::new(-st, ct * sf, ct * cf)
}

/// Maps body rates to Euler-angle rates: `eta_dot = W(eta) * omega`.
pub fn euler_rate_matrix(eta: &Vec3) -> Result<Mat3> {
    check_gimbal(eta.y)?;
    let (sf, cf) = eta.x.sin_cos();
    let (st, ct) = eta.y.sin_cos();
    let tt = st / ct;
    Ok(Mat3::new(1.0, sf * tt, cf * tt, 0.0, cf, -sf, 0.0, sf / ct, cf / ct))
}

fn check_gimbal(pitch: f64) -> Result<()> {
    if (PI / 2.0 - pitch.abs()) < GIMBAL_GUARD || !pitch.is_finite() {
        Err(Error::GimbalProximity { pitch })
    } else {
        Ok(())
    }
}

/// Control allocation matrix mapping squared rotor speeds to `(thrust, torques)`.
pub fn mixer_matrix(p: &VehicleParams) -> Mat4 {
    let kt = p.thrust_constant;
    let km = p.torque_constant;
    let lk = p.arm_length * kt;
    Mat4::new(
        kt, kt, kt, kt, //
        0.0, -lk, 0.0, lk, //
        -lk, 0.0, lk, 0.0, //
        -km, km, -km, km,
    )
}

/// Full nonlinear state derivative under an applied wrench.
pub fn dynamics(x: &StateVector, u: &ControlInput, p: &VehicleParams) -> Result<StateVector> {
    let rot = rotation_body_to_inertial(&x.attitude)?;
    let w_eta = euler_rate_matrix(&x.attitude)?;
    let omega = &x.body_rates;
    let v = &x.velocity;

    let position_rate = rot * v;
    let velocity_rate =
        Vec3::new(0.0, 0.0, u.thrust / p.mass) - omega.cross(v) - gravity_direction_body(&x.attitude) * p.gravity;
    let attitude_rate = w_eta * omega;
    let j_omega = p.inertia.component_mul(omega);
    let body_accel = (u.torques() - omega.cross(&j_omega)).component_div(&p.inertia);

    Ok(StateVector {
        position: position_rate,
        velocity: velocity_rate,
        attitude: attitude_rate,
        body_rates: body_accel,
    })
}

/// [`dynamics`] on the flat 12-vector, for integrators.
pub fn dynamics_vec(x: &Vec12, u: &ControlInput, p: &VehicleParams) -> Result<Vec12> {
    dynamics(&StateVector::from_vector(x), u, p).map(|d| d.to_vector())
}

/// Per-rotor speed at which four rotors carry the vehicle's weight.
pub fn hover_rotor_speed(p: &VehicleParams) -> f64 {
    (p.weight() / (4.0 * p.thrust_constant)).sqrt()
}

pub fn rad_per_sec_to_rpm(omega: f64) -> f64 {
    omega * 60.0 / (2.0 * PI)
}

/// `skew` re-export kept close to the kinematics that use it.
pub fn cross_matrix(v: &Vec3) -> Mat3 {
    skew(v)
}
