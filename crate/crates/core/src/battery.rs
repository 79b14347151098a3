//! One-RC Thevenin pack: open-circuit voltage, per-step algebraic solve, voltage-sag derating and endurance.

#[allow(unused_imports)]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::vehicle::{RotorSpeeds, VehicleParams};

/// Unit the resistance fields are expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ResistanceUnit {
    Ohm,
    Milliohm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct BatteryParams {
    /// A h
    pub capacity_ah: f64,
    pub r0: f64,
    pub r1: f64,
    pub resistance_unit: ResistanceUnit,
    /// F
    pub c1: f64,
    /// OCV quadratic coefficients, V.
    pub nu: [f64; 3],
    pub eta_rot: f64,
    /// V
    pub v_nom: f64,
    pub soc_floor: f64,
}

impl Default for BatteryParams {
    fn default() -> Self {
        BatteryParams {
            capacity_ah: 3.0,
            r0: 0.04,
            r1: 0.05,
            resistance_unit: ResistanceUnit::Ohm,
            c1: 2.5,
            nu: [14.0, 4.8, -2.0],
            eta_rot: 0.8,
            v_nom: 14.8,
            soc_floor: 0.3,
        }
    }
}

impl BatteryParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.capacity_ah, self.r0, self.r1, self.c1, self.eta_rot, self.v_nom];
        if !positive.iter().all(|v| v.is_finite() && *v > 0.0) {
            return Err(Error::InvalidConfig("battery constants must be finite and positive"));
        }
        if self.eta_rot > 1.0 {
            return Err(Error::InvalidConfig("rotor efficiency cannot exceed one"));
        }
        if !(0.0..1.0).contains(&self.soc_floor) {
            return Err(Error::InvalidConfig("state-of-charge floor must lie in [0, 1)"));
        }
        if self.ocv_at(1.0) <= 0.0 || self.ocv_at(0.0) <= 0.0 {
            return Err(Error::InvalidConfig("open-circuit voltage must be positive"));
        }
        Ok(())
    }

    fn scale(&self) -> f64 {
        match self.resistance_unit {
            ResistanceUnit::Ohm => 1.0,
            ResistanceUnit::Milliohm => 1e-3,
        }
    }

    /// Ohmic resistance in ohms.
    pub fn r0_ohm(&self) -> f64 {
        self.r0 * self.scale()
    }

    /// Polarization resistance in ohms.
    pub fn r1_ohm(&self) -> f64 {
        self.r1 * self.scale()
    }

    /// RC time constant, s.
    pub fn tau_rc(&self) -> f64 {
        self.r1_ohm() * self.c1
    }

    pub fn capacity_coulomb(&self) -> f64 {
        self.capacity_ah * 3600.0
    }

    pub fn ocv_at(&self, soc: f64) -> f64 {
        self.nu[0] + self.nu[1] * soc + self.nu[2] * soc * soc
    }
}

/// Open-circuit voltage `nu0 + nu1 soc + nu2 soc^2`.
pub fn ocv(soc: f64, p: &BatteryParams) -> f64 {
    p.ocv_at(soc)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BatteryState {
    pub soc: f64,
    /// Polarization voltage, V.
    pub v1: f64,
    /// Terminal voltage, V.
    pub v_term: f64,
    /// A
    pub i_draw: f64,
    /// Power drawn on the last step, W.
    pub p_elec: f64,
}

impl BatteryState {
    /// Relaxed pack at the given charge.
    pub fn at_rest(soc: f64, p: &BatteryParams) -> Self {
        BatteryState { soc, v1: 0.0, v_term: p.ocv_at(soc), i_draw: 0.0, p_elec: 0.0 }
    }

    pub fn full(p: &BatteryParams) -> Self {
        Self::at_rest(1.0, p)
    }
}

/// Rotor electrical power `sum kM w^3 / eta`.
pub fn electrical_power(omega_in: &RotorSpeeds, p: &BatteryParams, vp: &VehicleParams) -> f64 {
    omega_in.0.iter().map(|w| vp.torque_constant * w * w * w).sum::<f64>() / p.eta_rot
}

/// Closed form of the hover power `(kM / 2 eta) (m g / kT)^{3/2}`.
pub fn hover_power(p: &BatteryParams, vp: &VehicleParams) -> f64 {
    vp.torque_constant / (2.0 * p.eta_rot) * (vp.weight() / vp.thrust_constant).powf(1.5)
}

/// Terminal voltage and current for a power demand: the larger root of
/// `V^2 - (Voc - V1) V + R0 P = 0`.
pub fn solve_terminal(voc: f64, v1: f64, r0: f64, power: f64) -> Result<(f64, f64)> {
    let b = voc - v1;
    if r0 == 0.0 {
        return if b > 0.0 { Ok((b, power / b)) } else { Err(Error::PowerInfeasible { demand: power, max: 0.0 }) };
    }
    let disc = b * b - 4.0 * r0 * power;
    let max = if b > 0.0 { b * b / (4.0 * r0) } else { 0.0 };
    if disc < 0.0 || b <= 0.0 {
        return Err(Error::PowerInfeasible { demand: power, max });
    }
    let v = 0.5 * (b + disc.sqrt());
    Ok((v, power / v))
}

/// Damped fixed-point alternative to [`solve_terminal`].
pub fn solve_terminal_iterative(voc: f64, v1: f64, r0: f64, power: f64) -> Result<(f64, f64)> {
    let b = voc - v1;
    let max = if r0 > 0.0 { b * b / (4.0 * r0) } else { f64::INFINITY };
    if b <= 0.0 || power > max {
        return Err(Error::PowerInfeasible { demand: power, max: max.max(0.0) });
    }
    let mut v = b;
    for _ in 0..200 {
        let next = b - r0 * power / v;
        let v_new = 0.5 * (v + next);
        if (v_new - v).abs() <= 1e-13 * v.abs() {
            v = v_new;
            break;
        }
        v = v_new;
    }
    let residual = (v - (b - r0 * power / v)).abs() / v;
    if residual > 1e-10 {
        return Err(Error::PowerInfeasible { demand: power, max });
    }
    Ok((v, power / v))
}

/// One step of the pack under constant power: algebraic solve at the
/// current charge, explicit Euler on charge, exact update of the RC branch.
pub fn dae_step(bs: &BatteryState, power: f64, p: &BatteryParams, dt: f64) -> Result<BatteryState> {
    let power = power.max(0.0);
    let (v, i) = solve_terminal(p.ocv_at(bs.soc), bs.v1, p.r0_ohm(), power)?;
    let soc = (bs.soc - i * dt / p.capacity_coulomb()).max(0.0);
    let decay = (-dt / p.tau_rc()).exp();
    let v1 = bs.v1 * decay + p.r1_ohm() * i * (1.0 - decay);
    Ok(BatteryState { soc, v1, v_term: v, i_draw: i, p_elec: power })
}

/// Speeds derated in proportion to terminal-voltage sag below nominal.
pub fn sag_scaled_command(omega_in: &RotorSpeeds, bs: &BatteryState, p: &BatteryParams) -> RotorSpeeds {
    let ratio = (bs.v_term / p.v_nom).clamp(0.0, 1.0);
    RotorSpeeds(omega_in.0 * ratio)
}

/// Load applied during an endurance integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerProfile<'a> {
    Constant(f64),
    /// Samples at spacing `dt`, repeated cyclically.
    Trace {
        samples: &'a [f64],
        dt: f64,
    },
}

impl PowerProfile<'_> {
    fn at(&self, t: f64) -> f64 {
        match self {
            PowerProfile::Constant(p) => *p,
            PowerProfile::Trace { samples, dt } => {
                if samples.is_empty() {
                    0.0
                } else {
                    let idx = (t / dt) as usize % samples.len();
                    samples[idx]
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnduranceReport {
    /// Minutes until the charge reaches the floor; `None` if it never does.
    pub minutes_to_floor: Option<f64>,
    /// Minutes until the charge reaches zero; `None` if it never does.
    pub minutes_to_empty: Option<f64>,
    /// Energy delivered up to the floor, Wh.
    pub energy_to_floor_wh: f64,
    /// Minutes per watt-hour up to the floor.
    pub eta_eff: Option<f64>,
    pub avg_power: f64,
    pub avg_current: f64,
}

/// Discharges from `soc0` at step `dt` until empty, an infeasible demand or `max_minutes`.
pub fn endurance(
    profile: PowerProfile<'_>,
    p: &BatteryParams,
    soc0: f64,
    dt: f64,
    max_minutes: f64,
) -> Result<EnduranceReport> {
    if !(dt > 0.0) {
        return Err(Error::InvalidConfig("endurance step must be positive"));
    }
    let mut bs = BatteryState::at_rest(soc0, p);
    let mut t = 0.0;
    let mut energy = 0.0;
    let mut charge = 0.0;
    let mut to_floor = None;
    let mut to_empty = None;
    let mut energy_floor = 0.0;
    let mut charge_floor = 0.0;
    let horizon = max_minutes * 60.0;
    let mut floor_time_s = None;

    while t < horizon {
        let demand = profile.at(t);
        let next = match dae_step(&bs, demand, p, dt) {
            Ok(n) => n,
            Err(e) => {
                if to_floor.is_none() {
                    return Err(e);
                }
                break;
            }
        };
        let drawn = bs.soc - next.soc;
        if to_floor.is_none() && next.soc <= p.soc_floor && drawn > 0.0 {
            let frac = ((bs.soc - p.soc_floor) / drawn).clamp(0.0, 1.0);
            let tf = t + frac * dt;
            to_floor = Some(tf / 60.0);
            floor_time_s = Some(tf);
            energy_floor = energy + next.p_elec * frac * dt;
            charge_floor = charge + next.i_draw * frac * dt;
        }
        if next.soc <= 0.0 && drawn > 0.0 {
            let frac = (bs.soc / drawn).clamp(0.0, 1.0);
            to_empty = Some((t + frac * dt) / 60.0);
            energy += next.p_elec * frac * dt;
            charge += next.i_draw * frac * dt;
            t += frac * dt;
            break;
        }
        energy += next.p_elec * dt;
        charge += next.i_draw * dt;
        t += dt;
        bs = next;
    }

    let (span, e, q) = match floor_time_s {
        Some(tf) => (tf, energy_floor, charge_floor),
        None => (t, energy, charge),
    };
    let energy_wh = e / 3600.0;
    Ok(EnduranceReport {
        minutes_to_floor: to_floor,
        minutes_to_empty: to_empty,
        energy_to_floor_wh: if to_floor.is_some() { energy_wh } else { 0.0 },
        eta_eff: to_floor.map(|m| if energy_wh > 0.0 { m / energy_wh } else { f64::INFINITY }),
        avg_power: if span > 0.0 { e / span } else { 0.0 },
        avg_current: if span > 0.0 { q / span } else { 0.0 },
    })
}
